# -*- coding: utf-8 -*-

import os

# 测试使用固定的容差与时区，不受本机环境变量影响
os.environ.setdefault("LOG_LEVEL", "WARNING")
os.environ["RESULT_TIMEZONE"] = "Asia/Shanghai"
os.environ.setdefault("SWEEP_CONCURRENCY", "2")
