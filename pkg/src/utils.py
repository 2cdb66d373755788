# -*- coding: utf-8 -*-

import json
import os
import tempfile
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
import pytz

from .config import CSV_FLOAT_FORMAT, RESULT_TIMEZONE, VERSION


def write_text_atomic(path: Path, text: str) -> None:
    """先写同目录临时文件再 os.replace，读者不会看到半截文件。"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix='.tmp', dir=path.parent)
    try:
        with os.fdopen(fd, 'w', encoding='utf-8', newline='\n') as fh:
            fh.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def frame_to_csv_text(df: pd.DataFrame) -> str:
    return df.to_csv(index=False, float_format=CSV_FLOAT_FORMAT, lineterminator='\n', na_rep='')


def write_csv(df: pd.DataFrame, path: Path) -> None:
    write_text_atomic(Path(path), frame_to_csv_text(df))


def _jsonable(value: Any):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"无法序列化为 JSON: {type(value).__name__}")


def dump_json(payload: Any) -> str:
    return json.dumps(payload, ensure_ascii=False, indent=2, sort_keys=True, default=_jsonable) + '\n'


def write_json(payload: Any, path: Path) -> None:
    write_text_atomic(Path(path), dump_json(payload))


def now_in_result_tz(now: Optional[datetime] = None) -> datetime:
    tz = pytz.timezone(RESULT_TIMEZONE)
    current = now or datetime.now(tz)
    if current.tzinfo is None:
        return tz.localize(current)
    return current.astimezone(tz)


def generated_at(now: Optional[datetime] = None) -> str:
    return now_in_result_tz(now).isoformat(timespec='seconds')


def format_gamma(gamma: float) -> str:
    """目录名里的 γ 写法: 0.8 -> '0.8'，1.0 -> '1'。"""
    return f"{gamma:g}"


@dataclass
class ResultTable:
    """表格结果: 列名 + 行数据 + 元数据 (配置哈希、版本)。"""
    columns: List[str]
    rows: List[Sequence[Any]] = field(default_factory=list)
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.metadata.setdefault('version', VERSION)

    def add_row(self, *values: Any) -> None:
        if len(values) != len(self.columns):
            raise ValueError(f"行长度 {len(values)} 与列数 {len(self.columns)} 不一致")
        self.rows.append(tuple(values))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(list(self.rows), columns=self.columns)

    def write(self, path: Path) -> None:
        write_csv(self.to_frame(), path)
