# -*- coding: utf-8 -*-

import json
from datetime import datetime
from pathlib import Path

import numpy as np
import pandas as pd
import pytest
import pytz

from src.config import VERSION
from src.utils import (
    ResultTable,
    dump_json,
    format_gamma,
    frame_to_csv_text,
    generated_at,
    now_in_result_tz,
    write_json,
    write_text_atomic,
)


class TestAtomicWrite:
    """测试原子写文件。"""

    def test_creates_parent_dirs(self, tmp_path):
        path = tmp_path / 'a' / 'b' / 'out.txt'
        write_text_atomic(path, 'hello\n')
        assert path.read_text(encoding='utf-8') == 'hello\n'

    def test_no_temporary_left_behind(self, tmp_path):
        path = tmp_path / 'out.txt'
        write_text_atomic(path, 'first')
        write_text_atomic(path, 'second')
        assert path.read_text(encoding='utf-8') == 'second'
        assert [p.name for p in tmp_path.iterdir()] == ['out.txt']


class TestCsv:
    """测试 CSV 输出格式。"""

    def test_float_format_and_line_endings(self):
        df = pd.DataFrame({'t': [0.0, 0.1], 'u0': [1.0 / 3.0, 2.5]})
        text = frame_to_csv_text(df)
        assert text == 't,u0\n0,0.333333333333333\n0.1,2.5\n'

    def test_missing_values_are_empty(self):
        df = pd.DataFrame({'h': [1.0, 0.5], 'ratio': [np.nan, 1.99]})
        assert frame_to_csv_text(df).splitlines()[1] == '1,'


class TestJson:
    """测试 JSON 输出。"""

    def test_sorted_keys_and_trailing_newline(self):
        text = dump_json({'b': 1, 'a': 2})
        assert text.endswith('\n')
        assert text.index('"a"') < text.index('"b"')

    def test_numpy_and_path(self):
        payload = {'arr': np.array([1.0, 2.0]), 'x': np.float64(0.5), 'n': np.int64(3), 'p': Path('out')}
        assert json.loads(dump_json(payload)) == {'arr': [1.0, 2.0], 'x': 0.5, 'n': 3, 'p': 'out'}

    def test_unsupported_type(self):
        with pytest.raises(TypeError):
            dump_json({'s': {1, 2}})

    def test_write(self, tmp_path):
        path = tmp_path / 'summary.json'
        write_json({'gamma': 0.8}, path)
        assert json.loads(path.read_text(encoding='utf-8')) == {'gamma': 0.8}


class TestTimestamps:
    """测试结果时间戳时区。"""

    def test_naive_is_localized(self):
        stamp = generated_at(datetime(2024, 1, 2, 3, 4, 5))
        assert stamp == '2024-01-02T03:04:05+08:00'

    def test_aware_is_converted(self):
        utc = pytz.utc.localize(datetime(2024, 1, 1, 0, 0, 0))
        assert now_in_result_tz(utc).hour == 8


class TestFormatGamma:
    """测试 γ 的目录名写法。"""

    @pytest.mark.parametrize("gamma, expected", [(0.8, '0.8'), (1.0, '1'), (0.92, '0.92')])
    def test_format(self, gamma, expected):
        assert format_gamma(gamma) == expected


class TestResultTable:
    """测试表格结果。"""

    def test_default_version(self):
        assert ResultTable(['h']).metadata['version'] == VERSION

    def test_row_length_checked(self):
        table = ResultTable(['h', 'err'])
        with pytest.raises(ValueError):
            table.add_row(1.0)

    def test_write(self, tmp_path):
        table = ResultTable(['h', 'err'])
        table.add_row(1.0, 4.3e-4)
        table.add_row(0.5, 1.1e-4)
        table.write(tmp_path / 'out.csv')
        frame = pd.read_csv(tmp_path / 'out.csv')
        assert list(frame.columns) == ['h', 'err']
        assert len(frame) == 2
