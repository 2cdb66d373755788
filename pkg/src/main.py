# -*- coding: utf-8 -*-

import argparse
import logging
import sys
from typing import List, Optional

from .config import VERSION, log_config, validate_config
from .handlers import (
    cmd_convergence,
    cmd_mesh_check,
    cmd_mesh_gen,
    cmd_ml,
    cmd_reproduce,
    cmd_solve,
    cmd_tracer,
)
from .jobs import STUDY_BUILDERS

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    """构建命令行解析器。诊断信息走 stderr，stdout 只输出请求的数据。"""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--quiet', action='store_true', help='只输出警告及以上级别的日志')
    common.add_argument('--out', default=None, help='输出目录')

    parser = argparse.ArgumentParser(prog='tfd-fem', description='时间分数阶扩散方程的半解析有限元求解器')
    parser.add_argument('--version', action='version', version=f'%(prog)s {VERSION}')
    sub = parser.add_subparsers(dest='command', required=True)

    solve = sub.add_parser('solve', parents=[common], help='按 JSON 配置求解')
    solve.add_argument('--config', required=True)
    solve.add_argument('--gamma', type=float, action='append', help='可重复，覆盖配置中的 γ')

    conv = sub.add_parser('convergence', parents=[common], help='网格收敛性研究')
    conv.add_argument('--case', required=True, help='diffusion1d / advection1d / diffusion2d / quarter_disk')
    conv.add_argument('--gamma', type=float, default=0.8)
    conv.add_argument('--n', type=int, nargs='+', required=True, help='网格密度序列')
    conv.add_argument('--time', type=float, required=True)
    conv.add_argument('--order', type=int, default=1, choices=(1, 2))

    tracer = sub.add_parser('tracer', parents=[common], help='径向示踪穿透曲线')
    tracer.add_argument('--config', default=None, help='场景覆盖项 JSON')
    tracer.add_argument('--gamma', type=float, action='append', help='可重复，γ=1.0 总会被加入')

    ml = sub.add_parser('ml', parents=[common], help='计算 Mittag-Leffler 函数')
    ml.add_argument('--gamma', type=float, required=True)
    ml.add_argument('--re', type=float, required=True)
    ml.add_argument('--im', type=float, default=0.0)

    mesh = sub.add_parser('mesh', help='网格工具')
    mesh_sub = mesh.add_subparsers(dest='mesh_command', required=True)
    gen = mesh_sub.add_parser('gen', parents=[common], help='生成结构化网格')
    gen.add_argument('kind', choices=('interval', 'rectangle', 'quarter_disk'))
    gen.add_argument('path')
    gen.add_argument('--length', type=float, default=1.0)
    gen.add_argument('--height', type=float, default=1.0)
    gen.add_argument('--n', type=int, default=10)
    gen.add_argument('--ny', type=int, default=None)
    gen.add_argument('--order', type=int, default=1, choices=(1, 2))
    gen.add_argument('--refine', type=int, default=2)
    check = mesh_sub.add_parser('check', parents=[common], help='校验网格文件')
    check.add_argument('path')

    reproduce = sub.add_parser('reproduce', parents=[common], help='复现参考研究')
    reproduce.add_argument('--study', required=True, choices=tuple(STUDY_BUILDERS))
    return parser


def dispatch(args: argparse.Namespace) -> int:
    if args.command == 'solve':
        return cmd_solve(args.config, args.out, args.gamma)
    if args.command == 'convergence':
        return cmd_convergence(args.case, args.n, args.time, args.gamma, args.order, args.out)
    if args.command == 'tracer':
        return cmd_tracer(args.gamma, args.out, args.config)
    if args.command == 'ml':
        return cmd_ml(args.gamma, args.re, args.im)
    if args.command == 'mesh':
        if args.mesh_command == 'gen':
            return cmd_mesh_gen(
                args.kind, args.path, args.length, args.height, args.n, args.ny, args.order, args.refine,
            )
        return cmd_mesh_check(args.path)
    return cmd_reproduce(args.study, args.out)


def main(argv: Optional[List[str]] = None) -> int:
    """命令行入口，返回退出码。"""
    args = build_parser().parse_args(argv)
    validate_config()
    if getattr(args, 'quiet', False):
        logging.getLogger().setLevel(logging.WARNING)
    else:
        log_config()
    return dispatch(args)


if __name__ == '__main__':
    sys.exit(main())
