"""
命令行入口
generate / realworld / solve / sweep / oracle / check-density / serve

退出码：0 成功；2 参数不合法；3 I/O 错误；4 实例生成失败
结果（实例、解、CSV、JSON 报告）写到 --out 或 stdout，日志一律写 stderr
"""

import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from loguru import logger
from pydantic import ValidationError

from app.core.config import settings
from app.core.exceptions import FacilityLocationError
from app.core.logging import setup_logging
from app.core.trace import set_run_id
from app.schemas.bench_schemas import ALGORITHM_ORDER, SweepConfig
from app.schemas.params_schemas import (
    BernoulliPresenceClients,
    ClientModel,
    ConstantClients,
    GeneratorConfig,
    PrivacyParams,
    SolveParams,
    TruncatedGaussianClients,
)

_log = logger.bind(name="app.cli")

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_IO = 3

# CLI 上的 bavg 对应配置里的 b_avg
_SWEEP_KINDS = {"delta": "delta", "epsilon": "epsilon", "n": "n", "bavg": "b_avg", "single": "single"}


def _gauss_clients() -> TruncatedGaussianClients:
    return TruncatedGaussianClients(
        mean=settings.GEN_CLIENT_MEAN,
        sd=settings.GEN_CLIENT_SD,
        lo=settings.GEN_CLIENT_LO,
        hi=settings.GEN_CLIENT_HI,
    )


def parse_clients(text: str) -> ClientModel:
    """gauss | const:K | bern:P"""
    kind, _, arg = text.partition(":")
    try:
        if kind == "gauss" and not arg:
            return _gauss_clients()
        if kind == "const":
            return ConstantClients(b_avg=int(arg))
        if kind == "bern":
            return BernoulliPresenceClients(p=float(arg), demand=_gauss_clients())
    except (ValueError, ValidationError) as e:
        raise argparse.ArgumentTypeError(f"客户数模型参数不合法: {text} ({e})") from e
    raise argparse.ArgumentTypeError(f"未知客户数模型: {text}（可选 gauss | const:K | bern:P）")


def _floats(text: str, count: Optional[int] = None) -> List[float]:
    try:
        values = [float(x) for x in text.split(",") if x.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"无法解析数值列表: {text}") from e
    if count is not None and len(values) != count:
        raise argparse.ArgumentTypeError(f"需要 {count} 个逗号分隔的数值: {text}")
    if not values:
        raise argparse.ArgumentTypeError("数值列表不能为空")
    return values


def parse_pair(text: str) -> Tuple[float, float]:
    lo, hi = _floats(text, 2)
    return lo, hi


def parse_grid(text: str) -> Tuple[float, float, float]:
    start, stop, step = _floats(text, 3)
    return start, stop, step


def parse_algorithms(text: str) -> List[str]:
    algos = [a.strip() for a in text.split(",") if a.strip()]
    unknown = [a for a in algos if a not in ALGORITHM_ORDER]
    if unknown or not algos:
        raise argparse.ArgumentTypeError(f"未知算法: {unknown}（可选 {','.join(ALGORITHM_ORDER)}）")
    return algos


def _add_generator_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--process", choices=["matern", "poisson"], default="matern", help="点过程")
    p.add_argument("--n", type=int, default=settings.GEN_N, help="期望位置数")
    p.add_argument("--gamma", type=float, default=settings.GEN_GAMMA, help="缩放参数 γ")
    p.add_argument("--delta-gen", type=float, default=settings.GEN_DELTA_GEN, help="聚类半径 δ_gen")
    p.add_argument("--clients", type=parse_clients, default=None, help="gauss | const:K | bern:P")
    p.add_argument(
        "--cost-range", type=parse_pair, default=(settings.GEN_COST_LO, settings.GEN_COST_HI), help="设施成本区间 LO,HI"
    )


def _add_solve_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epsilon", type=float, default=settings.EPSILON, help="隐私预算 ε")
    p.add_argument("--alpha", type=float, default=settings.ALPHA, help="总失败概率 α")
    p.add_argument("--delta", type=float, default=settings.DELTA, help="重连半径 δ")


def _add_out(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", default="-", help="输出路径，- 表示 stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fl-ldp", description="FL-Linear 本地差分隐私选址求解器")
    parser.add_argument("--log-level", default=None, help="日志级别（默认取 LOG_LEVEL）")
    parser.add_argument("--no-log-file", action="store_true", help="只输出到 stderr，不写日志文件")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="生成合成实例")
    _add_generator_flags(p)
    p.add_argument("--seed", type=int, default=0)
    _add_out(p)
    p.set_defaults(handler=cmd_generate)

    p = sub.add_parser("realworld", help="加载真实世界点表（缺省时使用合成替身）")
    p.add_argument("--table", default=None, help="id,x,y,clients 格式的 CSV")
    p.add_argument("--cost-range", type=parse_pair, default=(settings.GEN_COST_LO, settings.GEN_COST_HI))
    p.add_argument("--seed", type=int, default=0)
    _add_out(p)
    p.set_defaults(handler=cmd_realworld)

    p = sub.add_parser("solve", help="在实例上运行一个算法")
    p.add_argument("--instance", required=True)
    p.add_argument("--algo", choices=list(ALGORITHM_ORDER), required=True)
    _add_solve_flags(p)
    p.add_argument("--seed", type=int, default=0, help="噪声种子")
    _add_out(p)
    p.set_defaults(handler=cmd_solve)

    p = sub.add_parser("sweep", help="参数扫描，输出 CSV")
    p.add_argument("--kind", choices=list(_SWEEP_KINDS), required=True)
    p.add_argument("--grid", type=parse_grid, default=(0.0, 0.0, 1.0), help="START,STOP,STEP")
    p.add_argument("--values", type=_floats, default=None, help="显式扫描值，逗号分隔（覆盖 --grid）")
    p.add_argument("--trials", type=int, default=settings.BENCH_TRIALS)
    p.add_argument("--algos", type=parse_algorithms, default=list(ALGORITHM_ORDER), help="逗号分隔的算法列表")
    p.add_argument("--workers", type=int, default=settings.BENCH_WORKERS)
    p.add_argument("--record-runtime", action="store_true", help="记录耗时（输出不再逐字节可复现）")
    _add_generator_flags(p)
    _add_solve_flags(p)
    p.add_argument("--seed", type=int, default=settings.BENCH_MASTER_SEED, help="主种子")
    _add_out(p)
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("oracle", help="暴力枚举精确最优（n ≤ 8）")
    p.add_argument("--instance", required=True)
    p.set_defaults(handler=cmd_oracle)

    p = sub.add_parser("check-density", help="检查密度前提 |B(v,δ)| ≥ γ² ln² n")
    p.add_argument("--instance", required=True)
    p.add_argument("--delta", type=float, default=settings.DELTA)
    p.add_argument("--gamma", type=float, default=settings.GEN_GAMMA)
    p.add_argument("--full", action="store_true", help="输出每个位置的球大小")
    p.set_defaults(handler=cmd_check_density)

    p = sub.add_parser("serve", help="启动 HTTP 服务")
    p.add_argument("--host", default=settings.HOST)
    p.add_argument("--port", type=int, default=settings.PORT)
    p.set_defaults(handler=cmd_serve)
    return parser


def _generator_config(args: argparse.Namespace, seed: int) -> GeneratorConfig:
    return GeneratorConfig(
        n=args.n,
        gamma=args.gamma,
        delta_gen=args.delta_gen,
        client_model=args.clients or _gauss_clients(),
        cost_range=args.cost_range,
        seed=seed,
    )


def _solve_params(args: argparse.Namespace) -> SolveParams:
    return SolveParams(privacy=PrivacyParams(epsilon=args.epsilon, alpha=args.alpha), delta=args.delta)


def _write(out: str, data: bytes) -> None:
    if out in (None, "-"):
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
        return
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(data)
    _log.info(f"💾 已写入: {path}")


def _print_json(payload) -> None:
    _write("-", (json.dumps(payload, ensure_ascii=False, indent=2) + "\n").encode("utf-8"))


def _read_instance(path: str):
    from app.services.instance_service import load_instance

    return load_instance(Path(path).read_bytes())


def cmd_generate(args: argparse.Namespace) -> int:
    from app.services.generator_service import generate
    from app.services.instance_service import save_instance

    inst = generate(args.process, _generator_config(args, args.seed))
    _log.info(f"🏙️ 实例已生成: process={args.process}, n={inst.n}, b_avg={inst.b_avg:.3f}")
    _write(args.out, save_instance(inst))
    return EXIT_OK


def cmd_realworld(args: argparse.Namespace) -> int:
    from app.services.generator_service import realworld_standin
    from app.services.instance_service import load_realworld, save_instance

    data = Path(args.table).read_bytes() if args.table else realworld_standin(args.seed)
    inst = load_realworld(data, cost_range=args.cost_range, seed=args.seed)
    _write(args.out, save_instance(inst))
    return EXIT_OK


def cmd_solve(args: argparse.Namespace) -> int:
    from app.services.evaluation_service import check_capacities, total_cost
    from app.services.generator_service import STREAM_NOISE, make_rng
    from app.services.instance_service import save_solution
    from app.services.solver_service import solve

    inst = _read_instance(args.instance)
    sol = solve(inst, args.algo, _solve_params(args), make_rng(args.seed, STREAM_NOISE))
    cost = total_cost(inst, sol)
    feasibility = check_capacities(inst, sol)
    _log.info(
        f"✅ 求解完成: algo={args.algo}, 开放设施={len(sol.capacities)}, 总成本={cost.total:.6f}, "
        f"容量不足={feasibility.any_failure}"
    )
    _write(args.out, save_solution(sol))
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    from app.services.bench_service import emit_csv, format_csv, run_sweep

    cfg = SweepConfig(
        sweep_kind=_SWEEP_KINDS[args.kind],
        grid=args.grid,
        values=args.values,
        trials_per_point=args.trials,
        process=args.process,
        generator=_generator_config(args, 0),
        solve=_solve_params(args),
        algorithms=args.algos,
        master_seed=args.seed,
        output_path=None if args.out == "-" else args.out,
        workers=args.workers,
        record_runtime=args.record_runtime,
    )
    rows = run_sweep(cfg)
    if cfg.output_path:
        emit_csv(rows, cfg.output_path)
    else:
        _write("-", format_csv(rows).encode("utf-8"))
    return EXIT_OK


def cmd_oracle(args: argparse.Namespace) -> int:
    from app.services.evaluation_service import total_cost
    from app.services.solver_service import brute_force_oracle, solve_optimal

    inst = _read_instance(args.instance)
    oracle = brute_force_oracle(inst)
    optimal = total_cost(inst, solve_optimal(inst))
    _print_json({"oracle": oracle.model_dump(), "optimal": optimal.model_dump()})
    return EXIT_OK


def cmd_check_density(args: argparse.Namespace) -> int:
    from app.services.generator_service import density_check

    inst = _read_instance(args.instance)
    report = density_check(inst, args.delta, args.gamma)
    payload = report.model_dump() if args.full else report.model_dump(exclude={"ball_sizes", "holds"})
    payload["all_hold"] = report.all_hold
    _print_json(payload)
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    uvicorn.run("app.main:app", host=args.host, port=args.port, reload=settings.DEBUG, log_level="info")
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_level, to_file=False if args.no_log_file else None)
    set_run_id()
    try:
        return args.handler(args)
    except FacilityLocationError as e:
        _log.error(f"❌ {e.message}: {e.details}")
        return e.exit_code
    except ValidationError as e:
        _log.error(f"❌ 参数校验失败: {e.errors()}")
        return EXIT_INVALID
    except OSError as e:
        _log.error(f"❌ I/O 错误: {e}")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
