"""
求解接口
POST /api/instances/generate、POST /api/solve、POST /api/density
"""

from fastapi import APIRouter
from loguru import logger

from app.core.trace import TraceContext
from app.schemas.api_schemas import ApiResponse, DensityRequest, GenerateRequest, SolveRequest, SolveResult
from app.schemas.params_schemas import PrivacyParams, SolveParams
from app.services.evaluation_service import check_capacities, normalized_cost, total_cost
from app.services.generator_service import STREAM_NOISE, density_check, generate, make_rng
from app.services.instance_service import instance_from_document, instance_to_document, solution_to_document
from app.services.solver_service import optimal_assignment, solve, solve_optimal

router = APIRouter()

_log = logger.bind(name="app.api.routes.solve_routes")


@router.post("/instances/generate", response_model=ApiResponse)
def generate_instance(request: GenerateRequest):
    """生成合成实例，返回实例文档"""
    inst = generate(request.process, request.config)
    _log.info(f"🏙️ 实例生成: process={request.process}, seed={request.config.seed}, n={inst.n}")
    return ApiResponse(data=instance_to_document(inst).model_dump(mode="json"))


@router.post("/solve", response_model=ApiResponse)
def solve_instance(request: SolveRequest):
    """运行指定算法，并相对非隐私最优解评估"""
    inst = instance_from_document(request.instance)
    sp = SolveParams(privacy=PrivacyParams(epsilon=request.epsilon, alpha=request.alpha), delta=request.delta)

    with TraceContext("api_solve", quiet=False, algorithm=request.algorithm, n=inst.n):
        h = optimal_assignment(inst)
        opt = total_cost(inst, solve_optimal(inst, h)).total
        sol = solve(inst, request.algorithm, sp, make_rng(request.seed, STREAM_NOISE), assignment=h)
        cost = total_cost(inst, sol)
        feasibility = check_capacities(inst, sol)

    result = SolveResult(
        solution=solution_to_document(sol),
        cost=cost,
        feasibility=feasibility,
        opt_cost=opt,
        normalized_cost=normalized_cost(cost.total, opt) if opt > 0 else None,
    )
    _log.info(f"✅ 求解完成: algorithm={request.algorithm}, n={inst.n}, 总成本={cost.total:.6f}")
    return ApiResponse(data=result.model_dump(mode="json", exclude_none=True))


@router.post("/density", response_model=ApiResponse)
def check_density(request: DensityRequest):
    """密度前提检查"""
    inst = instance_from_document(request.instance)
    report = density_check(inst, request.delta, request.gamma)
    data = report.model_dump()
    data["all_hold"] = report.all_hold
    return ApiResponse(data=data)
