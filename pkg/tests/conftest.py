"""
测试公共夹具
"""

from typing import Callable, Sequence

import numpy as np
import pytest

from app.core.logging import setup_logging
from app.core.metric import build_metric, metric_from_matrix
from app.models.domain import Instance
from app.schemas.params_schemas import GeneratorConfig, PrivacyParams, SolveParams
from app.services.generator_service import generate_matern, generate_poisson, make_rng
from app.services.instance_service import make_instance


@pytest.fixture(autouse=True, scope="session")
def _quiet_logging():
    setup_logging("WARNING", to_file=False)


@pytest.fixture
def privacy() -> PrivacyParams:
    return PrivacyParams(epsilon=0.1, alpha=0.1)


@pytest.fixture
def solve_params(privacy) -> SolveParams:
    return SolveParams(privacy=privacy, delta=0.2)


@pytest.fixture
def line_instance() -> Callable[..., Instance]:
    """一维直线上的实例：xs 为横坐标"""

    def _make(xs: Sequence[float], f: Sequence[float], b: Sequence[int]) -> Instance:
        pts = np.column_stack((np.asarray(xs, dtype=float), np.zeros(len(xs))))
        return make_instance(build_metric(pts), f, b)

    return _make


@pytest.fixture
def matrix_instance() -> Callable[..., Instance]:
    def _make(distances, f, b) -> Instance:
        return make_instance(metric_from_matrix(distances), f, b)

    return _make


@pytest.fixture
def random_instance() -> Callable[..., Instance]:
    """单位正方形内均匀随机的小实例"""

    def _make(n: int, seed: int, f_range=(0.0, 1.0), b_max: int = 5) -> Instance:
        rng = make_rng(seed)
        pts = rng.random((n, 2))
        f = rng.uniform(*f_range, size=n)
        b = rng.integers(0, b_max + 1, size=n)
        return make_instance(build_metric(pts), f, b)

    return _make


@pytest.fixture(scope="session")
def clustered_instance() -> Instance:
    return generate_matern(GeneratorConfig(n=1000, gamma=2.0, delta_gen=0.2, seed=7))


@pytest.fixture(scope="session")
def poisson_instance() -> Instance:
    return generate_poisson(GeneratorConfig(n=200, seed=11))
