import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=25, deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


def record(criterion: int | str, ok: bool, detail: str) -> None:
    line = f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line, flush=True)


@pytest.fixture
def acceptance():
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(autouse=True)
def _quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        yield


@pytest.fixture(scope="session")
def cp_model():
    from effbound.models import build_model
    return build_model("levy-cp-normal")


@pytest.fixture(scope="session")
def gamma_model():
    from effbound.models import build_model
    return build_model("levy-gamma")


@pytest.fixture(scope="session")
def decon_model():
    from effbound.models import build_model
    return build_model("decon-gamma-error")


def bumps(rng: np.random.Generator, x: np.ndarray, lo: float, hi: float, k: int = 3) -> np.ndarray:
    """Random smooth function: a sum of Gaussian bumps centred in [lo, hi]."""
    v = np.zeros_like(x)
    for _ in range(k):
        v += rng.normal() * np.exp(-(x - rng.uniform(lo, hi)) ** 2 / (2 * rng.uniform(0.3, 1.5) ** 2))
    return v
