"""Shared desk-scale runs and the one-line-per-criterion acceptance report."""

import time

import pytest

from sthq.pipelines import experiments as ex
from sthq.pipelines.autoencoder import AEConfig, build_autoencoder, train_autoencoder_stage1
from sthq.pipelines.netcompress import NetCompressConfig

# the configurations behind the acceptance runs; the scalar sweep needs larger
# betas than the vector one to cover the same bpp range
NET_BETA = 0.3
VECTOR = dict(L=256, ph=2, pw=2)
SCALAR = dict(L=4, ph=1, pw=1)
VECTOR_BETAS = (1e-4, 3e-4, 1e-3)
SCALAR_BETAS = (1e-4, 1e-3, 1e-2)

_LINES: list[str] = []


@pytest.fixture
def criterion(capsys):
    """``criterion(n, ok, detail)`` prints the PASS/FAIL line for criterion n and asserts ok."""

    def report(n: int, ok: bool, detail: str) -> None:
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {detail}"
        _LINES.append(line)
        with capsys.disabled():
            print("\n" + line)
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def net_run():
    start = time.perf_counter()
    run = ex.net_point(NetCompressConfig(beta_total=NET_BETA))
    return run, time.perf_counter() - start


@pytest.fixture(scope="session")
def ae_runs():
    """Stage 1 once, then the vector and the scalar beta sweeps from the same weights."""
    start = time.perf_counter()
    cfg = AEConfig()
    data = ex.ae_data(cfg)
    W1 = train_autoencoder_stage1(build_autoencoder(cfg), data[0], cfg)
    vector = ex.ae_sweep(AEConfig(**VECTOR), VECTOR_BETAS, W1, data)
    scalar = ex.ae_sweep(AEConfig(**SCALAR), SCALAR_BETAS, W1, data)
    return {"vector": vector, "scalar": scalar, "test": data[1]}, time.perf_counter() - start
