import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ssfkymo.kymograph import quantize_cohort  # noqa: E402
from ssfkymo.ncd import get_compressor, pairwise_matrix  # noqa: E402
from ssfkymo.synth import SyntheticSpec, generate_benchmark  # noqa: E402

# desk-scale constant-velocity benchmark shared by the NCD and CSF checks
BENCH_SPEC = SyntheticSpec(class_means=(1.0, 3.0, 5.0), sigma=0.5, n_tracks=10, n_per_class=30, dims=(64, 64, 50), seed=0)

_ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def acceptance_log():
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def bench_items():
    return generate_benchmark(BENCH_SPEC)


@pytest.fixture(scope="session")
def bench_quantized(bench_items):
    out = {}
    for channel in ("velocity", "random"):
        qs = quantize_cohort([it.channels[channel] for it in bench_items])
        for q, it in zip(qs, bench_items):
            q.name = it.name
        out[channel] = qs
    return out


@pytest.fixture(scope="session")
def bench_matrices(bench_quantized):
    """Velocity matrix with both concatenation orders, random with one.

    Returns ``{channel: (DistanceMatrix, seconds)}``.
    """
    out = {}
    for channel, symmetrize in (("velocity", True), ("random", False)):
        start = time.perf_counter()
        dm = pairwise_matrix(bench_quantized[channel], get_compressor("lzma"), symmetrize=symmetrize)
        out[channel] = (dm, time.perf_counter() - start)
    return out
