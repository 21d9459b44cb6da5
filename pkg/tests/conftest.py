import numpy as np
import pytest

from conegeo import diagnostics as dg
from conegeo.sampler import KERNELS, OBSERVABLES, PotentialParams, SamplerConfig, run_chains


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def default_run():
    """Both kernels at the default configuration: 4 chains x 20k steps, d = 3.

    Returns ``(traces_by_kernel, reports_by_kernel)``.
    """
    p = PotentialParams()
    obs = dg.canonical_observables(p.X0)
    traces, reports = {}, {}
    for kernel in KERNELS:
        ts = run_chains(p, SamplerConfig(kernel=kernel), workers=1)
        traces[kernel] = ts
        reports[kernel] = dg.summarize_method(
            kernel, {o: [t.kept(o) for t in ts] for o in OBSERVABLES},
            [t.acceptance_rate for t in ts], [t.wall_seconds for t in ts],
            [t.kept_states() for t in ts], obs)
    return traces, reports


def pytest_terminal_summary(terminalreporter):
    from _acceptance_log import LINES
    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
