"""Shared test helpers: independent profile constructions and random data.

The logistic profile here is written from scratch so tests do not lean on
the library's own profile code when checking library output.
"""

import numpy as np

from fiberflow.chart_geometry import BaseMetric, ChartMetricBlocks


def make_logistic(lower, width):
    def prof(rho):
        sig = 1.0 / (1.0 + np.exp(-rho))
        s1 = sig * (1.0 - sig)
        s2 = s1 * (1.0 - 2.0 * sig)
        s3 = s2 * (1.0 - 2.0 * sig) - 2.0 * s1 * s1
        return lower + width * sig, width * s1, width * s2, width * s3
    return prof


def random_structured_blocks(rng, n):
    """Well-conditioned random block data with consistent declared base."""
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    h = a @ a.conj().T + n * np.eye(n)
    lam = float(rng.uniform(0.5, 2.0))
    base = BaseMetric(n=n, h=h, ricci=lam * h, scalar=lam * n)
    s = rng.normal(size=n) + 1j * rng.normal(size=n)
    return ChartMetricBlocks(
        base=base,
        f=float(rng.uniform(0.5, 3.0)),
        s=s,
        g_fiber=float(rng.uniform(0.5, 3.0)),
    )


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Echo the acceptance scoreboard after the test summary, uncaptured."""
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "VERDICTS", None) if mod else None
    if lines:
        terminalreporter.section("acceptance gate")
        for line in lines:
            terminalreporter.write_line(line)
