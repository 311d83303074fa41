"""Acceptance criteria, each at its stated tolerance.

Every criterion prints one ``PASS``/``FAIL`` line. Under pytest the lines are
collected and shown in the terminal summary; ``python tests/test_acceptance.py``
runs them all and prints the lines directly.
"""

import os
import sys
import time

import pytest

from solgeo import experiments as E
from solgeo.geometry import SolParams

SEED = 42
WORKERS = int(os.environ.get("SOLGEO_WORKERS", os.cpu_count() or 1))

# filled in as criteria run; read by the terminal-summary hook in conftest.py
LINES = {}

pytestmark = pytest.mark.slow


def _record(number, title, reports, elapsed):
    ok = all(r.passed for r in reports)
    worst = "; ".join(f"{r.name}={r.value:.4g} (<= {r.threshold:.4g})" for r in reports)
    line = f"{'PASS' if ok else 'FAIL'} criterion {number:>2}: {title} [{elapsed:.0f}s] {worst}"
    LINES[number] = line
    print(line, flush=True)
    return ok, line


def _run(number, title, fn):
    t0 = time.perf_counter()
    reports = fn()
    ok, line = _record(number, title, reports, time.perf_counter() - t0)
    return ok, line, reports


_CACHE = {}


def _criterion1_reports(dt):
    if dt not in _CACHE:
        _CACHE[dt] = E.coordinate_clt(SolParams(1, 1, 1), t=100, N=5000, seed=SEED, dt=dt,
                                      workers=WORKERS).reports
    return _CACHE[dt]


def criterion_1():
    return _run(1, "coordinate CLT, a=1", lambda: _criterion1_reports(1e-3))


def criterion_2():
    # t is not fixed by the criterion; at t=100 the pre-limit bias is still visible
    return _run(2, "coordinate CLT, a=0", lambda: E.coordinate_clt(
        SolParams(1, 1, 0), t=400, N=5000, seed=SEED, dt=1e-2, workers=WORKERS,
        ref_steps=100_000).reports)


def criterion_3():
    def go():
        r1 = E.distance_clt(SolParams(1, 1, 1), t=400, N=5000, seed=SEED, dt=0.05,
                            scheme="time-change", workers=WORKERS).reports
        r0 = E.distance_clt(SolParams(1, 1, 0), t=1600, N=5000, seed=SEED, dt=0.05,
                            scheme="time-change", workers=WORKERS, ref_steps=100_000).reports
        return r1 + r0
    return _run(3, "distance CLT, a=1 and a=0", go)


def criterion_4():
    def go():
        out = []
        for a in (-1.0, -0.5, 0.5, 1.0):
            out += E.escape_experiment(SolParams(1, 1, a), t=200, N=2000, seed=SEED, dt=1e-2,
                                       workers=WORKERS).reports
        out += E.escape_experiment(SolParams(1, 1, 0), t=400, N=2000, seed=SEED, dt=1e-2,
                                   workers=WORKERS).reports
        return out
    return _run(4, "rate of escape", go)


def criterion_5():
    def go():
        out = []
        for a, q in ((1.0, 1.0), (1.0, 2.0), (0.5, 1.0)):
            out += E.tails_experiment(SolParams(1, q, a), N=100_000, seed=SEED, k=2000,
                                      workers=WORKERS).reports
        return out
    return _run(5, "tail exponent of the lateral limit", go)


def criterion_6():
    def go():
        pr = SolParams(1, 1, 1)
        r5 = E.deviation_experiment(pr, T=100_000, n_paths=100, seed=SEED, slack=1.0).reports
        r6 = E.deviation_experiment(pr, T=1_000_000, n_paths=100, seed=SEED, slack=0.7).reports
        return r5 + r6
    return _run(6, "log-deviation from the limit geodesic", go)


def criterion_7():
    def go():
        out = []
        for a in (1.0, -1.0):
            out += E.boundary_experiment(SolParams(1, 1, a), T=100, N=1000, seed=SEED, dt=1e-2,
                                         workers=WORKERS).reports
        out += E.boundary_experiment(SolParams(1, 1, 0), T=10_000, N=1000, seed=SEED, dt=0.1,
                                     scheme="time-change", workers=WORKERS).reports
        return out
    return _run(7, "boundary classification", go)


def criterion_8():
    def go():
        t0 = time.perf_counter()
        reports = E.eigen_suite(n_configs=50, seed=SEED).reports
        assert time.perf_counter() - t0 < 60.0
        return reports
    return _run(8, "eigenfunction residuals", go)


def criterion_9():
    return _run(9, "identity suite", lambda: E.identity_suite(seed=SEED).reports)


def criterion_10():
    def go():
        pr = SolParams(1, 1, 0)
        return (E.sandwich_suite(pr, n_points=10_000, seed=SEED).reports
                + E.preservation_checks(pr, n_points=100, seed=SEED).reports)
    return _run(10, "metric-bound sandwich", go)


def criterion_11():
    def go():
        out = []
        for a in (0.0, 1.0):
            out += E.scheme_agreement(SolParams(1, 1, a), T=1.0, N=10_000, seed=SEED,
                                      workers=WORKERS).reports
        coarse = _criterion1_reports(1e-3)
        fine = _criterion1_reports(5e-4)
        for rc, rf in zip(coarse, fine):
            out.append(type(rc)(f"dt_halving.{rc.name}", abs(rc.value - rf.value),
                                rc.threshold / 2, rc.N, rc.seed,
                                {"dt": [1e-3, 5e-4]}, {"coarse": rc.value, "fine": rf.value}))
        return out
    return _run(11, "scheme cross-validation and dt halving", go)


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7, criterion_8, criterion_9, criterion_10, criterion_11]


@pytest.mark.parametrize("criterion", CRITERIA, ids=[f"criterion_{k}" for k in range(1, 12)])
def test_criterion(criterion):
    ok, line, reports = criterion()
    failed = [r.line() for r in reports if not r.passed]
    assert ok, line + "\n" + "\n".join(failed)


if __name__ == "__main__":
    results = [c()[0] for c in CRITERIA]
    print(f"{sum(results)}/{len(results)} criteria pass")
    sys.exit(0 if all(results) else 1)
