"""Experiment runners shared by the command line and the acceptance suite.

Each runner returns an :class:`ExperimentResult` holding one or more
:class:`~solgeo.stats.TestReport` objects plus optional raw samples.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from solgeo.errors import DomainError, NonFiniteError
from solgeo.geometry import (
    SolParams,
    SolPoint,
    dist_hp,
    estimate_distance,
    estimate_distance_between,
    lower_bound_i,
    lower_bound_ii,
    upper_bound_iii,
    upper_bound_iv,
    vertical_geodesic,
)
from solgeo.harmonic import (
    OMEGA,
    GaussianBump,
    GridSpec,
    KernelSpec,
    MeasureSpec,
    PlaneGrid,
    bounded_witness,
    conjugation_check,
    eigen_residual,
    eval_kernel,
    lambda_min,
    reversibility_check,
    scaling_check,
    sol_eigenfunction,
    translation_invariance_check,
)
from solgeo.sde import SimConfig, simulate_batch
from solgeo.stats import (
    LABEL_CENTRE,
    LABEL_MINUS,
    LABEL_PLUS,
    LABEL_UNDECIDED,
    ReferenceLaw,
    SampleSet,
    TestReport,
    classify_batch,
    clt_sample,
    deviation_summaries,
    dist_clt_sample,
    distance_reference,
    escape_rate,
    hill_sweep,
    ks_statistic,
    reference_sample,
    tail_exponent,
)

__all__ = [
    "ExperimentResult",
    "simulate_experiment",
    "coordinate_clt",
    "distance_clt",
    "escape_experiment",
    "tails_experiment",
    "deviation_experiment",
    "boundary_experiment",
    "scheme_agreement",
    "eigen_suite",
    "identity_suite",
    "sandwich_suite",
    "preservation_checks",
    "random_sandwich_points",
]

_NORMAL = ReferenceLaw("std-normal")


@dataclass
class ExperimentResult:
    reports: list
    samples: SampleSet | None = None
    path: object = None
    info: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(r.passed for r in self.reports)

    def __add__(self, other):
        return ExperimentResult(self.reports + other.reports, self.samples or other.samples,
                                self.path or other.path, {**self.info, **other.info})


def _rp(params, dt, T, **extra):
    d = {"p": params.p, "q": params.q, "a": params.a, "dt": dt, "T": T}
    d.update(extra)
    return d


# --- simulation sanity ------------------------------------------------------

def simulate_experiment(params, T, N, seed, dt=1e-3, scheme="euler", save_every=None,
                        workers=1):
    """Martingale and drift checks at time ``T``, plus the first path on its grid."""
    cfg = SimConfig(params, T=T, dt=dt, seed=seed, scheme=scheme, save_every=save_every)
    b = simulate_batch(cfg, N, workers=workers, local=True)
    if np.any(b.overflow):
        raise NonFiniteError(f"{int(np.sum(b.overflow))} of {N} paths overflow double precision "
                             "before T; reduce T or |a|")
    rp = _rp(params, dt, T, scheme=scheme)
    reports = []
    z = b.Z[:, -1]
    reports.append(TestReport("simulate.z_mean_se", abs(z.mean() - params.a * T) / np.sqrt(T / N),
                              3.0, N, seed, rp))
    for name, v in (("x", b.X[:, -1]), ("y", b.Y[:, -1])):
        se = v.std(ddof=1) / np.sqrt(N)
        val = abs(v.mean()) / se if se > 0 and np.isfinite(se) else np.inf
        reports.append(TestReport(f"simulate.{name}_mean_se", val, 3.0, N, seed, rp))
    samples = SampleSet(np.column_stack([b.X[:, -1], b.Y[:, -1], z]), "X,Y,Z", T) if N >= 100 else None
    return ExperimentResult(reports, samples, b.path(0))


# --- central limit theorems -------------------------------------------------

def coordinate_clt(params, t, N, seed, dt=1e-3, scheme="euler", workers=1,
                   ref_steps=100_000, ks_tol=0.06, p95_tol=0.5, z_tol=None):
    """Normalised coordinates at time ``t`` against their limit laws.

    ``z_tol`` defaults to the 0.1% critical value ``1.95 / sqrt(N)`` of the
    one-sample KS statistic; the vertical coordinate is exactly Gaussian.
    """
    cfg = SimConfig(params, T=t, dt=dt, seed=seed, scheme=scheme)
    s = clt_sample(cfg, N, t, workers=workers)
    v = s.values
    rp = _rp(params, dt, t, scheme=scheme)
    reports = []
    if params.a > 0:
        reports.append(TestReport("clt.x_vs_normal", ks_statistic(v[:, 0] / params.p, _NORMAL),
                                  ks_tol, N, seed, rp))
        reports.append(TestReport("clt.y_p95", float(np.percentile(np.abs(v[:, 1]), 95)),
                                  p95_tol, N, seed, rp))
    elif params.a < 0:
        reports.append(TestReport("clt.y_vs_normal", ks_statistic(v[:, 1] / params.q, _NORMAL),
                                  ks_tol, N, seed, rp))
        reports.append(TestReport("clt.x_p95", float(np.percentile(np.abs(v[:, 0]), 95)),
                                  p95_tol, N, seed, rp))
    else:
        ref = reference_sample(ReferenceLaw("scaled-bm-functional", params.p, params.q), N,
                               ref_steps, seed=seed)
        reports.append(TestReport("clt.x_vs_pMmax", ks_statistic(v[:, 0], ref.values[:, 0]),
                                  ks_tol, N, seed, dict(rp, ref_steps=ref_steps)))
        reports.append(TestReport("clt.y_vs_qMmin", ks_statistic(v[:, 1], ref.values[:, 1]),
                                  ks_tol, N, seed, dict(rp, ref_steps=ref_steps)))
    if z_tol is None:
        z_tol = 1.95 / np.sqrt(N)
    reports.append(TestReport("clt.z_vs_normal", ks_statistic(v[:, 2], _NORMAL), z_tol, N, seed, rp))
    return ExperimentResult(reports, s)


def distance_clt(params, t, N, seed, dt=1e-3, scheme="euler", workers=1, ref_steps=100_000,
                 ks_tol=0.08, surrogate="auto"):
    """Normalised distance surrogate at time ``t`` against its limit law."""
    cfg = SimConfig(params, T=t, dt=dt, seed=seed, scheme=scheme)
    s = dist_clt_sample(cfg, N, t, workers=workers, surrogate=surrogate)
    rp = _rp(params, dt, t, scheme=scheme, surrogate=surrogate)
    if params.a != 0:
        ks = ks_statistic(s, _NORMAL)
        name = "dist_clt.vs_normal"
    else:
        ref = reference_sample(ReferenceLaw("scaled-bm-functional"), N, ref_steps, seed=seed)
        ks = ks_statistic(s, distance_reference(ref))
        name = "dist_clt.vs_2(Mmax-Mmin)-|N|"
        rp["ref_steps"] = ref_steps
    info = {"mean": float(s.values.mean()), "se": float(s.values.std(ddof=1) / np.sqrt(s.N))}
    return ExperimentResult([TestReport(name, ks, ks_tol, s.N, seed, rp, info)], s)


# --- rate of escape ---------------------------------------------------------

def escape_experiment(params, t, N, seed, dt=1e-2, scheme="euler", workers=1,
                      width_tol=0.3, high_tol=0.25):
    """Sandwich interval for ``dist / t``.

    For ``a != 0`` the interval must contain ``|a|`` and be narrower than
    ``width_tol``; for ``a = 0`` its upper end must stay below ``high_tol``.
    """
    cfg = SimConfig(params, T=t, dt=dt, seed=seed, scheme=scheme)
    e = escape_rate(cfg, t, N, workers=workers)
    rp = _rp(params, dt, t, scheme=scheme)
    info = {"low": e.low, "high": e.high, "mean_low": e.mean_low, "mean_high": e.mean_high,
            "skipped": e.n_skipped}
    a = abs(params.a)
    if params.a != 0:
        miss = max(e.low - a, a - e.high, 0.0)
        reports = [
            TestReport("escape.contains_|a|", miss, 0.0, N, seed, rp, info),
            TestReport("escape.width", e.width, width_tol, N, seed, rp, info),
        ]
    else:
        reports = [TestReport("escape.high", e.high, high_tol, N, seed, rp, info)]
    return ExperimentResult(reports, info={"interval": e})


# --- tails ------------------------------------------------------------------

def tails_experiment(params, N, seed, dt=0.05, k=None, cutoff=None, scheme="time-change",
                     workers=1, rel_tol=0.15, first_path=0):
    """Hill estimate of the tail exponent of the lateral limit.

    ``a > 0``: ``Y_inf`` with exponent ``2a/q``; ``a < 0``: ``X_inf`` with
    exponent ``2|a|/p``.
    """
    from solgeo.sde import x_infinity, y_infinity

    if params.a == 0:
        raise DomainError("the lateral limits exist only for a != 0")
    cfg = SimConfig(params, T=dt, dt=dt, seed=seed, scheme=scheme)
    if params.a > 0:
        lim = y_infinity(cfg, N, first_path=first_path, cutoff=cutoff, workers=workers)
        kappa = 2 * params.a / params.q
    else:
        lim = x_infinity(cfg, N, first_path=first_path, cutoff=cutoff, workers=workers)
        kappa = 2 * abs(params.a) / params.p
    if k is None:
        k = max(1000, N // 50)
    k = min(k, N // 10)
    s = SampleSet(lim, "Y_inf" if params.a > 0 else "X_inf")
    est = tail_exponent(s, k)
    sweep = {str(kk): e.kappa_hat for kk, e in hill_sweep(s, k).items()}
    rel = abs(est.kappa_hat - kappa) / kappa
    rp = _rp(params, dt, cutoff, scheme=scheme, k=k)
    info = {"kappa": kappa, "kappa_hat": est.kappa_hat, "ci": [est.ci_low, est.ci_high],
            "sweep": sweep}
    return ExperimentResult([TestReport("tails.kappa_rel_err", rel, rel_tol, N, seed, rp, info)], s)


# --- deviation from the limit geodesic --------------------------------------

def deviation_experiment(params, T, n_paths, seed, dt=0.1, slack=1.0, coverage=0.95,
                         scheme="time-change", tail=None):
    """Fraction of paths whose ``max proxy / log n`` on ``[T/2, T]`` exceeds ``2/|a| + slack``."""
    cfg = SimConfig(params, T=dt, dt=dt, seed=seed, scheme=scheme)
    summ = deviation_summaries(cfg, n_paths, T, tail=tail)
    bound = 2.0 / abs(params.a) + slack
    frac = float(np.mean(summ > bound))
    rp = _rp(params, dt, T, scheme=scheme, slack=slack)
    info = {"bound": bound, "max_summary": float(summ.max()),
            "median_summary": float(np.median(summ))}
    return ExperimentResult(
        [TestReport("deviation.fraction_above_bound", frac, 1.0 - coverage, n_paths, seed, rp, info)],
        info={"summaries": summ},
    )


# --- boundary pieces --------------------------------------------------------

def boundary_experiment(params, T, N, seed, dt=1e-2, scheme="euler", workers=1,
                        correct_tol=0.01, centre_tol=0.05):
    """Classify ``N`` paths at horizon ``T`` from their values at ``T/2`` and ``T``."""
    n = int(round(T / dt))
    cfg = SimConfig(params, T=T, dt=dt, seed=seed, scheme=scheme, save_every=n // 2)
    b = simulate_batch(cfg, N, workers=workers)
    labels = classify_batch(b, params)
    counts = {lab: int(np.sum(labels == lab))
              for lab in (LABEL_PLUS, LABEL_MINUS, LABEL_CENTRE, LABEL_UNDECIDED)}
    rp = _rp(params, dt, T, scheme=scheme)
    if params.a > 0:
        reports = [TestReport("boundary.wrong_fraction", 1 - counts[LABEL_PLUS] / N,
                              correct_tol, N, seed, rp, counts)]
    elif params.a < 0:
        reports = [TestReport("boundary.wrong_fraction", 1 - counts[LABEL_MINUS] / N,
                              correct_tol, N, seed, rp, counts)]
    else:
        drifted = (counts[LABEL_PLUS] + counts[LABEL_MINUS]) / N
        other = 1 - (counts[LABEL_CENTRE] + counts[LABEL_UNDECIDED]) / N
        reports = [
            TestReport("boundary.drifted_with_converged_coordinate", drifted, 0.0, N, seed, rp, counts),
            TestReport("boundary.not_centre_or_undecided", other, centre_tol, N, seed, rp, counts),
        ]
    return ExperimentResult(reports, info={"labels": labels})


# --- scheme cross-validation ------------------------------------------------

def scheme_agreement(params, T, N, seed, dt=1e-3, tol=0.03, workers=1):
    """Two-sample KS between euler and time-change marginals of ``X_T`` and ``Y_T``.

    The two schemes use the seeds ``seed`` and ``seed + 1`` so that the
    samples are independent.
    """
    e = simulate_batch(SimConfig(params, T=T, dt=dt, seed=seed), N, workers=workers)
    c = simulate_batch(SimConfig(params, T=T, dt=dt, seed=seed + 1, scheme="time-change"), N,
                       workers=workers)
    rp = _rp(params, dt, T)
    reports = [
        TestReport("schemes.x_ks", ks_statistic(e.X[:, -1], c.X[:, -1]), tol, N, seed, rp),
        TestReport("schemes.y_ks", ks_statistic(e.Y[:, -1], c.Y[:, -1]), tol, N, seed, rp),
        TestReport("schemes.z_ks", ks_statistic(e.Z[:, -1], c.Z[:, -1]), tol, N, seed, rp),
    ]
    return ExperimentResult(reports)


# --- harmonic ---------------------------------------------------------------

def _random_measure(rng, n_atoms=3, omega_prob=0.3):
    atoms = []
    for _ in range(n_atoms):
        w = float(rng.uniform(0.1, 1.0))
        if rng.random() < omega_prob:
            atoms.append((OMEGA, w))
        else:
            atoms.append((float(rng.normal(0.0, 2.0)), w))
    return MeasureSpec(tuple(atoms))


def eigen_suite(n_configs=50, seed=0, grid=None, tol=1e-5, tol_min=1e-6, tol_classical=1e-12):
    """Randomised eigen-residuals, the bottom-of-spectrum function, the classical kernel."""
    rng = np.random.default_rng(seed)
    grid = grid or GridSpec()
    worst = 0.0
    for _ in range(n_configs):
        params = SolParams(float(rng.uniform(0.5, 2.0)), float(rng.uniform(0.5, 2.0)),
                           float(rng.uniform(-1.0, 1.0)))
        lam = lambda_min(params.a) + float(rng.uniform(0.0, 2.0))
        worst = max(worst, eigen_residual(_random_measure(rng), _random_measure(rng), params,
                                          lam, grid))
    reports = [TestReport("harmonic.random_eigen_residual", worst, tol, n_configs, seed)]

    worst_min = 0.0
    for a in (-1.0, -0.3, 0.0, 0.7, 1.5):
        for p, q in ((1.0, 1.0), (0.5, 2.0)):
            params = SolParams(p, q, a)
            r = eigen_residual(MeasureSpec(((OMEGA, 1.0),)), MeasureSpec(), params,
                               lambda_min(a), grid)
            worst_min = max(worst_min, r)
    reports.append(TestReport("harmonic.lambda_min_residual", worst_min, tol_min, 10, seed))

    x = rng.normal(0.0, 2.0, 1000)
    z = rng.uniform(-3.0, 3.0, 1000)
    xi = rng.normal(0.0, 2.0, 1000)
    worst_cl = 0.0
    for xx, zz, e in zip(x, z, xi):
        k = eval_kernel(KernelSpec("first", 1.0, -0.5, 0.0, float(e)), (xx, zz))
        classical = (e * e + 1.0) * np.exp(zz) / ((e - xx) ** 2 + np.exp(2.0 * zz))
        worst_cl = max(worst_cl, abs(k - classical) / classical)
    reports.append(TestReport("harmonic.classical_kernel_rel_err", worst_cl, tol_classical, 1000, seed))

    params = SolParams(1.0, 1.5, 0.6)
    r = eigen_residual(MeasureSpec(), bounded_witness(params), params, 0.0, grid)
    reports.append(TestReport("harmonic.bounded_witness_residual", r, tol, 1, seed))
    return ExperimentResult(reports)


def identity_suite(seed=0, tol_inv=1e-5, tol_conj=1e-6, tol_rev=1e-3):
    """Translation invariance, scaling, conjugation and reversibility."""
    rng = np.random.default_rng(seed)
    grid = GridSpec(half_widths=(0.5, 0.5, 0.5))
    reports = []

    worst = 0.0
    for _ in range(5):
        params = SolParams(float(rng.uniform(0.5, 2)), float(rng.uniform(0.5, 2)),
                           float(rng.uniform(-1, 1)))
        lam = lambda_min(params.a) + float(rng.uniform(0, 1))
        h = sol_eigenfunction(_random_measure(rng, omega_prob=0.0),
                              _random_measure(rng, omega_prob=0.0), params, lam)
        g0 = SolPoint(*rng.normal(0.0, 1.0, 3))
        worst = max(worst, translation_invariance_check(h, g0, params, grid))
    reports.append(TestReport("identity.translation_invariance", worst, tol_inv, 5, seed))

    pgrid = PlaneGrid(half_widths=(1.0, 1.0))
    worst = 0.0
    for p in (0.5, 2.0, 3.0):
        spec = KernelSpec("first", p, 0.4, 0.3, 0.7)
        worst = max(worst, scaling_check(lambda x, z, s=spec: eval_kernel(s, (x, z)), p, 0.4, pgrid))
    reports.append(TestReport("identity.scaling", worst, tol_conj, 3, seed))

    worst = 0.0
    for abar, lam in ((1.0, 0.0), (-0.5, 0.0), (0.3, 0.4), (-1.2, lambda_min(-1.2))):
        for xi in (OMEGA, 0.0, 1.3):
            spec = KernelSpec("first", 1.0, abar, lam, xi)
            worst = max(worst, conjugation_check(lambda x, z, s=spec: eval_kernel(s, (x, z)),
                                                 abar, pgrid, lambdabar=lam))
    reports.append(TestReport("identity.conjugation", worst, tol_conj, 12, seed))

    params = SolParams(1.0, 1.0, 0.7)
    box = ((-2.5, 2.5), (-2.5, 2.5), (-2.5, 2.5))
    f = GaussianBump(SolPoint(0.2, -0.1, 0.1), 0.3)
    g = GaussianBump(SolPoint(-0.1, 0.2, -0.2), 0.3)
    d64 = reversibility_check(f, g, params, box, n=64)
    d128 = reversibility_check(f, g, params, box, n=128)
    reports.append(TestReport("identity.reversibility_64", d64, tol_rev, 64**3, seed))
    reports.append(TestReport("identity.reversibility_refinement", d128 - d64, 0.0, 128**3, seed,
                              extra={"d64": d64, "d128": d128}))
    return ExperimentResult(reports)


# --- geometry ---------------------------------------------------------------

def random_sandwich_points(n, seed, lo=1e-2, hi=1e2, zmax=10.0):
    """Points with ``|x|, |y|`` log-uniform on ``[lo, hi]``, random signs, ``|z| <= zmax``."""
    rng = np.random.default_rng(seed)
    mag = np.exp(rng.uniform(np.log(lo), np.log(hi), (n, 2)))
    sign = rng.choice([-1.0, 1.0], (n, 2))
    z = rng.uniform(-zmax, zmax, n)
    return SolPoint(mag[:, 0] * sign[:, 0], mag[:, 1] * sign[:, 1], z)


def sandwich_suite(params, n_points, seed, segments=1024, iters=10, slack=1e-3, points=None):
    """Count points violating ``max(i, ii) <= estimate <= min(iii, iv) + slack``.

    ``points`` is an optional ``(n, 3)`` array used instead of random points.
    """
    if points is None:
        pts = random_sandwich_points(n_points, seed)
    else:
        pts = SolPoint(*np.asarray(points, dtype=float).reshape(-1, 3).T)
        n_points = len(pts.x)
    lower = np.maximum(lower_bound_i(pts), lower_bound_ii(pts, params))
    upper = np.minimum(upper_bound_iii(pts, params), upper_bound_iv(pts, params))
    est = np.array([estimate_distance((x, y, z), params, segments=segments, iters=iters)
                    for x, y, z in zip(*pts)])
    viol = (lower > est) | (est > upper + slack)
    rp = {"p": params.p, "q": params.q, "segments": segments, "iters": iters}
    info = {"max_excess_over_upper": float(np.max(est - upper)),
            "min_gap_to_lower": float(np.min(est - lower))}
    return ExperimentResult(
        [TestReport("geometry.sandwich_violations", float(np.sum(viol)), 0.0, n_points, seed, rp, info)],
        info={"points": pts, "estimate": est, "lower": lower, "upper": upper},
    )


def preservation_checks(params, n_points, seed, segments=1024, iters=10, tol=1e-3):
    """Distances between points that differ only in (x, z), (y, z) or z."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_points):
        x1, x2, y0 = rng.uniform(-5, 5, 3)
        z1, z2 = rng.uniform(-3, 3, 2)
        pairs = [
            (SolPoint(x1, y0, z1), SolPoint(x2, y0, z2),
             dist_hp(params.p, (x1, z1), (x2, z2))),
            (SolPoint(y0, x1, z1), SolPoint(y0, x2, z2),
             dist_hp(params.q, (x1, -z1), (x2, -z2))),
            (SolPoint(x1, y0, z1), SolPoint(x1, y0, z2), abs(z1 - z2)),
        ]
        for g1, g2, exact in pairs:
            est = estimate_distance_between(g1, g2, params, segments=segments, iters=iters)
            worst = max(worst, abs(est - exact))
        # vertical geodesics have unit speed
        s, t = sorted(rng.uniform(0, 6, 2))
        for direction in ("up", "down"):
            g1 = vertical_geodesic(y0, direction, s)
            g2 = vertical_geodesic(y0, direction, t)
            est = estimate_distance_between(g1, g2, params, segments=segments, iters=iters)
            worst = max(worst, abs(est - (t - s)))
    rp = {"p": params.p, "q": params.q, "segments": segments, "iters": iters}
    return ExperimentResult([TestReport("geometry.preservation_max_err", worst, tol, n_points, seed, rp)])


def scaled(params, **kw):
    return replace(params, **kw)
