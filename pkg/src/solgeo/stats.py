"""Monte Carlo statistics for the large-time behaviour of the diffusion.

Every sampler here is a deterministic function of its configuration and
seed. Samples are gathered first; statistics are computed afterwards on the
gathered arrays.
"""

from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit
from scipy import stats as sps

from solgeo.errors import DomainError
from solgeo.geometry import (
    SolParams,
    SolPoint,
    deviation_proxy,
    lower_bound_i,
    translated_proxy,
    upper_bound_iii,
    upper_bound_iv,
)
from solgeo.rng import CH_AUX, _check_key, normal_pair
from solgeo.sde import default_cutoff, simulate_batch

__all__ = [
    "SampleSet",
    "ReferenceLaw",
    "TestReport",
    "TailEstimate",
    "EscapeInterval",
    "DeviationProfile",
    "LABEL_PLUS",
    "LABEL_MINUS",
    "LABEL_CENTRE",
    "LABEL_UNDECIDED",
    "ks_statistic",
    "reference_sample",
    "distance_reference",
    "clt_sample",
    "escape_rate",
    "dist_clt_sample",
    "tail_exponent",
    "hill_sweep",
    "deviation_profile",
    "lateral_frame",
    "deviation_summaries",
    "boundary_classify",
    "classify_batch",
]


@dataclass
class SampleSet:
    """Sample of a functional; ``values`` has one row per draw."""

    values: np.ndarray
    label: str
    t: float | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if len(self.values) < 100:
            raise DomainError(f"a sample needs at least 100 draws, got {len(self.values)}")

    @property
    def N(self):
        return len(self.values)

    def column(self, k, label=None):
        return SampleSet(self.values[:, k], label or f"{self.label}[{k}]", self.t)

    def to_csv(self, fh):
        v = self.values if self.values.ndim == 2 else self.values[:, None]
        names = self.label.split(",") if v.shape[1] > 1 else [self.label]
        if len(names) != v.shape[1]:
            names = [f"{self.label}_{k}" for k in range(v.shape[1])]
        fh.write(",".join(names) + "\n")
        for row in v:
            fh.write(",".join(repr(float(c)) for c in row) + "\n")


@dataclass(frozen=True)
class ReferenceLaw:
    """``std-normal``, or ``scaled-bm-functional`` = ``(p max W, -q min W, W_1)``."""

    kind: str
    p: float = 1.0
    q: float = 1.0

    def __post_init__(self):
        if self.kind not in ("std-normal", "scaled-bm-functional"):
            raise DomainError(f"unknown reference law {self.kind!r}")


@dataclass
class TestReport:
    """Named statistic against a threshold; passes iff ``value <= threshold``."""

    __test__ = False

    name: str
    value: float
    threshold: float
    N: int
    seed: int
    params: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    @property
    def passed(self):
        return bool(np.isfinite(self.value) and self.value <= self.threshold)

    def to_dict(self):
        out = {
            "name": self.name,
            "params": dict(self.params, N=int(self.N), seed=int(self.seed)),
            "statistic": float(self.value),
            "threshold": float(self.threshold),
            "pass": self.passed,
        }
        if self.extra:
            out["extra"] = self.extra
        return out

    def line(self):
        verdict = "PASS" if self.passed else "FAIL"
        return f"{verdict}  {self.name}: {self.value:.6g} <= {self.threshold:.6g} (N={self.N})"


@dataclass(frozen=True)
class TailEstimate:
    kappa_hat: float
    k: int
    ci_low: float
    ci_high: float


@dataclass(frozen=True)
class EscapeInterval:
    """Confidence interval around the sandwich for ``dist(Z_t, o) / t``.

    ``mean_low`` and ``mean_high`` are the sample means of ``|Z_t| / t`` and
    of the staircase bound over ``t``. ``low`` and ``high`` widen them by
    ``z_score`` standard errors.
    """

    low: float
    high: float
    mean_low: float
    mean_high: float
    se_low: float
    se_high: float
    n_used: int
    n_skipped: int

    @property
    def width(self):
        return self.high - self.low


@dataclass
class DeviationProfile:
    n: np.ndarray
    ratio: np.ndarray
    summary: float


# --- KS and reference laws --------------------------------------------------

def _values(s):
    v = s.values if isinstance(s, SampleSet) else np.asarray(s, dtype=float)
    if v.ndim != 1:
        raise DomainError("KS statistics need a one-dimensional sample")
    return v


def ks_statistic(sample, reference):
    """Kolmogorov-Smirnov distance to a law or to another sample.

    ``reference`` is a ``ReferenceLaw`` of kind ``std-normal`` (one-sample
    test against the normal CDF) or a second sample (two-sample test).
    """
    x = _values(sample)
    if isinstance(reference, ReferenceLaw):
        if reference.kind != "std-normal":
            raise DomainError("only the standard normal has a closed-form CDF; pass a sample")
        return float(sps.kstest(x, "norm").statistic)
    return float(sps.ks_2samp(x, _values(reference)).statistic)


@njit(cache=True)
def _bm_extrema(seed, first, n, steps, out):
    sd = 1.0 / np.sqrt(steps)
    for i in range(n):
        path = first + i
        w = 0.0
        hi = 0.0
        lo = 0.0
        nxt = 0.0
        for k in range(steps):
            if k & 1:
                dw = nxt
            else:
                dw, nxt = normal_pair(seed, path, k >> 1, CH_AUX)
            w += sd * dw
            if w > hi:
                hi = w
            if w < lo:
                lo = w
        out[i, 0] = hi
        out[i, 1] = lo
        out[i, 2] = w


def reference_sample(law, N, steps=100_000, seed=0, first=0):
    """Draws from a reference law.

    ``std-normal`` gives ``N`` standard normals. ``scaled-bm-functional``
    gives rows ``(p max W, -q min W, W_1)`` from standard Brownian motion on
    ``[0, 1]`` with ``steps`` increments, using the auxiliary channel of the
    counter stream.
    """
    _check_key(seed, first + N - 1)
    if law.kind == "std-normal":
        out = np.empty((N, 3))
        _bm_extrema(np.uint64(seed), first, N, 1, out)
        return SampleSet(out[:, 2], "N")
    if steps < 10_000:
        raise DomainError("extrema laws need at least 1e4 steps")
    out = np.empty((N, 3))
    _bm_extrema(np.uint64(seed), first, N, steps, out)
    vals = np.column_stack([law.p * out[:, 0], -law.q * out[:, 1], out[:, 2]])
    return SampleSet(vals, "pMmax,-qMmin,N")


def distance_reference(ref):
    """``2 (max W - min W) - |W_1|`` from an unscaled extrema sample."""
    v = ref.values
    return SampleSet(2.0 * (v[:, 0] + v[:, 1]) - np.abs(v[:, 2]), "2(Mmax-Mmin)-|N|")


# --- samplers ---------------------------------------------------------------

def _endpoint(config, N, t, workers, first_path):
    cfg = replace(config, T=float(t), save_every=None)
    return simulate_batch(cfg, N, first_path=first_path, workers=workers)


def clt_sample(config, N, t, workers=1, first_path=0):
    """Normalised coordinate triples at time ``t``.

    ``a > 0``: ``((log|X| - p a t), log|Y|, Z - a t) / sqrt(t)``;
    ``a < 0``: ``(log|X|, log|Y| + q a t, Z - a t) / sqrt(t)``;
    ``a = 0``: ``(log|X|, log|Y|, Z) / sqrt(t)``.
    """
    pr = config.params
    rate = pr.p * pr.a if pr.a > 0 else -pr.q * pr.a
    if pr.a != 0 and rate * t < 10:
        raise DomainError("horizon too short: need p |a| t >= 10 (q |a| t for a < 0)")
    b = _endpoint(config, N, t, workers, first_path)
    lx, ly, z = b.log_abs_x[:, -1], b.log_abs_y[:, -1], b.Z[:, -1]
    st = np.sqrt(t)
    if pr.a > 0:
        vals = np.column_stack([lx - pr.p * pr.a * t, ly, z - pr.a * t]) / st
    elif pr.a < 0:
        vals = np.column_stack([lx, ly + pr.q * pr.a * t, z - pr.a * t]) / st
    else:
        vals = np.column_stack([lx, ly, z]) / st
    return SampleSet(vals, "clt_x,clt_y,clt_z", t)


def _endpoint_points(config, N, t, workers, first_path):
    b = _endpoint(config, N, t, workers, first_path)
    return b.X[:, -1], b.Y[:, -1], b.Z[:, -1], b


def escape_rate(config, t, N, workers=1, first_path=0, z_score=3.0):
    """Sandwich for the rate of escape at time ``t``.

    Paths with ``X_t = 0`` or ``Y_t = 0`` (probability zero) are skipped
    and counted.
    """
    if t < 100:
        raise DomainError("escape_rate needs t >= 100")
    x, y, z, b = _endpoint_points(config, N, t, workers, first_path)
    if np.any(b.overflow):
        raise DomainError("lateral coordinates overflowed; shorten t")
    ok = (x != 0) & (y != 0)
    g = SolPoint(x[ok], y[ok], z[ok])
    lo = lower_bound_i(g) / t
    hi = upper_bound_iv(g, config.params) / t
    n = int(ok.sum())
    se_lo = lo.std(ddof=1) / np.sqrt(n)
    se_hi = hi.std(ddof=1) / np.sqrt(n)
    return EscapeInterval(
        low=float(lo.mean() - z_score * se_lo),
        high=float(hi.mean() + z_score * se_hi),
        mean_low=float(lo.mean()),
        mean_high=float(hi.mean()),
        se_low=float(se_lo),
        se_high=float(se_hi),
        n_used=n,
        n_skipped=int(N - n),
    )


SURROGATES = ("auto", "min", "iv")


def dist_clt_sample(config, N, t, workers=1, first_path=0, surrogate="auto"):
    """Normalised distance surrogates at time ``t``.

    ``surrogate="iv"`` uses the staircase bound, ``"min"`` uses
    ``min(iii, iv)``; ``"auto"`` picks the staircase bound for ``a != 0`` and
    the minimum for ``a = 0``. For ``a != 0`` the values are
    ``(D - |a| t) / sqrt(t)``, for ``a = 0`` they are ``D / sqrt(t)``.
    """
    if surrogate not in SURROGATES:
        raise DomainError(f"surrogate must be one of {SURROGATES}")
    if surrogate == "auto":
        surrogate = "iv" if config.params.a != 0 else "min"
    x, y, z, b = _endpoint_points(config, N, t, workers, first_path)
    ok = (x != 0) & (y != 0)
    g = SolPoint(x[ok], y[ok], z[ok])
    d = upper_bound_iv(g, config.params)
    if surrogate == "min":
        d = np.minimum(d, upper_bound_iii(g, config.params))
    a = abs(config.params.a)
    vals = (d - a * t) / np.sqrt(t)
    return SampleSet(vals, "dist_clt", t)


# --- tails ------------------------------------------------------------------

def tail_exponent(samples, k):
    """Hill estimate of the polynomial tail exponent from the ``k`` largest values."""
    x = np.abs(_values(samples))
    N = len(x)
    if k < 1 or k > N // 10:
        raise DomainError(f"need 1 <= k <= N/10, got k={k}, N={N}")
    pos = x[x > 0]
    if len(pos) <= k:
        raise DomainError(f"fewer than k={k} positive samples")
    top = np.sort(pos)[-(k + 1):]
    kappa = k / np.sum(np.log(top[1:] / top[0]))
    half = 1.96 / np.sqrt(k)
    return TailEstimate(float(kappa), int(k), float(kappa * (1 - half)), float(kappa * (1 + half)))


def hill_sweep(samples, k):
    """Estimates at ``k/2, k, 2k`` (those admissible for the sample size)."""
    n = len(_values(samples))
    return {kk: tail_exponent(samples, kk) for kk in (k // 2, k, 2 * k) if 1 <= kk <= n // 10}


# --- deviation from the limit geodesic --------------------------------------

def _integer_rows(times):
    n = np.rint(times)
    return np.nonzero((np.abs(times - n) < 1e-9) & (n >= 2))[0]


def deviation_profile(path, y_inf, params, lateral=None):
    """``proxy(Z_n) / log n`` at the integer times ``n >= 2`` of ``path``.

    By default the proxy is evaluated from the linear coordinates against
    ``y_inf`` (``x_inf`` when ``a < 0``). For long horizons, where
    ``Y_n - Y_inf`` underflows, pass ``lateral = (u, v)``: the translated
    coordinates on the whole grid, e.g. from :func:`lateral_frame`.
    """
    if params.a == 0:
        raise DomainError("the limit geodesic exists only for a != 0")
    rows = _integer_rows(path.times)
    n = np.rint(path.times[rows])
    if lateral is not None:
        u, v = (np.asarray(c)[rows] for c in lateral)
        prox = translated_proxy(u, v, params)
    elif params.a > 0:
        g = SolPoint(path.X[rows], path.Y[rows], path.Z[rows])
        prox = deviation_proxy(g, y_inf, params)
    else:
        # (x, y, z) -> (y, x, -z) maps Sol(p, q) onto Sol(q, p)
        swapped = SolParams(params.q, params.p, -params.a)
        g = SolPoint(path.Y[rows], path.X[rows], -path.Z[rows])
        prox = deviation_proxy(g, y_inf, swapped)
    ratio = prox / np.log(n)
    T = path.times[-1]
    window = n >= T / 2
    summary = float(np.max(ratio[window])) if np.any(window) else float("nan")
    return DeviationProfile(n, ratio, summary)


def lateral_frame(batch, i, params):
    """Translated coordinates ``(u_j, v_j)`` of path ``i`` on the saved grid.

    For ``a > 0``: ``u = e^{-pZ} X`` and ``v = e^{qZ} (Y - Y_inf)`` where the
    limit is taken at the end of the grid. ``v`` is obtained by summing the
    rescaled increments backwards, which stays accurate when ``Y - Y_inf``
    is far below the float resolution of ``Y``. ``a < 0`` is the mirror
    image with ``x`` and ``y`` exchanged.
    """
    z = batch.Z[i]
    dz = np.diff(z)
    if params.a > 0:
        u = batch.sign_x[i] * np.exp(batch.log_abs_x[i] - params.p * z)
        r = _backward(batch.hy[i], np.exp(-params.q * dz))
        return u, -r
    v = batch.sign_y[i] * np.exp(batch.log_abs_y[i] + params.q * z)
    r = _backward(batch.hx[i], np.exp(params.p * dz))
    return -r, v


@njit(cache=True)
def _backward(h, decay):
    n = h.shape[0]
    r = np.zeros(n)
    for j in range(n - 2, -1, -1):
        r[j] = h[j] + decay[j] * r[j + 1]
    return r


def deviation_summaries(config, n_paths, T, tail=None, first_path=0, chunk=1):
    """Per-path max of ``proxy / log n`` over integer ``n`` in ``[T/2, T]``.

    Paths are simulated on unit save intervals up to ``T + tail`` so that the
    transversal limit is resolved to ``1e-12`` relative accuracy at ``T``.
    """
    pr = config.params
    if pr.a == 0:
        raise DomainError("the limit geodesic exists only for a != 0")
    if tail is None:
        tail = default_cutoff(pr, tol=1e-12)
    per_unit = int(round(1.0 / config.dt))
    if abs(per_unit * config.dt - 1.0) > 1e-9:
        raise DomainError("dt must divide 1 for unit save intervals")
    total = float(T + tail)
    cfg = replace(config, T=total, save_every=per_unit)
    out = np.empty(n_paths)
    for start in range(0, n_paths, chunk):
        m = min(chunk, n_paths - start)
        b = simulate_batch(cfg, m, first_path=first_path + start, local=True)
        rows = np.nonzero((b.times >= T / 2 - 1e-9) & (b.times <= T + 1e-9))[0]
        rows = rows[b.times[rows] >= 2]
        ln = np.log(np.rint(b.times[rows]))
        for i in range(m):
            u, v = lateral_frame(b, i, pr)
            out[start + i] = np.max(translated_proxy(u[rows], v[rows], pr) / ln)
    return out


# --- boundary pieces --------------------------------------------------------

LABEL_PLUS = "varpi_p x R"
LABEL_MINUS = "R x varpi_q"
LABEL_CENTRE = "(varpi_p, varpi_q)"
LABEL_UNDECIDED = "undecided"


def classify_batch(batch, params, sigmas=4.0, tol=1e-6, growth=10.0):
    """Labels for every path of a batch from its values at ``T/2`` and ``T``.

    ``varpi_p x R``: ``Z_T > sigmas * sqrt(T)`` and ``Y`` has settled,
    ``|Y_T - Y_{T/2}| <= tol (1 + |Y_T|)``. ``R x varpi_q`` is the mirror
    image. ``(varpi_p, varpi_q)``: both ``log(|X_T| + e^{pZ_T})`` and
    ``log(|Y_T| + e^{-qZ_T})`` reach ``growth``. Otherwise ``undecided``.
    """
    t = batch.times
    T = t[-1]
    mid = int(np.argmin(np.abs(t - T / 2)))
    if mid == len(t) - 1:
        raise DomainError("the path grid must contain a point near T/2")
    z = batch.Z[:, -1]
    X, Y = batch.X, batch.Y
    settled_y = np.abs(Y[:, -1] - Y[:, mid]) <= tol * (1 + np.abs(Y[:, -1]))
    settled_x = np.abs(X[:, -1] - X[:, mid]) <= tol * (1 + np.abs(X[:, -1]))
    gx = np.logaddexp(batch.log_abs_x[:, -1], params.p * z)
    gy = np.logaddexp(batch.log_abs_y[:, -1], -params.q * z)
    thr = sigmas * np.sqrt(T)
    labels = np.full(len(z), LABEL_UNDECIDED, dtype=object)
    centre = (gx >= growth) & (gy >= growth)
    labels[centre] = LABEL_CENTRE
    labels[(z > thr) & settled_y] = LABEL_PLUS
    labels[(z < -thr) & settled_x] = LABEL_MINUS
    return labels


def boundary_classify(path, params, **kw):
    """Label of a single :class:`~solgeo.sde.BrownianPath` (see :func:`classify_batch`)."""

    class _One:
        times = path.times
        Z = path.Z[None, :]
        X = path.X[None, :]
        Y = path.Y[None, :]
        log_abs_x = path.log_abs_x[None, :]
        log_abs_y = path.log_abs_y[None, :]

    return classify_batch(_One, params, **kw)[0]


def report_params(config, N=None, t=None):
    pr = config.params
    d = {"p": pr.p, "q": pr.q, "a": pr.a, "dt": config.dt, "T": config.T if t is None else t}
    if N is not None:
        d["N"] = int(N)
    d["seed"] = int(config.seed)
    return d


__all__ += ["SURROGATES", "report_params"]
