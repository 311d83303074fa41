"""Brownian motion with vertical drift on Sol(p, q).

The process is ``Z_t = a t + W_t``, ``X_t = int_0^t e^{p Z_s} dW1_s`` and
``Y_t = int_0^t e^{-q Z_s} dW2_s`` with Ito integrals. Two schemes are
available:

``euler``
    Left-point Euler on every step for all three coordinates.
``time-change``
    Euler for ``Z`` only; the lateral coordinates are sampled at the saved
    grid times as Gaussians whose variance is the increment of the clock
    ``V_t(p) = int e^{2pZ}`` (resp. ``V_t(-q)``), accumulated by the
    trapezoid rule.

Because ``e^{pZ}`` grows exponentially, the lateral coordinates and clocks
are carried as ``(scale, mantissa)`` pairs, ``value = mantissa * e^scale``,
and reported as log-magnitude plus sign. Linear values are derived on
request and saturate at the largest float when they overflow.

Every Gaussian is a pure function of ``(seed, path, index, channel)``
through the Philox stream, so results do not depend on how paths are
distributed across workers.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

from solgeo.errors import DomainError
from solgeo.geometry import SolParams, SolPoint, group_inv, group_mul
from solgeo.rng import CH_W, CH_W1, CH_W2, _check_key, normal_at, normal_pair

__all__ = [
    "SCHEMES",
    "SimConfig",
    "BrownianPath",
    "PathBatch",
    "simulate",
    "simulate_batch",
    "simulate_path",
    "simulate_time_change",
    "increment",
    "default_cutoff",
    "y_infinity",
    "x_infinity",
]

SCHEMES = ("euler", "time-change")
_MAX_STEPS = 2**62


@dataclass(frozen=True)
class SimConfig:
    """Simulation settings.

    ``save_every`` is the number of steps between saved grid points; ``None``
    saves only ``t = 0`` and ``t = T``.
    """

    params: SolParams
    T: float
    dt: float = 1e-3
    seed: int = 0
    scheme: str = "euler"
    save_every: int | None = None

    def __post_init__(self):
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise DomainError(f"dt must be positive, got {self.dt}")
        if not (np.isfinite(self.T) and self.T >= self.dt):
            raise DomainError(f"T must satisfy 0 < dt <= T, got dt={self.dt}, T={self.T}")
        n = self.T / self.dt
        if n >= _MAX_STEPS:
            raise DomainError("T/dt does not fit in a step counter")
        if abs(round(n) - n) > 1e-6 * max(1.0, n):
            raise DomainError(f"T={self.T} is not an integer multiple of dt={self.dt}")
        if self.scheme not in SCHEMES:
            raise DomainError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.save_every is not None and self.save_every < 1:
            raise DomainError("save_every must be >= 1")
        _check_key(self.seed, 0)

    @property
    def n_steps(self):
        return int(round(self.T / self.dt))

    def save_steps(self):
        n = self.n_steps
        if self.save_every is None:
            return np.array([0, n], dtype=np.int64)
        idx = np.arange(0, n + 1, self.save_every, dtype=np.int64)
        if idx[-1] != n:
            idx = np.append(idx, n)
        return idx


# --- kernel -----------------------------------------------------------------

@njit(cache=True, inline="always")
def _acc_add(s, m, lg, c):
    """Add ``c * e^lg`` to the number ``m * e^s``; returns the new pair."""
    if m == 0.0:
        return lg, c
    if lg > s:
        return lg, m * np.exp(s - lg) + c
    return s, m + c * np.exp(lg - s)


@njit(cache=True, inline="always")
def _acc_log(s, m):
    if m == 0.0:
        return -np.inf
    return s + np.log(abs(m))


@njit(cache=True)
def _simulate_block(seed, path0, n_paths, n_steps, dt, p, q, a, save_idx, time_change, local, out):
    """Fill ``out[f, i, j]`` for field ``f``, path ``i``, save point ``j``.

    Fields: 0 W, 1 Z, 2 log|X|, 3 sign X, 4 log|Y|, 5 sign Y, 6 log Vp,
    7 log Vq, 8 hx, 9 hy, where hx, hy are the increments of X, Y over the
    interval starting at save point j, rescaled by e^{-pZ_j}, e^{qZ_j}.
    With the euler scheme hx, hy are only filled when ``local`` is set.
    Normal number k of a stream is lane k & 1 of Philox block k >> 1, so
    the second lane of each pair is kept for the following step.
    """
    n_save = save_idx.shape[0]
    sdt = np.sqrt(dt)
    half = 0.5 * dt
    ldt = np.log(dt)
    lhalf = np.log(half)
    for i in range(n_paths):
        path = path0 + i
        z = 0.0
        w = 0.0
        xs, xm = 0.0, 0.0
        ys, ym = 0.0, 0.0
        lvp = -np.inf
        lvq = -np.inf
        # interval accumulators: clocks and (euler) lateral increments
        ps, pm = lhalf, 1.0
        qs, qm = lhalf, 1.0
        hxs, hxm = 0.0, 0.0
        hys, hym = 0.0, 0.0
        zj = 0.0
        j = 0
        out[0, i, 0] = 0.0
        out[1, i, 0] = 0.0
        out[2, i, 0] = -np.inf
        out[3, i, 0] = 0.0
        out[4, i, 0] = -np.inf
        out[5, i, 0] = 0.0
        out[6, i, 0] = -np.inf
        out[7, i, 0] = -np.inf
        nxt = 1
        w_next = 0.0
        d1_next = 0.0
        d2_next = 0.0
        for k in range(n_steps):
            if k & 1:
                dw = w_next
            else:
                dw, w_next = normal_pair(seed, path, k >> 1, CH_W)
                dw *= sdt
                w_next *= sdt
            if not time_change:
                if k & 1:
                    d1 = d1_next
                    d2 = d2_next
                else:
                    d1, d1_next = normal_pair(seed, path, k >> 1, CH_W1)
                    d2, d2_next = normal_pair(seed, path, k >> 1, CH_W2)
                    d1 *= sdt
                    d1_next *= sdt
                    d2 *= sdt
                    d2_next *= sdt
                xs, xm = _acc_add(xs, xm, p * z, d1)
                ys, ym = _acc_add(ys, ym, -q * z, d2)
                if local:
                    hxs, hxm = _acc_add(hxs, hxm, p * (z - zj), d1)
                    hys, hym = _acc_add(hys, hym, -q * (z - zj), d2)
            z = z + a * dt + dw
            w = w + dw
            # trapezoid clocks relative to the interval start height
            ps, pm = _acc_add(ps, pm, ldt + 2.0 * p * (z - zj), 1.0)
            qs, qm = _acc_add(qs, qm, ldt - 2.0 * q * (z - zj), 1.0)
            if nxt < n_save and k + 1 == save_idx[nxt]:
                # the last node carries weight dt/2, not dt
                ps, pm = _acc_add(ps, pm, lhalf + 2.0 * p * (z - zj), -1.0)
                qs, qm = _acc_add(qs, qm, lhalf - 2.0 * q * (z - zj), -1.0)
                ldp = _acc_log(ps, pm)
                ldq = _acc_log(qs, qm)
                if time_change:
                    e1 = normal_at(seed, path, j, CH_W1)
                    e2 = normal_at(seed, path, j, CH_W2)
                    xs, xm = _acc_add(xs, xm, p * zj + 0.5 * ldp, e1)
                    ys, ym = _acc_add(ys, ym, -q * zj + 0.5 * ldq, e2)
                    out[8, i, j] = np.exp(0.5 * ldp) * e1
                    out[9, i, j] = np.exp(0.5 * ldq) * e2
                elif local:
                    out[8, i, j] = hxm * np.exp(hxs)
                    out[9, i, j] = hym * np.exp(hys)
                else:
                    out[8, i, j] = np.nan
                    out[9, i, j] = np.nan
                lvp = np.logaddexp(lvp, 2.0 * p * zj + ldp)
                lvq = np.logaddexp(lvq, -2.0 * q * zj + ldq)
                j = nxt
                out[0, i, j] = w
                out[1, i, j] = z
                out[2, i, j] = _acc_log(xs, xm)
                out[3, i, j] = np.sign(xm)
                out[4, i, j] = _acc_log(ys, ym)
                out[5, i, j] = np.sign(ym)
                out[6, i, j] = lvp
                out[7, i, j] = lvq
                zj = z
                ps, pm = lhalf, 1.0
                qs, qm = lhalf, 1.0
                hxs, hxm = 0.0, 0.0
                hys, hym = 0.0, 0.0
                nxt += 1
        out[8, i, n_save - 1] = np.nan
        out[9, i, n_save - 1] = np.nan


# --- containers -------------------------------------------------------------

def _saturating_exp(logv, sign=None):
    with np.errstate(over="ignore"):
        v = np.exp(np.minimum(logv, 709.78))
    v = np.where(logv > 709.78, np.finfo(float).max, v)
    return v if sign is None else sign * v


@dataclass
class BrownianPath:
    """One sampled path on its saved grid.

    ``X, Y, Vp, Vq`` are linear values; where they would overflow they are
    clamped to the largest float and ``status`` is ``"overflow"``. The
    ``log_abs_*`` fields are always exact.
    """

    times: np.ndarray
    W: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    Z: np.ndarray
    Vp: np.ndarray
    Vq: np.ndarray
    log_abs_x: np.ndarray
    log_abs_y: np.ndarray
    hx: np.ndarray = field(repr=False, default=None)
    hy: np.ndarray = field(repr=False, default=None)
    status: str = "ok"

    def point(self, k):
        return SolPoint(self.X[k], self.Y[k], self.Z[k])

    def to_csv(self, fh, every=1):
        """Write ``t,W,X,Y,Z,Vp,Vq`` rows, keeping every ``every``-th point."""
        fh.write("t,W,X,Y,Z,Vp,Vq\n")
        cols = (self.times, self.W, self.X, self.Y, self.Z, self.Vp, self.Vq)
        for k in range(0, len(self.times), every):
            fh.write(",".join(repr(float(c[k])) for c in cols) + "\n")


@dataclass
class PathBatch:
    """Fields of many paths on a common grid; arrays are ``(n_paths, n_save)``."""

    config: SimConfig
    first_path: int
    times: np.ndarray
    W: np.ndarray
    Z: np.ndarray
    log_abs_x: np.ndarray
    sign_x: np.ndarray
    log_abs_y: np.ndarray
    sign_y: np.ndarray
    log_vp: np.ndarray
    log_vq: np.ndarray
    hx: np.ndarray
    hy: np.ndarray

    @property
    def n_paths(self):
        return self.Z.shape[0]

    @property
    def X(self):
        return _saturating_exp(self.log_abs_x, self.sign_x)

    @property
    def Y(self):
        return _saturating_exp(self.log_abs_y, self.sign_y)

    @property
    def Vp(self):
        return _saturating_exp(self.log_vp)

    @property
    def Vq(self):
        return _saturating_exp(self.log_vq)

    @property
    def overflow(self):
        """Per-path flag: some linear field is not representable."""
        return np.any(np.maximum.reduce([
            self.log_abs_x, self.log_abs_y, self.log_vp, self.log_vq,
        ]) > 709.78, axis=1)

    def path(self, i):
        return BrownianPath(
            times=self.times.copy(),
            W=self.W[i].copy(),
            X=self.X[i],
            Y=self.Y[i],
            Z=self.Z[i].copy(),
            Vp=self.Vp[i],
            Vq=self.Vq[i],
            log_abs_x=self.log_abs_x[i].copy(),
            log_abs_y=self.log_abs_y[i].copy(),
            hx=self.hx[i].copy(),
            hy=self.hy[i].copy(),
            status="overflow" if self.overflow[i] else "ok",
        )


def _run_chunk(args):
    config, save_idx, path0, n, local = args
    pr = config.params
    out = np.empty((10, n, len(save_idx)))
    _simulate_block(
        np.uint64(config.seed), path0, n, config.n_steps, config.dt,
        pr.p, pr.q, pr.a, save_idx, config.scheme == "time-change", local, out,
    )
    return out


def _chunks(first, n, workers):
    size = -(-n // max(1, workers))
    return [(first + s, min(size, n - s)) for s in range(0, n, size)]


def simulate_batch(config, n_paths, first_path=0, workers=1, local=False):
    """Simulate paths ``first_path .. first_path + n_paths - 1``.

    Paths are split into contiguous chunks over ``workers`` processes; the
    output is identical for every worker count. ``local`` requests the
    rescaled interval increments ``hx, hy`` from the euler scheme (the
    time-change scheme always provides them).
    """
    if n_paths < 1:
        raise DomainError("n_paths must be >= 1")
    if first_path < 0 or first_path + n_paths > 2**32:
        raise DomainError("path indices must fit in 32 bits")
    save_idx = config.save_steps()
    jobs = [(config, save_idx, p0, n, local) for p0, n in _chunks(first_path, n_paths, workers)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_chunk, jobs))
    else:
        parts = [_run_chunk(j) for j in jobs]
    out = np.concatenate(parts, axis=1)
    return PathBatch(
        config=config,
        first_path=first_path,
        times=save_idx * config.dt,
        W=out[0], Z=out[1],
        log_abs_x=out[2], sign_x=out[3],
        log_abs_y=out[4], sign_y=out[5],
        log_vp=out[6], log_vq=out[7],
        hx=out[8], hy=out[9],
    )


def simulate(config, path=0):
    """Single path with the scheme named in ``config``."""
    return simulate_batch(config, 1, first_path=path, local=True).path(0)


def simulate_path(config, path=0):
    """Single path by the left-point Euler scheme."""
    return simulate(replace(config, scheme="euler"), path)


def simulate_time_change(config, path=0):
    """Single path by the clock/time-change scheme."""
    return simulate(replace(config, scheme="time-change"), path)


def increment(g1, g2, params):
    """``g1^{-1} g2``."""
    return group_mul(group_inv(g1, params), g2, params)


# --- limits of the lateral coordinates --------------------------------------

def default_cutoff(params, tol=1e-6):
    """Horizon after which the remaining lateral motion is below ``tol``.

    The transversal coordinate still to come after time T is of order
    ``e^{-q Z_T}``. We ask this to be below ``tol`` even when ``Z_T`` sits
    three standard deviations below its mean ``|a| T``, and round up to a
    whole time unit.
    """
    a = abs(params.a)
    if a == 0:
        raise DomainError("the lateral limits exist only for a != 0")
    r = params.q if params.a > 0 else params.p
    target = np.log(1.0 / tol) / r
    # solve a T - 3 sqrt(T) = target for sqrt(T)
    s = (3.0 + np.sqrt(9.0 + 4.0 * a * target)) / (2.0 * a)
    return float(np.ceil(s * s))


def _limit(config, n_paths, first_path, cutoff, workers, want):
    if cutoff is None:
        cutoff = default_cutoff(config.params)
    n = int(np.ceil(cutoff / config.dt - 1e-9))
    cfg = replace(config, T=n * config.dt, save_every=None)
    b = simulate_batch(cfg, n_paths, first_path=first_path, workers=workers)
    if want == "y":
        return b.Y[:, -1]
    return b.X[:, -1]


def y_infinity(config, n_paths=1, first_path=0, cutoff=None, workers=1):
    """Samples of ``Y_inf`` (requires ``a > 0``), one per path, as ``Y`` at ``cutoff``."""
    if config.params.a <= 0:
        raise DomainError("Y_t converges only when a > 0")
    return _limit(config, n_paths, first_path, cutoff, workers, "y")


def x_infinity(config, n_paths=1, first_path=0, cutoff=None, workers=1):
    """Samples of ``X_inf`` (requires ``a < 0``)."""
    if config.params.a >= 0:
        raise DomainError("X_t converges only when a < 0")
    return _limit(config, n_paths, first_path, cutoff, workers, "x")
