"""Geometry of Sol(p, q) in the coordinates (x, y, z).

The group law is ``(a, b, c) . (x, y, z) = (e^{pc} x + a, e^{-qc} y + b, c + z)``
and the left-invariant length element is
``e^{-2pz} dx^2 + e^{2qz} dy^2 + dz^2``. Sol(p, q) sits inside the product of
the hyperbolic planes H(p) and H(q) (logarithmic model, length element
``e^{-2pz} dx^2 + dz^2``) via ``(x, y, z) -> ((x, z), (y, -z))``.

No closed form for the Sol distance is known. This module provides two
certified lower bounds, two certified upper bounds, and a variational
upper estimate obtained by shortening polygonal curves.

All functions accept scalars or numpy arrays for the point coordinates and
broadcast over them.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import minimize

from solgeo.errors import DomainError, NonFiniteError

__all__ = [
    "SolParams",
    "SolPoint",
    "HypPoint",
    "Curve",
    "ORIGIN",
    "group_mul",
    "group_inv",
    "modular",
    "hor",
    "proj1",
    "proj2",
    "dist_h1",
    "dist_hp",
    "hop_constant",
    "lower_bound_i",
    "lower_bound_ii",
    "upper_bound_iii",
    "upper_bound_iv",
    "curve_length",
    "hp_geodesic",
    "candidate_curves",
    "estimate_distance",
    "estimate_distance_between",
    "vertical_geodesic",
    "deviation_proxy",
    "translated_proxy",
]


@dataclass(frozen=True)
class SolParams:
    """Curvature parameters ``p, q > 0`` and vertical drift ``a``."""

    p: float = 1.0
    q: float = 1.0
    a: float = 0.0

    def __post_init__(self):
        for name in ("p", "q", "a"):
            v = getattr(self, name)
            if not np.isfinite(v):
                raise DomainError(f"{name} must be finite, got {v}")
        if self.p <= 0 or self.q <= 0:
            raise DomainError(f"p and q must be positive, got p={self.p}, q={self.q}")

    @property
    def laplace_beltrami_drift(self):
        return (self.q - self.p) / 2.0


class SolPoint(NamedTuple):
    x: float
    y: float
    z: float


class HypPoint(NamedTuple):
    x: float
    z: float


ORIGIN = SolPoint(0.0, 0.0, 0.0)


@dataclass
class Curve:
    """Polygonal curve in Sol with vertices ``points`` (shape ``(n, 3)``)."""

    points: np.ndarray

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim != 2 or self.points.shape[1] != 3:
            raise DomainError("curve points must have shape (n, 3)")
        if len(self.points) < 2:
            raise DomainError("a curve needs at least 2 points")

    def length(self, params):
        return curve_length(self.points, params)


def _finite_or_raise(values, what):
    for v in values:
        if not np.all(np.isfinite(v)):
            raise NonFiniteError(f"{what} produced a non-finite result")


def group_mul(g, h, params):
    a0, b0, c0 = (np.asarray(v, dtype=float) for v in g)
    x, y, z = (np.asarray(v, dtype=float) for v in h)
    with np.errstate(over="ignore", invalid="ignore"):
        out = SolPoint(np.exp(params.p * c0) * x + a0, np.exp(-params.q * c0) * y + b0, c0 + z)
    _finite_or_raise(out, "group_mul")
    return out


def group_inv(g, params):
    a0, b0, c0 = (np.asarray(v, dtype=float) for v in g)
    with np.errstate(over="ignore", invalid="ignore"):
        out = SolPoint(-np.exp(-params.p * c0) * a0, -np.exp(params.q * c0) * b0, -c0)
    _finite_or_raise(out, "group_inv")
    return out


def modular(g, params):
    """Modular function ``e^{(q-p) z}``; identically 1 when ``p == q``."""
    return np.exp((params.q - params.p) * np.asarray(g[2], dtype=float))


def hor(g):
    return g[-1]


def proj1(g):
    return HypPoint(g[0], g[2])


def proj2(g):
    return HypPoint(g[1], -np.asarray(g[2]))


# --- hyperbolic plane -------------------------------------------------------

def _arcosh1p_log(log_delta):
    """``arcosh(1 + delta)`` given ``log(delta)``, stable at both ends."""
    log_delta = np.asarray(log_delta, dtype=float)
    big = log_delta > 40.0
    safe = np.where(big, 0.0, log_delta)
    with np.errstate(over="ignore"):
        delta = np.exp(safe)
    small_branch = np.log1p(delta + np.sqrt(delta * (delta + 2.0)))
    big_branch = np.log(2.0) + np.logaddexp(0.0, log_delta)
    return np.where(big, big_branch, small_branch)


def dist_h1(u, v):
    """Exact distance in H(1), logarithmic model.

    ``arcosh(1 + ((x-x')^2 + (e^z - e^z')^2) / (2 e^{z+z'}))``, evaluated as
    ``arcosh(1 + 2 sinh^2((z-z')/2) + (x-x')^2 e^{-(z+z')}/2)`` in log space so
    that neither large heights nor large offsets overflow.
    """
    x0, z0 = (np.asarray(c, dtype=float) for c in u)
    x1, z1 = (np.asarray(c, dtype=float) for c in v)
    dz = z1 - z0
    dx = x1 - x0
    with np.errstate(divide="ignore"):
        lsinh = np.log(np.abs(np.sinh(np.minimum(np.abs(dz), 1400.0) / 2.0)))
        lsinh = np.where(np.abs(dz) > 60.0, np.abs(dz) / 2.0 - np.log(2.0), lsinh)
        term_z = np.log(2.0) + 2.0 * lsinh
        term_x = np.log(0.5) + 2.0 * np.log(np.abs(dx)) - (z0 + z1)
    return _arcosh1p_log(np.logaddexp(term_z, term_x))


def dist_hp(p, u, v):
    """Distance in H(p): ``(1/p) dist_H1((p x, p z), (p x', p z'))``."""
    if p <= 0:
        raise DomainError(f"curvature parameter must be positive, got {p}")
    pu = (p * np.asarray(u[0], dtype=float), p * np.asarray(u[1], dtype=float))
    pv = (p * np.asarray(v[0], dtype=float), p * np.asarray(v[1], dtype=float))
    return dist_h1(pu, pv) / p


def hop_constant(p):
    """Length of the H(p) geodesic between (0, log|x|/p) and (x, log|x|/p)."""
    return np.arccosh(1.0 + p * p / 2.0) / p


def _h1_geodesic_from_origin(x1, z1, n):
    """``n + 1`` arclength-equispaced points on the H(1) geodesic (0,0) -> (x1,z1)."""
    # half-plane picture: the semicircle centred at (c, 0) with radius r is
    # (c + r tanh s, r sech s) in arclength s; with (0, 1) at s0 this gives
    # x(s) = sinh(s - s0) / cosh(s) and w(s) = cosh(s0) / cosh(s)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        em = np.expm1(2.0 * z1)
        s0 = -np.arcsinh((x1 * x1 + em) / (2.0 * x1))
        s1 = np.arcsinh((x1 * x1 - em) / (2.0 * x1 * np.exp(z1)))
        s = np.linspace(s0, s1, n + 1)
        xs = np.sinh(s - s0) / np.cosh(s)
        zs = _logcosh(s0) - _logcosh(s)
    if x1 == 0.0 or not (np.all(np.isfinite(xs)) and np.all(np.isfinite(zs))):
        # vertical geodesic, or offsets beyond floating range
        xs, zs = np.linspace(0.0, x1, n + 1), np.linspace(0.0, z1, n + 1)
    xs[0], zs[0], xs[-1], zs[-1] = 0.0, 0.0, x1, z1
    return xs, zs


def _logcosh(s):
    a = np.abs(s)
    return a + np.log1p(np.exp(-2.0 * a)) - np.log(2.0)


def hp_geodesic(p, u, v, n=256):
    """Points on the H(p) geodesic from ``u`` to ``v``, equispaced in arclength.

    Returns ``(xs, zs)`` with ``n + 1`` entries each.
    """
    x0, z0 = float(u[0]), float(u[1])
    x1, z1 = float(v[0]), float(v[1])
    if z1 < z0:
        # build from the lower end, where coordinate rounding costs the most length
        xs, zs = hp_geodesic(p, v, u, n)
        return xs[::-1].copy(), zs[::-1].copy()
    # move u to the origin with an affine isometry, then rescale H(p) -> H(1)
    xr = p * (x1 - x0) * np.exp(-p * z0)
    zr = p * (z1 - z0)
    xs, zs = _h1_geodesic_from_origin(xr, zr, n)
    xs, zs = x0 + np.exp(p * z0) * xs / p, z0 + zs / p
    xs[-1], zs[-1] = x1, z1
    return xs, zs


# --- certified bounds -------------------------------------------------------

def lower_bound_i(g):
    return np.abs(np.asarray(g[2], dtype=float))


def lower_bound_ii(g, params, iters=200):
    """Implicit logarithmic lower bound, solved by bisection.

    Returns the root ``d* >= 1`` of ``d + (1/p + 1/q) log d = R`` with
    ``R = (2/p) log|x| + (2/q) log|y| - |z|``. Any distance ``D`` obeys
    ``D + (1/p + 1/q) log D >= R`` so ``D >= d*``. Returns 0 where the bound
    is vacuous (``R <= 1``) or where ``x`` or ``y`` is 0.
    """
    x, y, z = (np.asarray(v, dtype=float) for v in g)
    k = 1.0 / params.p + 1.0 / params.q
    with np.errstate(divide="ignore"):
        rhs = 2.0 * np.log(np.abs(x)) / params.p + 2.0 * np.log(np.abs(y)) / params.q - np.abs(z)
    if np.any(np.isnan(rhs)) or np.any(rhs == np.inf):
        raise NonFiniteError("lower_bound_ii: non-finite right-hand side")
    active = rhs > 1.0
    r = np.where(active, rhs, 2.0)
    lo = np.ones_like(r)
    hi = np.full_like(r, 1e12)
    if np.any(hi + k * np.log(hi) < r):
        raise DomainError("lower_bound_ii: right-hand side beyond the bisection bracket")
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        below = mid + k * np.log(mid) <= r
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return np.where(active, lo, 0.0)


def upper_bound_iii(g, params):
    """``d_H(p)((x,z),(0,0)) + d_H(q)((y,-z),(0,0)) - |z|``."""
    x, y, z = (np.asarray(v, dtype=float) for v in g)
    zero = np.zeros_like(z)
    return (
        dist_hp(params.p, (x, z), (zero, zero))
        + dist_hp(params.q, (y, -z), (zero, zero))
        - np.abs(z)
    )


def upper_bound_iv(g, params):
    """Staircase bound: two vertical hops of fixed length plus height moves.

    ``c_p + c_q + |lx + ly| + min(|lx| + |ly + z|, |lx - z| + |ly|)`` with
    ``lx = log|x|/p``, ``ly = log|y|/q`` and ``c_p`` from :func:`hop_constant`.
    Requires ``x != 0`` and ``y != 0``.
    """
    x, y, z = (np.asarray(v, dtype=float) for v in g)
    if np.any(x == 0) or np.any(y == 0):
        raise DomainError("upper_bound_iv requires x != 0 and y != 0")
    p, q = params.p, params.q
    lx = np.log(np.abs(x)) / p
    ly = np.log(np.abs(y)) / q
    m = np.minimum(np.abs(lx) + np.abs(ly + z), np.abs(lx - z) + np.abs(ly))
    return hop_constant(p) + hop_constant(q) + np.abs(lx + ly) + m


# --- curves -----------------------------------------------------------------

_GL_NODES = np.array([0.5 - 0.5 * np.sqrt(0.6), 0.5, 0.5 + 0.5 * np.sqrt(0.6)])
_GL_WEIGHTS = np.array([5.0, 8.0, 5.0]) / 18.0


def _segment_terms(points, params):
    d = np.diff(points, axis=0)
    zg = points[:-1, 2, None] + d[:, 2, None] * _GL_NODES
    ex = np.exp(-2.0 * params.p * zg)
    ey = np.exp(2.0 * params.q * zg)
    f = ex * d[:, 0, None] ** 2 + ey * d[:, 1, None] ** 2 + d[:, 2, None] ** 2
    return d, ex, ey, f


def curve_length(points, params):
    """Length of a polygon whose edges are straight in (x, y, z) coordinates.

    Each edge's length integral is evaluated with 3-point Gauss-Legendre.
    """
    points = np.asarray(points, dtype=float)
    _, _, _, f = _segment_terms(points, params)
    return float(np.sum(np.sqrt(f) @ _GL_WEIGHTS))


def _length_and_grad(flat, start, end, params):
    pts = np.vstack([start, flat.reshape(-1, 3), end])
    d, ex, ey, f = _segment_terms(pts, params)
    sf = np.sqrt(np.maximum(f, 1e-300))
    w = _GL_WEIGHTS / sf
    length = float(np.sum(sf @ _GL_WEIGHTS))
    gdx = d[:, 0] * np.sum(w * ex, axis=1)
    gdy = d[:, 1] * np.sum(w * ey, axis=1)
    # dz enters directly and through the node heights
    dfz = -params.p * ex * d[:, 0, None] ** 2 + params.q * ey * d[:, 1, None] ** 2
    gz_nodes = w * dfz
    gdz = d[:, 2] * np.sum(w, axis=1) + np.sum(gz_nodes * _GL_NODES, axis=1)
    gseg = np.stack([gdx, gdy, gdz], axis=1)
    grad = np.zeros_like(pts)
    grad[1:] += gseg
    grad[:-1] -= gseg
    grad[:-1, 2] += np.sum(gz_nodes, axis=1)
    return length, grad[1:-1].ravel()


def _resample(points, params, segments):
    """Resample a polyline at ``segments + 1`` points equispaced in Sol length."""
    _, _, _, f = _segment_terms(points, params)
    seg = np.sqrt(f) @ _GL_WEIGHTS
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    if cum[-1] == 0.0:
        return np.linspace(points[0], points[-1], segments + 1)
    keep = np.concatenate([[True], np.diff(cum) > 0])
    cum, pts = cum[keep], points[keep]
    targets = np.linspace(0.0, cum[-1], segments + 1)
    out = np.column_stack([np.interp(targets, cum, pts[:, i]) for i in range(3)])
    out[0], out[-1] = points[0], points[-1]
    return out


def _hop_x(p, x0, x1, h, y0, n):
    xs, zs = hp_geodesic(p, (x0, h), (x1, h), n)
    return np.column_stack([xs, np.full_like(xs, y0), zs])


def _hop_y(q, y0, y1, h, x0, n):
    ys, ws = hp_geodesic(q, (y0, -h), (y1, -h), n)
    return np.column_stack([np.full_like(ys, x0), ys, -ws])


def _staircases(x0, y0, x, y, z, params, n):
    """The two five-leg paths behind the staircase bound, from ``(x0, y0, 0)`` to ``(x, y, z)``."""
    p, q = params.p, params.q
    hx = np.log(abs(x - x0)) / p
    hy = np.log(abs(y - y0)) / q
    x_first = np.vstack([
        [x0, y0, 0.0],
        _hop_x(p, x0, x, hx, y0, n),
        _hop_y(q, y0, y, -hy, x, n),
        [x, y, z],
    ])
    y_first = np.vstack([
        [x0, y0, 0.0],
        _hop_y(q, y0, y, -hy, x0, n),
        _hop_x(p, x0, x, hx, y, n),
        [x, y, z],
    ])
    return [x_first, y_first]


def _synchronised_up(x0, y0, x, y, z, p, q, n):
    """Curve behind the hyperbolic-sum bound from ``(x0, y0, 0)`` to ``(x, y, z)``, ``z >= 0``."""
    x1s, z1s = hp_geodesic(p, (x0, 0.0), (x, z), n)
    y2s, w2s = hp_geodesic(q, (y0, 0.0), (y, -z), n)

    # first point of the H(p) geodesic at height z
    k1 = int(np.argmax(z1s >= z - 1e-12 * max(1.0, abs(z))))
    if k1 > 0 and z1s[k1] > z:
        s = (z - z1s[k1 - 1]) / (z1s[k1] - z1s[k1 - 1])
        xp = x1s[k1 - 1] + s * (x1s[k1] - x1s[k1 - 1])
    else:
        xp = x1s[k1]
    rise_x = np.append(x1s[:k1], xp)
    rise_z = np.append(z1s[:k1], z)
    rest1 = np.column_stack([x1s[k1:], z1s[k1:]])

    # last point of the H(q) geodesic at height 0
    nonneg = np.nonzero(w2s >= 0.0)[0]
    k2 = int(nonneg[-1])
    if k2 < len(w2s) - 1 and w2s[k2] > 0.0:
        s = w2s[k2] / (w2s[k2] - w2s[k2 + 1])
        yp = y2s[k2] + s * (y2s[k2 + 1] - y2s[k2])
    else:
        yp = y2s[k2]
    lead_y = np.append(y2s[: k2 + 1], yp)
    lead_w = np.append(w2s[: k2 + 1], 0.0)
    fall_y = np.concatenate([[yp], y2s[k2 + 1:]])
    fall_t = np.concatenate([[0.0], -w2s[k2 + 1:]])

    leg1 = np.column_stack([np.full_like(lead_y, x0), lead_y, -lead_w])
    if z > 0:
        t = np.union1d(rise_z, fall_t)
        t = t[(t >= 0.0) & (t <= z)]
        rise_order = np.maximum.accumulate(rise_z)
        fall_order = np.maximum.accumulate(fall_t)
        leg2 = np.column_stack([
            np.interp(t, rise_order, rise_x),
            np.interp(t, fall_order, fall_y),
            t,
        ])
    else:
        leg2 = np.empty((0, 3))
    leg3 = np.column_stack([rest1[:, 0], np.full(len(rest1), y), rest1[:, 1]])
    return np.vstack([leg1, leg2, leg3, [x, y, z]])


def _synchronised(x0, y0, x, y, z, params, n):
    if z >= 0:
        return _synchronised_up(x0, y0, x, y, z, params.p, params.q, n)
    # (x, y, z) -> (y, x, -z) is an isometry Sol(p, q) -> Sol(q, p)
    c = _synchronised_up(y0, x0, y, x, -z, params.q, params.p, n)
    return np.column_stack([c[:, 1], c[:, 0], -c[:, 2]])


def _candidates(x0, y0, x, y, z, params, dense):
    curves = [np.array([[x0, y0, 0.0], [x, y, z]])]
    curves.append(_synchronised(x0, y0, x, y, z, params, dense))
    if x != x0 and y != y0:
        curves.extend(_staircases(x0, y0, x, y, z, params, dense))
    return curves


def candidate_curves(g, params, dense=256):
    """Initial curves from the origin to ``g``, densely sampled.

    The straight coordinate segment, the synchronised hyperbolic curve, and
    (when ``x, y != 0``) the two staircases.
    """
    x, y, z = (float(v) for v in g)
    return _candidates(0.0, 0.0, x, y, z, params, dense)


def estimate_distance(g, params, segments=64, iters=100, return_curve=False):
    """Variational upper estimate of ``dist(o, g)``.

    The best of the candidate curves is resampled to ``segments`` edges and
    its interior vertices are moved by L-BFGS for at most ``iters``
    iterations. The returned value is the length of an actual polygon, so it
    is an upper bound for the distance up to quadrature error, and it does
    not increase with ``iters``.
    """
    if segments < 2:
        raise DomainError("segments must be >= 2")
    x, y, z = (float(v) for v in g)
    if not all(np.isfinite((x, y, z))):
        raise NonFiniteError("estimate_distance: non-finite target point")
    if x == 0.0 and y == 0.0:
        best = np.linspace([0.0, 0.0, 0.0], [x, y, z], segments + 1)
        length = abs(z)
        return (length, Curve(best)) if return_curve else length

    # left translation by (u, v, 0) shifts x and y; put x = 0 at the lower end and
    # y = 0 at the upper end, where coordinate rounding is amplified most
    cx = x if z < 0 else 0.0
    cy = y if z > 0 else 0.0
    shift = np.array([cx, cy, 0.0])
    best, length = None, np.inf
    for c in _candidates(-cx, -cy, x - cx, y - cy, z, params, max(256, 4 * segments)):
        r = _resample(c, params, segments)
        ell = curve_length(r, params)
        if ell < length:
            best, length = r, ell

    if iters > 0:
        start, end = best[0], best[-1]
        x0 = best[1:-1].ravel()
        # unit steps in u correspond to unit metric displacements at the start
        zs = best[1:-1, 2]
        scale = np.column_stack([
            np.exp(params.p * zs), np.exp(-params.q * zs), np.ones_like(zs),
        ]).ravel()

        def objective(u):
            ell, grad = _length_and_grad(x0 + scale * u, start, end, params)
            return ell, grad * scale

        res = minimize(
            objective,
            np.zeros_like(x0),
            jac=True,
            method="L-BFGS-B",
            options={"maxiter": int(iters), "gtol": 1e-12, "ftol": 1e-15},
        )
        if np.isfinite(res.fun) and res.fun < length:
            cand = np.vstack([start, (x0 + scale * res.x).reshape(-1, 3), end])
            ell = curve_length(cand, params)
            if ell < length:
                best, length = cand, ell
    if not return_curve:
        return length
    best = best + shift
    best[0], best[-1] = 0.0, (x, y, z)
    return length, Curve(best)


def estimate_distance_between(g1, g2, params, **kwargs):
    """Variational estimate of ``dist(g1, g2)`` via left translation."""
    return estimate_distance(group_mul(group_inv(g1, params), g2, params), params, **kwargs)


def vertical_geodesic(endpoint, direction, t):
    """Unit-speed vertical rays: ``up`` is ``(0, eta, t)``, ``down`` is ``(xi, 0, -t)``."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("geodesic parameter must be >= 0")
    if direction == "up":
        return SolPoint(np.zeros_like(t), np.full_like(t, endpoint), t)
    if direction == "down":
        return SolPoint(np.full_like(t, endpoint), np.zeros_like(t), -t)
    raise DomainError(f"direction must be 'up' or 'down', got {direction!r}")


def translated_proxy(u, v, params):
    """Hyperbolic-sum bound at the height-0 point ``(u, v, 0)``."""
    u = np.asarray(u, dtype=float)
    return upper_bound_iii(SolPoint(u, np.asarray(v, dtype=float), np.zeros_like(u)), params)


def deviation_proxy(g, y_inf, params):
    """Upper bound for the distance from ``g`` to the ray ``(0, y_inf, .)``.

    Left-translating by ``(0, y_inf, z)^{-1}`` sends ``g`` to
    ``(e^{-pz} x, e^{qz} (y - y_inf), 0)``; the hyperbolic-sum bound there
    dominates the distance from ``g`` to the ray point at the same height.
    """
    x, y, z = (np.asarray(v, dtype=float) for v in g)
    with np.errstate(over="ignore", invalid="ignore"):
        u = np.exp(-params.p * z) * x
        v = np.exp(params.q * z) * (y - y_inf)
    _finite_or_raise((u, v), "deviation_proxy")
    return translated_proxy(u, v, params)
