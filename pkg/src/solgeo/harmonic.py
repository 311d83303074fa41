"""Positive eigenfunctions of the drifted Laplacian and their numerical checks.

On H(p) (logarithmic model) the operator is
``L f = 1/2 (e^{2pz} f_xx + f_zz) + b f_z`` with drift ``b``. On Sol the
operator ``1/2 (e^{2pz} d_xx + e^{-2qz} d_yy + d_zz) + a d_z`` acts on
``f(x, z)`` as the H(p) operator with drift ``a`` and on ``f(y, -z)`` as the
H(q) operator with drift ``-a``. Hence sums of lifted eigenfunctions from the
two planes are eigenfunctions on Sol.

The minimal positive ``lambda``-eigenfunctions on H(p) with drift ``b`` are
``e^{alpha z}`` (the point ``omega`` at infinity) and the modified Poisson
kernels

    P(x, z; xi) = e^{alpha z} ((xi^2 + 1) / ((xi - p x)^2 + e^{2pz}))^beta

with ``alpha = sqrt(b^2 + 2 lambda) - b`` and
``beta = 1/2 + sqrt(b^2 + 2 lambda) / p``.

Finite differences use steps ``eps * e^{pz}`` in ``x`` and ``eps * e^{-qz}``
in ``y``, which are unit metric lengths times ``eps``; the stencil is then
carried onto itself by left translations.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from solgeo.errors import DomainError, NonFiniteError
from solgeo.geometry import SolPoint, group_mul

__all__ = [
    "OMEGA",
    "alpha",
    "beta",
    "lambda_min",
    "KernelSpec",
    "MeasureSpec",
    "PlaneMeasure",
    "GridSpec",
    "PlaneGrid",
    "eval_kernel",
    "eval_plane",
    "eval_sol_eigenfunction",
    "sol_eigenfunction",
    "apply_laplacian_fd",
    "hyperbolic_laplacian_fd",
    "eigen_residual",
    "conjugation_check",
    "scaling_check",
    "translation_invariance_check",
    "GaussianBump",
    "reversibility_check",
    "bounded_witness",
]

OMEGA = "omega"
_PLANES = ("first", "second")


def lambda_min(drift):
    return -0.5 * drift * drift


def _root(lam, a):
    disc = a * a + 2.0 * lam
    if disc < 0:
        # allow rounding just below the threshold
        if disc > -1e-14 * max(1.0, a * a):
            return 0.0
        raise DomainError(f"lambda={lam} is below lambda_min={lambda_min(a)}")
    return np.sqrt(disc)


def alpha(lam, a):
    return _root(lam, a) - a


def beta(lam, a, p):
    if p <= 0:
        raise DomainError("curvature must be positive")
    return 0.5 + _root(lam, a) / p


def _check_xi(xi):
    if isinstance(xi, str):
        if xi != OMEGA:
            raise DomainError(f"boundary point must be a real number or {OMEGA!r}")
        return xi
    xi = float(xi)
    if not np.isfinite(xi):
        raise DomainError("boundary point must be finite")
    return xi


@dataclass(frozen=True)
class KernelSpec:
    """One modified Poisson kernel on a hyperbolic plane."""

    plane: str
    curvature: float
    drift: float
    lam: float
    xi: object = OMEGA

    def __post_init__(self):
        if self.plane not in _PLANES:
            raise DomainError(f"plane must be one of {_PLANES}")
        if not self.curvature > 0:
            raise DomainError("curvature must be positive")
        _root(self.lam, self.drift)
        object.__setattr__(self, "xi", _check_xi(self.xi))

    @property
    def alpha(self):
        return alpha(self.lam, self.drift)

    @property
    def beta(self):
        return beta(self.lam, self.drift, self.curvature)

    def to_dict(self):
        return PlaneMeasure(self.plane, self.curvature, self.drift, self.lam,
                            MeasureSpec(((self.xi, 1.0),))).to_dict()


@dataclass(frozen=True)
class MeasureSpec:
    """Finite atomic measure on the boundary ``R u {omega}``."""

    atoms: tuple = ()

    def __post_init__(self):
        clean = []
        for xi, w in self.atoms:
            w = float(w)
            if not (np.isfinite(w) and w >= 0):
                raise DomainError("atom weights must be finite and nonnegative")
            clean.append((_check_xi(xi), w))
        object.__setattr__(self, "atoms", tuple(clean))

    @property
    def mass(self):
        return sum(w for _, w in self.atoms)

    def __bool__(self):
        return len(self.atoms) > 0


@dataclass(frozen=True)
class PlaneMeasure:
    """Kernel parameters of one plane together with a measure.

    Serialises as ``{plane, curvature, drift, lambda, atoms: [{xi | "omega", w}]}``.
    """

    plane: str
    curvature: float
    drift: float
    lam: float
    measure: MeasureSpec = field(default_factory=MeasureSpec)

    def __post_init__(self):
        KernelSpec(self.plane, self.curvature, self.drift, self.lam)

    def kernels(self):
        for xi, w in self.measure.atoms:
            yield KernelSpec(self.plane, self.curvature, self.drift, self.lam, xi), w

    def to_dict(self):
        atoms = [{"xi": OMEGA} if xi == OMEGA else {"xi": xi} for xi, _ in self.measure.atoms]
        for d, (_, w) in zip(atoms, self.measure.atoms):
            d["w"] = w
        return {
            "plane": self.plane,
            "curvature": self.curvature,
            "drift": self.drift,
            "lambda": self.lam,
            "atoms": atoms,
        }

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d):
        try:
            atoms = tuple((a["xi"], a["w"]) for a in d["atoms"])
            return cls(d["plane"], float(d["curvature"]), float(d["drift"]),
                       float(d["lambda"]), MeasureSpec(atoms))
        except KeyError as exc:
            raise DomainError(f"missing field {exc.args[0]!r} in kernel spec") from None

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


# --- evaluation -------------------------------------------------------------

def _log_kernel(spec, x, z):
    al = spec.alpha
    if spec.xi == OMEGA:
        return al * z
    p = spec.curvature
    be = spec.beta
    with np.errstate(divide="ignore"):
        den = np.logaddexp(2.0 * np.log(np.abs(spec.xi - p * x)), 2.0 * p * z)
    return al * z + be * (np.log1p(spec.xi * spec.xi) - den)


def eval_kernel(spec, u):
    """``P(u; xi)`` for ``u = (x, z)`` in the plane of ``spec``."""
    x, z = (np.asarray(c, dtype=float) for c in u)
    lv = _log_kernel(spec, x, z)
    with np.errstate(over="ignore"):
        v = np.exp(lv)
    if not np.all(np.isfinite(v)):
        raise NonFiniteError("kernel value overflowed")
    return v


def eval_plane(pm, u):
    """``sum_i w_i P(u; xi_i)`` over the atoms of a :class:`PlaneMeasure`."""
    x, z = (np.asarray(c, dtype=float) for c in u)
    out = np.zeros(np.broadcast(x, z).shape)
    for spec, w in pm.kernels():
        out = out + w * eval_kernel(spec, (x, z))
    return out


def _planes(nu1, nu2, params, lam):
    if not nu1 and not nu2:
        raise DomainError("at least one measure must be nonempty")
    pm1 = PlaneMeasure("first", params.p, params.a, lam, nu1)
    pm2 = PlaneMeasure("second", params.q, -params.a, lam, nu2)
    return pm1, pm2


def eval_sol_eigenfunction(nu1, nu2, params, lam, g):
    """``h1(x, z) + h2(y, -z)`` with ``h_i`` the kernel integrals of ``nu_i``."""
    pm1, pm2 = _planes(nu1, nu2, params, lam)
    x, y, z = (np.asarray(c, dtype=float) for c in g)
    return eval_plane(pm1, (x, z)) + eval_plane(pm2, (y, -z))


def sol_eigenfunction(nu1, nu2, params, lam):
    """The eigenfunction of :func:`eval_sol_eigenfunction` as a callable ``f(x, y, z)``."""
    pm1, pm2 = _planes(nu1, nu2, params, lam)

    def h(x, y, z):
        return eval_plane(pm1, (x, z)) + eval_plane(pm2, (y, -np.asarray(z)))

    return h


# --- finite differences -----------------------------------------------------

def _sol_fd(f, x, y, z, p, q, a, eps):
    hx = eps * np.exp(p * z)
    hy = eps * np.exp(-q * z)
    f0 = f(x, y, z)
    fzp = f(x, y, z + eps)
    fzm = f(x, y, z - eps)
    dxx = f(x + hx, y, z) - 2.0 * f0 + f(x - hx, y, z)
    dyy = f(x, y + hy, z) - 2.0 * f0 + f(x, y - hy, z)
    dzz = fzp - 2.0 * f0 + fzm
    vals = (f0, fzp, fzm, dxx, dyy)
    if not all(np.all(np.isfinite(v)) for v in vals):
        raise NonFiniteError("non-finite value on the finite-difference stencil")
    return 0.5 * (dxx + dyy + dzz) / eps**2 + a * (fzp - fzm) / (2.0 * eps)


def apply_laplacian_fd(f, g, params, eps=1e-3, richardson=False):
    """Central-difference drifted Laplacian of ``f(x, y, z)`` at ``g``.

    With ``richardson`` the results at ``eps`` and ``eps/2`` are combined to
    cancel the ``eps^2`` error term.
    """
    if eps <= 0:
        raise DomainError("eps must be positive")
    x, y, z = (np.asarray(c, dtype=float) for c in g)
    L = _sol_fd(f, x, y, z, params.p, params.q, params.a, eps)
    if richardson:
        L2 = _sol_fd(f, x, y, z, params.p, params.q, params.a, eps / 2.0)
        L = (4.0 * L2 - L) / 3.0
    return L


def _hyp_fd(f, x, z, p, b, eps):
    hx = eps * np.exp(p * z)
    f0 = f(x, z)
    fzp = f(x, z + eps)
    fzm = f(x, z - eps)
    dxx = f(x + hx, z) - 2.0 * f0 + f(x - hx, z)
    if not (np.all(np.isfinite(dxx)) and np.all(np.isfinite(fzp + fzm + f0))):
        raise NonFiniteError("non-finite value on the finite-difference stencil")
    return 0.5 * (dxx + fzp - 2.0 * f0 + fzm) / eps**2 + b * (fzp - fzm) / (2.0 * eps)


def hyperbolic_laplacian_fd(f, u, p, b, eps=1e-3, richardson=False):
    """Central-difference ``1/2 (e^{2pz} f_xx + f_zz) + b f_z`` of ``f(x, z)`` at ``u``."""
    if eps <= 0:
        raise DomainError("eps must be positive")
    x, z = (np.asarray(c, dtype=float) for c in u)
    L = _hyp_fd(f, x, z, p, b, eps)
    if richardson:
        L = (4.0 * _hyp_fd(f, x, z, p, b, eps / 2.0) - L) / 3.0
    return L


# --- grids ------------------------------------------------------------------

def _axis(c, h, n):
    return c + np.linspace(-h, h, n) if n > 1 else np.array([c], dtype=float)


@dataclass(frozen=True)
class GridSpec:
    """Coordinate box ``center +- half_widths`` sampled with ``counts`` points per axis."""

    center: SolPoint = SolPoint(0.0, 0.0, 0.0)
    half_widths: tuple = (1.0, 1.0, 1.0)
    counts: tuple = (5, 5, 5)
    eps: float = 1e-3

    def __post_init__(self):
        if any(n < 3 for n in self.counts):
            raise DomainError("need at least 3 points per axis")
        if self.eps <= 0:
            raise DomainError("eps must be positive")

    def points(self):
        axes = [_axis(c, h, n) for c, h, n in zip(self.center, self.half_widths, self.counts)]
        return SolPoint(*(m.ravel() for m in np.meshgrid(*axes, indexing="ij")))


@dataclass(frozen=True)
class PlaneGrid:
    """Grid on a hyperbolic plane, ``center = (x, z)``."""

    center: tuple = (0.0, 0.0)
    half_widths: tuple = (1.0, 1.0)
    counts: tuple = (5, 5)
    eps: float = 1e-3

    def __post_init__(self):
        if any(n < 3 for n in self.counts):
            raise DomainError("need at least 3 points per axis")
        if self.eps <= 0:
            raise DomainError("eps must be positive")

    def points(self):
        axes = [_axis(c, h, n) for c, h, n in zip(self.center, self.half_widths, self.counts)]
        return tuple(m.ravel() for m in np.meshgrid(*axes, indexing="ij"))


def _rel(diff, scale):
    return float(np.max(np.abs(diff) / (np.abs(scale) + 1e-300)))


def eigen_residual(nu1, nu2, params, lam, grid, richardson=True):
    """``max |L h - lam h| / |h|`` over the grid."""
    h = sol_eigenfunction(nu1, nu2, params, lam)
    g = grid.points()
    hv = h(*g)
    Lh = apply_laplacian_fd(h, g, params, grid.eps, richardson=richardson)
    return _rel(Lh - lam * hv, hv)


def conjugation_check(fbar, abar, grid, lambdabar=None, richardson=True):
    """Residual of the conjugation identity on H(1).

    ``L_{-1/2}(e^{m z} f) = e^{m z} (L_abar f + (4 abar^2 - 1)/8 f)`` with
    ``m = abar + 1/2``. Both sides are computed by finite differences and
    compared relative to the left side. When ``lambdabar`` is given, ``f`` is
    also required to satisfy ``L_abar f = lambdabar f`` and the left side is
    compared with ``e^{m z} (lambdabar + (4 abar^2 - 1)/8) f``; the larger of
    the two residuals is returned.
    """
    m = abar + 0.5
    shift = (4.0 * abar * abar - 1.0) / 8.0
    x, z = grid.points()

    def conj(xx, zz):
        return np.exp(m * zz) * fbar(xx, zz)

    lhs = hyperbolic_laplacian_fd(conj, (x, z), 1.0, -0.5, grid.eps, richardson)
    fv = fbar(x, z)
    rhs = np.exp(m * z) * (hyperbolic_laplacian_fd(fbar, (x, z), 1.0, abar, grid.eps, richardson)
                           + shift * fv)
    scale = np.maximum(np.abs(lhs), np.abs(np.exp(m * z) * fv))
    res = _rel(lhs - rhs, scale)
    if lambdabar is not None:
        eig = np.exp(m * z) * (lambdabar + shift) * fv
        res = max(res, _rel(lhs - eig, scale))
    return res


def scaling_check(f, p, a, grid, richardson=True):
    """Residual of ``(L^{H(p)}_a f) o theta = p^2 L^{H(1)}_{a/p} (f o theta)``.

    ``theta(x, z) = (x/p, z/p)``; compared relative to ``|f o theta|``. Both
    sides use the same ``eps``, so their stencils differ unless ``p = 1``.
    """
    x, z = grid.points()
    lhs = hyperbolic_laplacian_fd(f, (x / p, z / p), p, a, grid.eps, richardson)

    def ft(xx, zz):
        return f(xx / p, zz / p)

    rhs = p * p * hyperbolic_laplacian_fd(ft, (x, z), 1.0, a / p, grid.eps, richardson)
    return _rel(lhs - rhs, np.maximum(np.abs(lhs), np.abs(f(x / p, z / p))))


def translation_invariance_check(f, g0, params, grid, richardson=False):
    """Residual between ``L(f o tau_{g0})`` and ``(L f) o tau_{g0}``.

    ``tau_{g0}`` is left multiplication by ``g0``; compared relative to the
    value of ``f`` at the translated points.
    """
    g = grid.points()

    def ft(x, y, z):
        return f(*group_mul(g0, SolPoint(x, y, z), params))

    lhs = apply_laplacian_fd(ft, g, params, grid.eps, richardson)
    gg = group_mul(g0, g, params)
    rhs = apply_laplacian_fd(f, gg, params, grid.eps, richardson)
    return _rel(lhs - rhs, np.maximum(np.abs(f(*gg)), np.abs(rhs)))


# --- reversibility ----------------------------------------------------------

def _plateau(s, inner=0.7):
    """Smooth function of ``s``: 1 on ``|s| <= inner``, 0 for ``|s| >= 1``."""
    r = (np.abs(s) - inner) / (1.0 - inner)
    r = np.clip(r, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        up = np.where(r < 1, np.exp(-1.0 / np.maximum(1.0 - r, 1e-300)), 0.0)
        dn = np.where(r > 0, np.exp(-1.0 / np.maximum(r, 1e-300)), 0.0)
    return up / (up + dn)


@dataclass(frozen=True)
class GaussianBump:
    """``exp(-|g - center|^2 / (2 width^2))`` in coordinates."""

    center: SolPoint
    width: float

    def __call__(self, x, y, z):
        c = self.center
        r2 = (x - c[0]) ** 2 + (y - c[1]) ** 2 + (z - c[2]) ** 2
        return np.exp(-0.5 * r2 / self.width**2)


def reversibility_check(f, g, params, box, n=64, eps=None):
    """Normalised discrepancy ``|<f, L g> - <g, L f>| / <|f L g|>`` in ``L^2(m_a)``.

    ``m_a = e^{2az} dx dy dz``. ``box`` is ``((x0, x1), (y0, y1), (z0, z1))``;
    both fields are multiplied by a smooth factor equal to 1 on the inner 70%
    of the box and vanishing at its faces. Integrals use the ``n^3`` midpoint
    rule; the finite-difference step defaults to the ``z`` cell size, so the
    whole discretisation refines with ``n``.
    """
    box = np.asarray(box, dtype=float)
    if box.shape != (3, 2) or np.any(box[:, 1] <= box[:, 0]):
        raise DomainError("box must be three increasing intervals")
    mid = box.mean(axis=1)
    half = 0.5 * (box[:, 1] - box[:, 0])
    cell = 2.0 * half / n
    if eps is None:
        eps = cell[2]

    def bump(x, y, z):
        return (_plateau((x - mid[0]) / half[0]) * _plateau((y - mid[1]) / half[1])
                * _plateau((z - mid[2]) / half[2]))

    def fb(x, y, z):
        return f(x, y, z) * bump(x, y, z)

    def gb(x, y, z):
        return g(x, y, z) * bump(x, y, z)

    axes = [box[k, 0] + cell[k] * (np.arange(n) + 0.5) for k in range(3)]
    X, Y = np.meshgrid(axes[0], axes[1], indexing="ij")
    num = 0.0
    den = 0.0
    lost = 0.0
    total = 0.0
    for zk in axes[2]:
        Z = np.full_like(X, zk)
        w = np.exp(2.0 * params.a * zk)
        fv = fb(X, Y, Z)
        gv = gb(X, Y, Z)
        Lf = apply_laplacian_fd(fb, (X, Y, Z), params, eps)
        Lg = apply_laplacian_fd(gb, (X, Y, Z), params, eps)
        num += w * np.sum(fv * Lg - gv * Lf)
        den += w * np.sum(np.abs(fv * Lg))
        raw = np.abs(f(X, Y, Z)) + np.abs(g(X, Y, Z))
        lost += w * np.sum(raw * (1.0 - bump(X, Y, Z)))
        total += w * np.sum(raw)
    if total == 0 or lost > 1e-3 * total:
        raise DomainError("box too small for the support of the test fields")
    if den == 0:
        return 0.0
    return abs(num) / den


def bounded_witness(params, n_atoms=16):
    """Second-plane measure whose lifted harmonic function is bounded and non-constant.

    Quadrature atoms on ``[0, 1]`` with density ``(eta^2 + 1)^{-beta}``
    approximate the kernel integral of an indicator, which is a bounded
    harmonic function on H(q) when ``a > 0``.
    """
    if params.a <= 0:
        raise DomainError("bounded non-constant harmonic functions need a > 0")
    be = beta(0.0, -params.a, params.q)
    etas = (np.arange(n_atoms) + 0.5) / n_atoms
    return MeasureSpec(tuple((float(e), float((e * e + 1.0) ** -be / n_atoms)) for e in etas))
