import mpmath
import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from solgeo.errors import DomainError
from solgeo.geometry import SolParams, SolPoint
from solgeo.harmonic import (
    OMEGA,
    GaussianBump,
    GridSpec,
    KernelSpec,
    MeasureSpec,
    PlaneGrid,
    PlaneMeasure,
    alpha,
    apply_laplacian_fd,
    beta,
    bounded_witness,
    conjugation_check,
    eigen_residual,
    eval_kernel,
    eval_sol_eigenfunction,
    hyperbolic_laplacian_fd,
    lambda_min,
    reversibility_check,
    scaling_check,
    sol_eigenfunction,
    translation_invariance_check,
)

GRID = GridSpec(half_widths=(1.0, 1.0, 1.0), counts=(5, 5, 5), eps=1e-3)


def test_exponents():
    assert lambda_min(1.5) == -1.125
    assert alpha(0.0, 1.0) == 0.0
    assert alpha(0.0, -1.0) == 2.0
    assert beta(0.0, 0.0, 1.0) == 0.5
    assert alpha(lambda_min(0.7), 0.7) == -0.7
    assert beta(4.0, 0.0, 2.0) == pytest.approx(0.5 + np.sqrt(8.0) / 2.0, rel=1e-15)
    with pytest.raises(DomainError):
        alpha(-1.0, 1.0)
    with pytest.raises(DomainError):
        beta(0.0, 1.0, 0.0)


def test_classical_poisson_kernel():
    # drift -1/2, lambda 0 on H(1): alpha = 1, beta = 1, the usual upper half-plane kernel
    # once we put w = e^z, giving w (xi^2 + 1) / ((xi - x)^2 + w^2)
    spec = KernelSpec("first", 1.0, -0.5, 0.0, 0.3)
    assert (spec.alpha, spec.beta) == (1.0, 1.0)
    x, z = np.linspace(-2, 2, 9), np.linspace(-1, 1, 9)
    w = np.exp(z)
    exact = w * (0.09 + 1.0) / ((0.3 - x) ** 2 + w * w)
    assert np.allclose(eval_kernel(spec, (x, z)), exact, rtol=1e-13)


def test_kernel_normalisation():
    assert eval_kernel(KernelSpec("first", 1.3, 0.4, 2.0, OMEGA), (5.0, 0.0)) == 1.0
    assert eval_kernel(KernelSpec("second", 0.7, -0.2, 1.0, 0.0), (0.0, 0.0)) == pytest.approx(1.0, rel=1e-15)
    with pytest.raises(DomainError):
        KernelSpec("third", 1.0, 0.0, 0.0)
    with pytest.raises(DomainError):
        KernelSpec("first", 1.0, 0.0, 0.0, "infinity")
    with pytest.raises(DomainError):
        KernelSpec("first", 1.0, 0.0, 0.0, np.inf)
    with pytest.raises(DomainError):
        MeasureSpec(((0.0, -1.0),))


def test_kernel_extreme_arguments_stay_finite():
    spec = KernelSpec("first", 1.0, 0.0, 0.5, 0.0)
    v = eval_kernel(spec, (np.array([0.0, 1e50, 1e200]), np.array([-300.0, 0.0, 0.0])))
    assert v[0] == pytest.approx(np.exp(600.0), rel=1e-12)
    assert v[1] == pytest.approx(1e-150, rel=1e-12)
    # decays like |x|^{-2 beta}, which underflows cleanly
    assert v[2] == 0.0


def test_kernels_are_symbolic_eigenfunctions():
    x, z, xi, p, b, lam = sp.symbols("x z xi p b lambda", real=True)
    r = sp.sqrt(b**2 + 2 * lam)
    al, be = r - b, sp.Rational(1, 2) + r / p
    P = sp.exp(al * z) * ((xi**2 + 1) / ((xi - p * x) ** 2 + sp.exp(2 * p * z))) ** be
    L = sp.Rational(1, 2) * (sp.exp(2 * p * z) * sp.diff(P, x, 2) + sp.diff(P, z, 2)) + b * sp.diff(P, z)
    ratio = sp.lambdify((x, z, xi, p, b, lam), L / P - lam, "mpmath")
    rng = np.random.default_rng(0)
    mpmath.mp.dps = 40
    for _ in range(20):
        args = [mpmath.mpf(float(v)) for v in (rng.uniform(-2, 2), rng.uniform(-1, 1),
                                               rng.uniform(-2, 2), rng.uniform(0.3, 3),
                                               rng.uniform(-1, 1), rng.uniform(0, 3))]
        assert abs(ratio(*args)) < mpmath.mpf(10) ** -30


def test_exponential_and_constant_eigenfunctions():
    pr = SolParams(1.0, 1.5, 0.8)
    g = GRID.points()
    f = lambda x, y, z: np.exp(-pr.a * z)  # noqa: E731
    Lf = apply_laplacian_fd(f, g, pr, richardson=True)
    assert np.allclose(Lf, lambda_min(pr.a) * f(*g), rtol=1e-7)
    one = lambda x, y, z: np.ones_like(np.asarray(x, dtype=float))  # noqa: E731
    assert np.max(np.abs(apply_laplacian_fd(one, g, pr))) == 0.0
    lin = lambda x, y, z: np.asarray(z, dtype=float)  # noqa: E731
    assert np.allclose(apply_laplacian_fd(lin, g, pr), pr.a, rtol=1e-9)


def test_fd_is_second_order_and_richardson_fourth():
    pr = SolParams(1.0, 1.0, 0.5)
    f = lambda x, y, z: np.sin(x) * np.cos(y) * np.exp(0.3 * z)  # noqa: E731
    g = SolPoint(0.4, -0.3, 0.2)
    x, y, z = g
    exact = (0.5 * (-np.exp(2 * z) - np.exp(-2 * z) + 0.09) + 0.5 * 0.3) * f(x, y, z)
    e1 = abs(apply_laplacian_fd(f, g, pr, eps=1e-2) - exact)
    e2 = abs(apply_laplacian_fd(f, g, pr, eps=5e-3) - exact)
    assert 3.5 < e1 / e2 < 4.5
    assert abs(apply_laplacian_fd(f, g, pr, eps=1e-2, richardson=True) - exact) < 1e-8
    with pytest.raises(DomainError):
        apply_laplacian_fd(f, g, pr, eps=0.0)


def test_eigen_residual_on_mixed_measures():
    pr = SolParams(0.8, 1.7, 0.6)
    nu1 = MeasureSpec(((OMEGA, 1.0), (0.5, 2.0)))
    nu2 = MeasureSpec(((-1.0, 0.5),))
    for lam in (lambda_min(pr.a), 0.0, 1.3):
        assert eigen_residual(nu1, nu2, pr, lam, GRID) < 1e-6
    with pytest.raises(DomainError):
        eigen_residual(MeasureSpec(), MeasureSpec(), pr, 0.0, GRID)
    g = GRID.points()
    h = sol_eigenfunction(nu1, nu2, pr, 0.0)
    assert np.array_equal(h(*g), eval_sol_eigenfunction(nu1, nu2, pr, 0.0, g))


@settings(max_examples=25, deadline=None)
@given(st.floats(0.3, 2.5), st.floats(0.3, 2.5), st.floats(-1.5, 1.5),
       st.floats(0.0, 3.0), st.floats(-3, 3), st.floats(-3, 3))
def test_random_kernels_are_eigenfunctions(p, q, a, dlam, xi1, xi2):
    pr = SolParams(p, q, a)
    lam = lambda_min(a) + dlam
    grid = GridSpec(half_widths=(0.5, 0.5, 0.5), counts=(3, 3, 3))
    res = eigen_residual(MeasureSpec(((xi1, 1.0),)), MeasureSpec(((xi2, 1.0),)), pr, lam, grid)
    assert res < 1e-5


def test_bounded_witness():
    pr = SolParams(1.0, 1.0, 1.0)
    nu2 = bounded_witness(pr)
    assert eigen_residual(MeasureSpec(), nu2, pr, 0.0, GRID) < 1e-5
    h = sol_eigenfunction(MeasureSpec(), nu2, pr, 0.0)
    # the kernel integral of the indicator of [0, 1] tends to 2 inside and 0 outside
    Y, Z = np.meshgrid(np.linspace(-3, 4, 200), np.linspace(-5, 3, 200))
    assert h(0.0, Y, Z).max() < 2.1
    assert h(0.0, 0.5, 2.0) > 1.9
    assert h(0.0, 5.0, 2.0) < 1e-3
    with pytest.raises(DomainError):
        bounded_witness(SolParams(1.0, 1.0, 0.0))


# --- identities -------------------------------------------------------------

PGRID = PlaneGrid(half_widths=(1.0, 1.0), counts=(7, 7), eps=1e-3)


def test_conjugation_hand_computed():
    # abar = 1, lambdabar = 0, f = 1: L_{-1/2} e^{3z/2} = (9/8 - 3/4) e^{3z/2} = 3/8 e^{3z/2}
    one = lambda x, z: np.ones_like(np.asarray(x, dtype=float))  # noqa: E731
    conj = lambda x, z: np.exp(1.5 * z)  # noqa: E731
    x, z = PGRID.points()
    L = hyperbolic_laplacian_fd(conj, (x, z), 1.0, -0.5, richardson=True)
    assert np.allclose(L, 0.375 * np.exp(1.5 * z), rtol=1e-8)
    assert conjugation_check(one, 1.0, PGRID, lambdabar=0.0) < 1e-7
    # abar = -1/2 is the identity map with no shift
    f = lambda x, z: np.cos(x) + z * z  # noqa: E731
    assert conjugation_check(f, -0.5, PGRID) < 1e-7


def test_conjugation_of_kernels():
    for abar in (-1.0, 0.3, 2.0):
        spec = KernelSpec("first", 1.0, abar, 0.7, 0.4)
        f = lambda x, z, s=spec: eval_kernel(s, (x, z))  # noqa: E731
        assert conjugation_check(f, abar, PGRID, lambdabar=0.7) < 1e-6


def test_scaling_identity():
    for p, a in ((2.0, 0.5), (0.5, -1.0)):
        spec = KernelSpec("first", p, a, 0.3, 0.2)
        f = lambda x, z, s=spec: eval_kernel(s, (x, z))  # noqa: E731
        assert scaling_check(f, p, a, PGRID) < 1e-6


def test_translation_invariance():
    pr = SolParams(1.0, 1.4, 0.3)
    f = GaussianBump(SolPoint(0.5, -0.2, 0.1), 0.8)
    assert translation_invariance_check(f, SolPoint(0.0, 0.0, 0.0), pr, GRID) == 0.0
    for g0 in (SolPoint(0.0, 0.0, 0.7), SolPoint(1.0, -2.0, 0.3)):
        assert translation_invariance_check(f, g0, pr, GRID) < 1e-5


def test_vertical_translation_is_exact_for_exponentials():
    pr = SolParams(1.0, 1.0, 0.5)
    f = lambda x, y, z: np.exp(0.4 * z) * (1 + x * x + y * y)  # noqa: E731
    assert translation_invariance_check(f, SolPoint(0.0, 0.0, 1.2), pr, GRID) < 1e-8


def test_reversibility():
    pr = SolParams(1.0, 1.0, 0.4)
    box = ((-2.5, 2.5),) * 3
    f = GaussianBump(SolPoint(0.3, 0.0, -0.2), 0.3)
    g = GaussianBump(SolPoint(-0.2, 0.1, 0.3), 0.3)
    assert reversibility_check(f, f, pr, box, n=24) == 0.0
    assert reversibility_check(f, g, pr, box, n=32) < 5e-3
    with pytest.raises(DomainError):
        reversibility_check(f, g, pr, ((-0.3, 0.3),) * 3, n=16)
    with pytest.raises(DomainError):
        reversibility_check(f, g, pr, ((1.0, -1.0),) * 3, n=16)


# --- serialisation ----------------------------------------------------------

def test_plane_measure_json_roundtrip():
    pm = PlaneMeasure("second", 1.5, -0.3, 0.8, MeasureSpec(((OMEGA, 1.0), (0.25, 3.0))))
    d = pm.to_dict()
    assert d["atoms"] == [{"xi": "omega", "w": 1.0}, {"xi": 0.25, "w": 3.0}]
    assert d["lambda"] == 0.8
    assert PlaneMeasure.from_json(pm.to_json()) == pm
    with pytest.raises(DomainError):
        PlaneMeasure.from_dict({"plane": "first", "curvature": 1.0, "drift": 0.0, "atoms": []})
    with pytest.raises(DomainError):
        PlaneMeasure("first", 1.0, 1.0, -2.0)
