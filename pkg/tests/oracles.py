"""Independent reference computations used by the tests."""

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import fsolve


def _h1_flow(s, theta):
    # Hamiltonian 1/2 (e^{2z} px^2 + pz^2) of the metric e^{-2z} dx^2 + dz^2
    def rhs(_, w):
        x, z, px, pz = w
        e = np.exp(2.0 * z)
        return [e * px, pz, 0.0, -e * px * px]

    sol = solve_ivp(rhs, (0.0, s), [0.0, 0.0, np.cos(theta), np.sin(theta)],
                    rtol=1e-12, atol=1e-13, method="DOP853")
    return sol.y[0, -1], sol.y[1, -1]


def h1_distance_by_shooting(u, v):
    """Length of the unit-speed H(1) geodesic from ``u`` to ``v`` found by shooting.

    ``u`` is moved to the origin by the isometry ``(x, z) -> (e^{-z0}(x - x0), z - z0)``;
    the initial angle and the arclength are then solved for so that the
    geodesic flow lands on the image of ``v``.
    """
    x1 = np.exp(-u[1]) * (v[0] - u[0])
    z1 = v[1] - u[1]
    best = None
    for theta0 in np.linspace(-np.pi + 0.1, np.pi - 0.1, 12):
        for s0 in (0.5 * np.hypot(x1, z1) + 0.1, np.hypot(x1, z1) + 0.5, 2 * np.hypot(x1, z1) + 1):
            def resid(w):
                xe, ze = _h1_flow(abs(w[1]), w[0])
                return [xe - x1, ze - z1]

            w, info, ier, _ = fsolve(resid, [theta0, s0], full_output=True, xtol=1e-13)
            err = np.max(np.abs(info["fvec"]))
            if ier == 1 and err < 1e-10:
                s = abs(w[1])
                if best is None or s < best:
                    best = s
    if best is None:
        raise RuntimeError("shooting did not converge")
    return best
