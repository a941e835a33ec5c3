"""Circular restricted three-body dynamics in the rotating frame.

Nondimensional units: the primaries (masses ``1 - mu`` and ``mu``) sit at
``x = -mu`` and ``x = 1 - mu`` and the frame rotates at unit rate.  States
are ``[x, y, z, vx, vy, vz]``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .config import default_mu

POINTS = ("L1", "L2", "L3")
FAMILIES = ("Lyapunov", "Vertical", "Halo")

DEFAULT_RTOL = 1e-12
DEFAULT_ATOL = 1e-14


class ConvergenceError(RuntimeError):
    """An iterative solver did not converge."""


@dataclass(frozen=True)
class SystemParams:
    """Mass parameter and the geometry of one collinear libration point.

    ``gamma`` is the distance from the point to its nearest primary; ``a``
    and ``delta`` place the local frame so that the point lies at
    ``x = a - mu``.
    """

    mu: float
    point: str
    gamma: float
    a: float
    delta: float

    def __post_init__(self):
        if not 0.0 < self.mu < 0.5:
            raise ValueError(f"mu must lie in (0, 1/2), got {self.mu}")
        if self.point not in POINTS:
            raise ValueError(f"unknown libration point {self.point!r}")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")

    @classmethod
    def from_mu(cls, mu: float | None = None, point: str = "L1") -> "SystemParams":
        mu = default_mu() if mu is None else float(mu)
        gamma = solve_gamma(mu, point)
        if point == "L1":
            a, delta = 1.0 - gamma, 1.0
        elif point == "L2":
            a, delta = 1.0 + gamma, 1.0
        else:
            a, delta = -gamma, -1.0
        return cls(mu, point, gamma, a, delta)

    @property
    def x_point(self) -> float:
        """Rotating-frame abscissa of the libration point."""
        return self.a - self.mu

    def equilibrium(self) -> np.ndarray:
        return np.array([self.x_point, 0.0, 0.0, 0.0, 0.0, 0.0])


def _quintic(mu: float, point: str):
    """Collinear-equilibrium quintic in ``gamma`` for the chosen point."""
    if point == "L1":
        c = [1.0, -(3.0 - mu), 3.0 - 2.0 * mu, -mu, 2.0 * mu, -mu]
    elif point == "L2":
        c = [1.0, 3.0 - mu, 3.0 - 2.0 * mu, -mu, -2.0 * mu, -mu]
    elif point == "L3":
        m = 1.0 - mu
        c = [1.0, 2.0 + mu, 1.0 + 2.0 * mu, -m, -2.0 * m, -m]
    else:
        raise ValueError(f"unknown libration point {point!r}")
    return np.poly1d(c)


def solve_gamma(mu: float, point: str = "L1", max_iter: int = 200) -> float:
    """Distance between a collinear point and its nearest primary.

    Brent's method on the quintic over a bracket that contains exactly one
    positive root, followed by a Newton polish.
    """
    if not 0.0 < mu < 0.5:
        raise ValueError(f"mu must lie in (0, 1/2), got {mu}")
    f = _quintic(mu, point)
    lo, hi = (1e-300, 1.0) if point != "L3" else (0.5, 1.5)
    if f(lo) * f(hi) > 0:
        raise ConvergenceError(f"quintic for {point} has no sign change on [{lo}, {hi}]")
    try:
        g = brentq(f, lo, hi, xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=max_iter)
    except RuntimeError as exc:
        raise ConvergenceError(f"{exc} (bracket [{lo}, {hi}])") from exc
    df = f.deriv()
    for _ in range(3):
        d = df(g)
        if d == 0:
            break
        g -= f(g) / d
    return float(g)


def potential(r, mu: float) -> float:
    """Effective potential ``(x^2 + y^2)/2 + (1 - mu)/r1 + mu/r2``."""
    x, y, z = r[0], r[1], r[2]
    r1 = np.sqrt((x + mu) ** 2 + y * y + z * z)
    r2 = np.sqrt((x - 1.0 + mu) ** 2 + y * y + z * z)
    return 0.5 * (x * x + y * y) + (1.0 - mu) / r1 + mu / r2


def potential_gradient(r, mu: float) -> np.ndarray:
    x, y, z = r[0], r[1], r[2]
    dx1, dx2 = x + mu, x - 1.0 + mu
    r1_3 = (dx1 * dx1 + y * y + z * z) ** 1.5
    r2_3 = (dx2 * dx2 + y * y + z * z) ** 1.5
    m1, m2 = (1.0 - mu) / r1_3, mu / r2_3
    return np.array([x - m1 * dx1 - m2 * dx2,
                     y - (m1 + m2) * y,
                     -(m1 + m2) * z])


def potential_hessian(r, mu: float) -> np.ndarray:
    x, y, z = r[0], r[1], r[2]
    h = np.diag([1.0, 1.0, 0.0])
    for m, xp in ((1.0 - mu, -mu), (mu, 1.0 - mu)):
        d = np.array([x - xp, y, z])
        rr = np.sqrt(d @ d)
        h += m * (3.0 * np.outer(d, d) / rr ** 5 - np.eye(3) / rr ** 3)
    return h


def vector_field(t, s, mu: float) -> np.ndarray:
    """Time derivative of the state ``s``."""
    g = potential_gradient(s, mu)
    return np.array([s[3], s[4], s[5],
                     2.0 * s[4] + g[0],
                     -2.0 * s[3] + g[1],
                     g[2]])


def jacobian_matrix(s, mu: float) -> np.ndarray:
    """Linearization of :func:`vector_field` at ``s``."""
    A = np.zeros((6, 6))
    A[:3, 3:] = np.eye(3)
    A[3:, :3] = potential_hessian(s, mu)
    A[3, 4] = 2.0
    A[4, 3] = -2.0
    return A


def jacobi_constant(s, mu: float) -> float:
    """``C = 2 Omega(r) - |v|^2``."""
    s = np.asarray(s, dtype=float)
    return float(2.0 * potential(s, mu) - s[3:6] @ s[3:6])


@dataclass
class Trajectory:
    t: np.ndarray
    states: np.ndarray
    status: int = 0
    message: str = ""

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def propagate(s0, tspan: Sequence[float] | float, mu: float, rtol: float = DEFAULT_RTOL,
              atol: float = DEFAULT_ATOL, t_eval=None, events=None) -> Trajectory:
    """Integrate the equations of motion with an adaptive 8th-order pair.

    ``tspan`` is either ``(t0, t1)`` or a duration.  With ``t_eval`` the
    trajectory is sampled at those times; otherwise only the endpoints are
    returned.
    """
    s0 = np.asarray(s0, dtype=float)
    t0, t1 = (0.0, float(tspan)) if np.ndim(tspan) == 0 else map(float, tspan)
    if t1 == t0:
        return Trajectory(np.array([t0]), s0[None, :].copy())
    sol = solve_ivp(vector_field, (t0, t1), s0, method="DOP853", rtol=rtol, atol=atol,
                    t_eval=t_eval, args=(mu,), events=events)
    if sol.status < 0:
        raise ConvergenceError(f"propagation failed: {sol.message}")
    if t_eval is None:
        return Trajectory(np.array([t0, sol.t[-1]]), np.stack([s0, sol.y[:, -1]]),
                          sol.status, sol.message)
    return Trajectory(sol.t, sol.y.T.copy(), sol.status, sol.message)


def _variational(t, y, mu):
    dy = np.empty(42)
    dy[:6] = vector_field(t, y, mu)
    dy[6:] = (jacobian_matrix(y, mu) @ y[6:].reshape(6, 6)).ravel()
    return dy


def propagate_with_stm(s0, tspan, mu: float, rtol: float = DEFAULT_RTOL,
                       atol: float = DEFAULT_ATOL, events=None):
    """State and state transition matrix at the end of ``tspan``.

    Returns ``(state, Phi, sol)`` where ``sol`` is the raw integrator output
    (useful for event data).
    """
    t0, t1 = (0.0, float(tspan)) if np.ndim(tspan) == 0 else map(float, tspan)
    y0 = np.concatenate([np.asarray(s0, dtype=float), np.eye(6).ravel()])
    if t1 == t0:
        return y0[:6].copy(), np.eye(6), None
    sol = solve_ivp(_variational, (t0, t1), y0, method="DOP853", rtol=rtol, atol=atol,
                    args=(mu,), events=events)
    if sol.status < 0:
        raise ConvergenceError(f"propagation failed: {sol.message}")
    if sol.status == 1 and sol.t_events and len(sol.t_events[0]):
        y = sol.y_events[0][-1]
    else:
        y = sol.y[:, -1]
    return y[:6].copy(), y[6:].reshape(6, 6).copy(), sol


def stm_rtb(s0, tspan, mu: float, rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL):
    """State transition matrix of the flow over ``tspan``."""
    return propagate_with_stm(s0, tspan, mu, rtol, atol)[1]


@dataclass(frozen=True)
class PeriodicOrbit:
    family: str
    x0: np.ndarray
    period: float
    jacobi: float
    mu: float

    def sample(self, n: int, rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL) -> Trajectory:
        """``n`` states equally spaced in time over one period."""
        t = np.linspace(0.0, self.period, n, endpoint=False)
        return propagate(self.x0, (0.0, self.period), self.mu, rtol, atol, t_eval=t)


# family -> (free state indices, constrained state indices at the crossing, crossing index)
_TEMPLATES = {
    "Lyapunov": ((4,), (3,), 1),
    "Vertical": ((0, 4), (1, 3), 2),
    "Halo": ((0, 4), (3, 5), 1),
}
# extra free variable introduced by a fixed-Jacobi constraint
_JACOBI_FREE = {"Lyapunov": 0, "Vertical": 5, "Halo": 2}


def _crossing_event(index):
    def event(t, y, mu):
        return y[index]
    event.terminal = True
    return event


def half_period_crossing(s0, mu: float, index: int, rtol: float = DEFAULT_RTOL,
                         atol: float = DEFAULT_ATOL, t_max: float = 20.0, t_min: float = 1e-3):
    """Propagate to the next crossing of ``s[index] = 0`` after a short coast."""
    s_start, Phi0, _ = propagate_with_stm(s0, t_min, mu, rtol, atol)
    ev = _crossing_event(index)
    y0 = np.concatenate([s_start, Phi0.ravel()])
    sol = solve_ivp(_variational, (t_min, t_max), y0, method="DOP853", rtol=rtol, atol=atol,
                    args=(mu,), events=ev)
    if not len(sol.t_events[0]):
        raise ConvergenceError("no symmetry-plane crossing found")
    y = sol.y_events[0][0]
    return float(sol.t_events[0][0]), y[:6].copy(), y[6:].reshape(6, 6).copy()


def correct_periodic(guess, family: str, mu: float, jacobi: float | None = None,
                     tol: float = 1e-12, max_iter: int = 50, max_step: float = 0.01, rtol: float = DEFAULT_RTOL,
                     atol: float = DEFAULT_ATOL) -> PeriodicOrbit:
    """Differentially correct a symmetric periodic orbit.

    The guess must sit on the family's symmetry crossing:

    * Lyapunov ``(x0, 0, 0, 0, vy0, 0)``: vary ``vy0`` so ``vx = 0`` at the
      next ``y = 0`` crossing.
    * Vertical ``(x0, 0, 0, 0, vy0, vz0)``: vary ``(x0, vy0)`` so
      ``y = vx = 0`` at the next ``z = 0`` crossing.
    * Halo ``(x0, 0, z0, 0, vy0, 0)``: vary ``(x0, vy0)`` so ``vx = vz = 0``
      at the next ``y = 0`` crossing.

    Passing ``jacobi`` frees the amplitude coordinate (``x0``, ``vz0`` or
    ``z0`` respectively) and adds the energy constraint.  Newton steps are
    clipped to ``max_step`` in the infinity norm.
    """
    if family not in _TEMPLATES:
        raise ValueError(f"unknown family {family!r}")
    free, cons, idx = _TEMPLATES[family]
    free = list(free)
    s = np.asarray(guess, dtype=float).copy()
    if jacobi is not None:
        # close the orbit at the seed amplitude first, then move along the family
        s = correct_periodic(s, family, mu, None, tol, max_iter, max_step, rtol, atol).x0.copy()
        free = [_JACOBI_FREE[family]] + [f for f in free if f != _JACOBI_FREE[family]]
    for it in range(max_iter + 1):
        t_half, sf, Phi = half_period_crossing(s, mu, idx, rtol, atol)
        f_end = vector_field(0.0, sf, mu)
        resid = [sf[c] for c in cons]
        # derivative of the crossing state with the crossing time adjusted
        D = Phi - np.outer(f_end, Phi[idx]) / f_end[idx]
        rows = [D[c, free] for c in cons]
        if jacobi is not None:
            resid.append(jacobi_constant(s, mu) - jacobi)
            rows.append(_jacobi_gradient(s, mu)[free])
        resid = np.array(resid)
        if np.max(np.abs(resid)) < tol:
            return PeriodicOrbit(family, s, 2.0 * t_half, jacobi_constant(s, mu), mu)
        if it == max_iter:
            break
        A = np.array(rows)
        if np.linalg.matrix_rank(A) < min(A.shape):
            raise ConvergenceError("rank-deficient correction matrix")
        step = np.linalg.lstsq(A, -resid, rcond=None)[0]
        big = np.max(np.abs(step))
        if big > max_step:
            step *= max_step / big
        s[free] += step
    raise ConvergenceError(
        f"{family} corrector did not converge in {max_iter} iterations; residual {np.max(np.abs(resid)):.3e}")


def _jacobi_gradient(s, mu: float) -> np.ndarray:
    g = potential_gradient(s, mu)
    return np.concatenate([2.0 * g, -2.0 * np.asarray(s[3:6])])


def linear_frequencies(params: SystemParams) -> tuple[float, float, float]:
    """``(lambda, omega_inplane, omega_vertical)`` from the equilibrium Jacobian."""
    ev = np.linalg.eigvals(jacobian_matrix(params.equilibrium(), params.mu))
    real = ev[np.abs(ev.imag) < 1e-9].real
    lam = float(real.max())
    ims = np.sort(np.abs(ev.imag[np.abs(ev.imag) > 1e-9]))
    # z-motion decouples: its frequency is sqrt(-Omega_zz)
    wz = float(np.sqrt(-potential_hessian(params.equilibrium(), params.mu)[2, 2]))
    others = ims[np.abs(ims - wz) > 1e-9]
    wxy = float(others[0]) if len(others) else wz
    return lam, wxy, wz


def lyapunov_guess(params: SystemParams, amplitude: float) -> np.ndarray:
    """Linear in-plane seed with x-amplitude ``amplitude`` (LU)."""
    lam, w, _ = linear_frequencies(params)
    c2 = _c2(params)
    kappa = (w * w + 1.0 + 2.0 * c2) / (2.0 * w)
    x0 = params.x_point - amplitude
    return np.array([x0, 0.0, 0.0, 0.0, kappa * w * amplitude, 0.0])


def vertical_guess(params: SystemParams, amplitude: float) -> np.ndarray:
    """Linear vertical seed with z-amplitude ``amplitude`` (LU)."""
    _, _, wz = linear_frequencies(params)
    return np.array([params.x_point, 0.0, 0.0, 0.0, 0.0, wz * amplitude])


def _c2(params: SystemParams) -> float:
    return float(-potential_hessian(params.equilibrium(), params.mu)[2, 2])
