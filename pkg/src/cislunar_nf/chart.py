"""Maps between rotating-frame states, normal-form coordinates and
action-angle variables.

``g``         rotating frame -> real diagonal coordinates (affine, exact)
``T_fwd``     complex diagonal -> complex normal form (polynomial, analytic)
``flows``     real diagonal -> real normal form (unit-time flows, numerical)
``f_AA``      normal form -> Birkhoff action-angle
``h``         Birkhoff -> resonant action-angle
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .kernels import FLOW_OK
from .nfbuild import B_INV, B_MATRIX, J6, LinearData, NormalFormPackage
from .dynamics import SystemParams

RESIDUE_ALARM = 1e-8
FLOW_RTOL = 1e-13
FLOW_ATOL = 1e-15


class FlowDivergence(RuntimeError):
    """A generating-function flow failed: the state lies outside the region
    where the numerical transformation converges."""

    def __init__(self, stage: int, status: int):
        self.stage, self.status = stage, status
        reason = {1: "step underflow", 2: "norm blow-up", 3: "step cap"}.get(status, "failure")
        super().__init__(f"flow of G_{stage} diverged ({reason})")


# --------------------------------------------------------------------------
# action-angle containers

@dataclass(frozen=True)
class ActionAngleB:
    """Birkhoff action-angle state.

    The saddle pair is kept as the normal-form coordinates ``(xt, pxt)``;
    ``I1 = xt * pxt`` and ``phi1 = log(xt / pxt) / 2`` are derived views,
    the latter only defined when ``xt * pxt > 0``.
    """

    xt: float
    pxt: float
    I2: float
    I3: float
    phi2: float
    phi3: float
    residue: float = 0.0

    @property
    def I1(self) -> float:
        return self.xt * self.pxt

    @property
    def phi1(self) -> float:
        if self.xt * self.pxt > 0:
            return 0.5 * np.log(self.xt / self.pxt)
        return float("nan")

    @property
    def I(self) -> np.ndarray:
        return np.array([self.I1, self.I2, self.I3])

    @property
    def phi(self) -> np.ndarray:
        return np.array([self.phi1, self.phi2, self.phi3])

    @property
    def flagged(self) -> bool:
        return self.residue > RESIDUE_ALARM


@dataclass(frozen=True)
class ActionAngleR:
    """Resonant action-angle state; saddle pair handled as in :class:`ActionAngleB`."""

    xt: float
    pxt: float
    Ih2: float
    Ih3: float
    theta2: float
    theta3: float
    residue: float = 0.0

    @property
    def Ih1(self) -> float:
        return self.xt * self.pxt

    @property
    def theta1(self) -> float:
        if self.xt * self.pxt > 0:
            return 0.5 * np.log(self.xt / self.pxt)
        return float("nan")

    @property
    def Ih(self) -> np.ndarray:
        return np.array([self.Ih1, self.Ih2, self.Ih3])

    @property
    def theta(self) -> np.ndarray:
        return np.array([self.theta1, self.theta2, self.theta3])

    @property
    def flagged(self) -> bool:
        return self.residue > RESIDUE_ALARM


def wrap_angle(a):
    """Map to the principal branch ``(-pi, pi]``."""
    w = np.mod(np.asarray(a, dtype=float) + np.pi, 2.0 * np.pi) - np.pi
    w = np.where(w == -np.pi, np.pi, w)
    return float(w) if np.ndim(w) == 0 else w


# --------------------------------------------------------------------------
# affine stage

def frame_matrices(params: SystemParams):
    """``(V, T, b)`` with ``x_RTB = V (T x_l + b)``."""
    V = np.eye(6)
    V[3, 1] = 1.0
    V[4, 0] = -1.0
    dg, g = params.delta * params.gamma, params.gamma
    T = np.diag([dg, dg, g, dg, dg, g])
    b = np.array([params.x_point, 0.0, 0.0, 0.0, params.x_point, 0.0])
    return V, T, b


def linear_chain(params: SystemParams, linear: LinearData) -> np.ndarray:
    """``d x_qp / d x_RTB = C^-1 T^-1 V^-1``."""
    V, T, _ = frame_matrices(params)
    return linear.C_inv @ np.diag(1.0 / np.diag(T)) @ np.linalg.inv(V)


def g_map(s, linear: LinearData, params: SystemParams) -> np.ndarray:
    """Rotating-frame state to real diagonal coordinates."""
    V, T, b = frame_matrices(params)
    canon = np.linalg.solve(V, np.asarray(s, dtype=float)) - b
    return linear.C_inv @ (canon / np.diag(T))


def g_inverse(x_qp, linear: LinearData, params: SystemParams) -> np.ndarray:
    V, T, b = frame_matrices(params)
    return V @ (np.diag(T) * (linear.C @ np.asarray(x_qp, dtype=float)) + b)


# --------------------------------------------------------------------------
# action-angle maps

def f_AA_map(nf) -> ActionAngleB:
    """Normal-form coordinates to Birkhoff action-angle variables."""
    xt, yt, zt, pxt, pyt, pzt = (float(v) for v in nf)
    return ActionAngleB(xt, pxt, 0.5 * (yt * yt + pyt * pyt), 0.5 * (zt * zt + pzt * pzt),
                        float(np.arctan2(-pyt, yt)), float(np.arctan2(-pzt, zt)))


def f_AA_inverse(aa: ActionAngleB) -> np.ndarray:
    if aa.I2 < 0 or aa.I3 < 0:
        raise ValueError("center actions must be non-negative")
    r2, r3 = np.sqrt(2.0 * aa.I2), np.sqrt(2.0 * aa.I3)
    return np.array([aa.xt, r2 * np.cos(aa.phi2), r3 * np.cos(aa.phi3),
                     aa.pxt, -r2 * np.sin(aa.phi2), -r3 * np.sin(aa.phi3)])


def saddle_from_action(I1: float, phi1: float) -> tuple[float, float]:
    """``(xt, pxt)`` for ``I1 > 0`` and a finite ``phi1``."""
    r = np.sqrt(I1)
    return r * np.exp(phi1), r * np.exp(-phi1)


def h_map(aa: ActionAngleB) -> ActionAngleR:
    return ActionAngleR(aa.xt, aa.pxt, aa.I2, aa.I2 + aa.I3,
                        wrap_angle(aa.phi2 - aa.phi3), aa.phi3, aa.residue)


def h_inverse(ar: ActionAngleR) -> ActionAngleB:
    if ar.Ih3 < ar.Ih2:
        raise ValueError(f"invalid resonant actions: Ih3={ar.Ih3} < Ih2={ar.Ih2}")
    return ActionAngleB(ar.xt, ar.pxt, ar.Ih2, ar.Ih3 - ar.Ih2,
                        ar.theta2 + ar.theta3, ar.theta3, ar.residue)


def to_action_angle(nf, kind: str, residue: float = 0.0):
    aa = replace(f_AA_map(nf), residue=residue)
    return h_map(aa) if kind == "resonant" else aa


def from_action_angle(aa) -> np.ndarray:
    if isinstance(aa, ActionAngleR):
        aa = h_inverse(aa)
    return f_AA_inverse(aa)


# --------------------------------------------------------------------------
# analytic composites

def analytic_nf(s, pkg: NormalFormPackage) -> tuple[np.ndarray, float]:
    """Normal-form coordinates by the forward polynomials and the imaginary
    residue left after realification."""
    c = B_INV @ g_map(s, pkg.linear, pkg.params)
    x = B_MATRIX @ pkg.fwd_map(c)
    return x.real.copy(), float(np.abs(x.imag).max())


def analytic_forward(s, pkg: NormalFormPackage):
    nf, res = analytic_nf(s, pkg)
    return to_action_angle(nf, pkg.kind, res)


def analytic_inverse_nf(nf, pkg: NormalFormPackage) -> np.ndarray:
    c2 = pkg.inv_map(B_INV @ np.asarray(nf, dtype=float))
    x_qp = (B_MATRIX @ c2).real
    return g_inverse(x_qp, pkg.linear, pkg.params)


def analytic_inverse(aa, pkg: NormalFormPackage) -> np.ndarray:
    """Action-angle state to rotating-frame state."""
    return analytic_inverse_nf(from_action_angle(aa), pkg)


# --------------------------------------------------------------------------
# numerical composites

def numeric_nf(s, pkg: NormalFormPackage, with_jacobian: bool = False,
               rtol: float = FLOW_RTOL, atol: float = FLOW_ATOL):
    """Normal-form coordinates by composing the unit-time flows of ``-G_n``.

    Returns ``x_NF`` or ``(x_NF, d x_NF / d x_RTB)``.
    """
    x = g_map(s, pkg.linear, pkg.params)
    D = linear_chain(pkg.params, pkg.linear) if with_jacobian else None
    for n, fieldn in pkg.flow_fields:
        x, Phi, _, status = fieldn.flow(x, sign=-1.0, rtol=rtol, atol=atol, with_stm=with_jacobian)
        if status != FLOW_OK:
            raise FlowDivergence(n, status)
        if with_jacobian:
            D = Phi @ D
    return (x, D) if with_jacobian else x


def numeric_inverse_nf(nf, pkg: NormalFormPackage, rtol: float = FLOW_RTOL,
                       atol: float = FLOW_ATOL) -> np.ndarray:
    x = np.asarray(nf, dtype=float)
    for n, fieldn in reversed(pkg.flow_fields):
        x, _, _, status = fieldn.flow(x, sign=1.0, rtol=rtol, atol=atol)
        if status != FLOW_OK:
            raise FlowDivergence(n, status)
    return g_inverse(x, pkg.linear, pkg.params)


def numeric_forward(s, pkg: NormalFormPackage, **kw):
    return to_action_angle(numeric_nf(s, pkg, **kw), pkg.kind)


def forward(s, pkg: NormalFormPackage):
    """Rotating frame to action-angle: numerical, analytic when flows diverge."""
    try:
        return numeric_forward(s, pkg)
    except FlowDivergence:
        return analytic_forward(s, pkg)


def jacobian_nf_rtb(s, pkg: NormalFormPackage, **kw) -> np.ndarray:
    """``d x_NF / d x_RTB`` as the product of stage STMs and the linear chain."""
    return numeric_nf(s, pkg, with_jacobian=True, **kw)[1]


def stage_stms(s, pkg: NormalFormPackage, rtol: float = FLOW_RTOL, atol: float = FLOW_ATOL):
    """Per-stage STMs ``Phi_n(1)`` along the forward flow chain."""
    x = g_map(s, pkg.linear, pkg.params)
    out = []
    for n, fieldn in pkg.flow_fields:
        x, Phi, _, status = fieldn.flow(x, sign=-1.0, rtol=rtol, atol=atol, with_stm=True)
        if status != FLOW_OK:
            raise FlowDivergence(n, status)
        out.append((n, Phi))
    return out


def symplectic_defect(Phi) -> float:
    return float(np.abs(Phi.T @ J6 @ Phi - J6).max())
