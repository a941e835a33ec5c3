"""Impulsive station-keeping in normal-form coordinates.

Each maneuver zeroes the saddle coordinate ``x~`` (and pins one or two
center-manifold quantities) by Newton iteration on the post-burn velocity,
using the numerical transformation for both the error and its Jacobian.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from . import chart
from .chart import FlowDivergence
from .config import Units
from .dynamics import DEFAULT_ATOL, DEFAULT_RTOL, propagate
from .families import propagate_aa_resonant
from .nfbuild import NormalFormPackage

SCHEMES = ("BirkhoffFull", "ResonantNonHalo", "ResonantHalo")
SCHEME_KIND = {"BirkhoffFull": "birkhoff", "ResonantNonHalo": "resonant", "ResonantHalo": "resonant"}
_N_TARGETS = {"BirkhoffFull": 2, "ResonantNonHalo": 1, "ResonantHalo": 1}


@dataclass(frozen=True)
class SKConfig:
    """Closed-loop scenario.

    Parameters
    ----------
    scheme : str
        ``BirkhoffFull`` (targets ``(I2*, I3*)``), ``ResonantNonHalo``
        (``(Ih3*,)``) or ``ResonantHalo`` (``(Ih3*,)``; ``gamma = cos theta2``
        is driven to zero, which holds on both branches).
    dt, tf : float
        Maneuver interval and final time (TU).  ``tf = 0`` is an empty run.
    xtol, max_iters : float, int
        Newton stop on ``|x~|`` and the iteration cap.
    error_scale : float
        Fractional magnitude error ``p``; the applied burn is ``(1 + p) dv``.
    departure : float
        ``max|F|`` after a burn beyond which the run is declared departed.
    halo_skip : float
        Halo scheme only: a non-converged maneuver with ``|x~|`` at or above
        this value is not applied.
    cond_cap, perturb : float
        Condition-number cap on ``dF/dv`` and the one-time velocity nudge
        (LU/TU) used before giving up on an ill-conditioned iterate.
    """

    scheme: str
    targets: tuple
    dt: float
    tf: float
    xtol: float = 1e-14
    max_iters: int = 20
    error_scale: float = 0.0
    departure: float = 0.05
    halo_skip: float = 1e-6
    cond_cap: float = 1e12
    perturb: float = 1e-9
    rtol: float = DEFAULT_RTOL
    atol: float = DEFAULT_ATOL

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        targets = tuple(float(t) for t in np.atleast_1d(self.targets))
        if len(targets) != _N_TARGETS[self.scheme]:
            raise ValueError(f"{self.scheme} takes {_N_TARGETS[self.scheme]} target(s), got {len(targets)}")
        object.__setattr__(self, "targets", targets)
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.tf < 0 or (self.tf > 0 and self.tf < self.dt):
            raise ValueError("tf must be 0 or at least dt")
        if not self.xtol > 0 or self.max_iters < 0:
            raise ValueError("xtol must be positive and max_iters non-negative")

    @property
    def kind(self) -> str:
        return SCHEME_KIND[self.scheme]

    @property
    def n_maneuvers(self) -> int:
        return int(np.floor(self.tf / self.dt + 1e-9))


@dataclass
class ManeuverRecord:
    """One burn.  ``residual_x`` is ``|x~|`` at the Newton solution; ``F_after``
    and ``nf_after`` are evaluated after the (possibly scaled) burn."""

    t: float
    dv: np.ndarray
    iters: int
    residual_x: float
    F_after: np.ndarray
    converged: bool
    applied: bool = True
    nf_after: np.ndarray = field(default_factory=lambda: np.full(6, np.nan))

    @property
    def dv_norm(self) -> float:
        return float(np.linalg.norm(self.dv))

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("dv", "F_after", "nf_after"):
            d[k] = [float(v) for v in d[k]]
        return d


@dataclass
class SKReport:
    scheme: str
    records: list
    total_dv: float
    dv_per_year: float
    duration: float
    departed: bool = False
    departure_time: float | None = None
    departure_reason: str = ""

    @property
    def times(self) -> np.ndarray:
        return np.array([r.t for r in self.records])

    @property
    def iterations(self) -> np.ndarray:
        return np.array([r.iters for r in self.records], dtype=int)

    @property
    def n_converged(self) -> int:
        return sum(r.converged for r in self.records)

    def median_iterations(self) -> float:
        it = [r.iters for r in self.records if r.converged]
        return float(np.median(it)) if it else float("nan")

    def Ih2(self) -> np.ndarray:
        """Post-burn ``Ih2 = I2``."""
        nf = np.array([r.nf_after for r in self.records]).reshape(-1, 6)
        return 0.5 * (nf[:, 1] ** 2 + nf[:, 4] ** 2)

    def theta2(self) -> np.ndarray:
        """Post-burn resonant angle ``phi2 - phi3``."""
        nf = np.array([r.nf_after for r in self.records]).reshape(-1, 6)
        return chart.wrap_angle(np.arctan2(-nf[:, 4], nf[:, 1]) - np.arctan2(-nf[:, 5], nf[:, 2]))

    def summary(self) -> dict:
        return {"scheme": self.scheme, "maneuvers": len(self.records),
                "converged": self.n_converged, "median_iterations": self.median_iterations(),
                "total_dv": self.total_dv, "dv_per_year_mps": self.dv_per_year,
                "duration": self.duration, "departed": self.departed,
                "departure_time": self.departure_time, "departure_reason": self.departure_reason}


# --------------------------------------------------------------------------
# error vector

def _error_nf(nf, cfg: SKConfig):
    """``F`` and ``dF/dx_NF`` from normal-form coordinates."""
    x, y, z, _, py, pz = nf
    I2, I3 = 0.5 * (y * y + py * py), 0.5 * (z * z + pz * pz)
    dx = np.array([1.0, 0, 0, 0, 0, 0])
    dI2 = np.array([0, y, 0, 0, py, 0])
    dI3 = np.array([0, 0, z, 0, 0, pz])
    if cfg.scheme == "BirkhoffFull":
        i2s, i3s = cfg.targets
        return np.array([x, I2 - i2s, I3 - i3s]), np.array([dx, dI2, dI3])
    F_I, dI = I2 + I3 - cfg.targets[0], dI2 + dI3
    if cfg.scheme == "ResonantNonHalo":
        return np.array([x, F_I]), np.array([dx, dI])
    g, dg = halo_gamma(nf)
    return np.array([x, g, F_I]), np.array([dx, dg, dI])


def halo_gamma(nf):
    """``gamma = xi . eta / (|xi| |eta|) = cos theta2`` and its gradient in ``x_NF``."""
    _, y, z, _, py, pz = nf
    a, b = np.hypot(y, py), np.hypot(z, pz)
    if a == 0 or b == 0:
        return 0.0, np.zeros(6)
    dot = y * z + py * pz
    g = dot / (a * b)
    grad = np.array([0.0,
                     z / (a * b) - y * dot / (a ** 3 * b),
                     y / (a * b) - z * dot / (a * b ** 3),
                     0.0,
                     pz / (a * b) - py * dot / (a ** 3 * b),
                     py / (a * b) - pz * dot / (a * b ** 3)])
    return g, grad


def _evaluate(s, cfg: SKConfig, pkg: NormalFormPackage):
    nf, D = chart.numeric_nf(s, pkg, with_jacobian=True)
    F, dF_nf = _error_nf(nf, cfg)
    return F, (dF_nf @ D)[:, 3:6], nf


def error_vector(s, cfg: SKConfig, pkg: NormalFormPackage) -> np.ndarray:
    """Station-keeping error at rotating-frame state ``s``.

    Raises :class:`FlowDivergence` when the numerical transform fails.
    """
    return _error_nf(chart.numeric_nf(s, pkg), cfg)[0]


def jacobian_F(s, cfg: SKConfig, pkg: NormalFormPackage) -> np.ndarray:
    """``dF/dv``: velocity columns of ``dF/dx_NF . dx_NF/dx_RTB``."""
    return _evaluate(s, cfg, pkg)[1]


# --------------------------------------------------------------------------
# Newton maneuver

def _newton_step(H, F):
    if H.shape[0] == H.shape[1]:
        return np.linalg.solve(H, F)
    return H.T @ np.linalg.solve(H @ H.T, F)


def newton_maneuver(s0, cfg: SKConfig, pkg: NormalFormPackage, t: float = 0.0):
    """Optimal burn at ``s0``; returns ``(dv, record)``.

    Square schemes take full Newton steps; the two-row resonant scheme takes
    the minimum-norm step ``H^T (H H^T)^-1 F``.  On the iteration cap the
    current ``dv`` is returned with ``converged = False``.
    """
    s0 = np.asarray(s0, dtype=float)
    s = s0.copy()
    perturbed = False
    iters = 0
    while True:
        F, H, nf = _evaluate(s, cfg, pkg)
        if abs(F[0]) < cfg.xtol:
            converged = True
            break
        if iters >= cfg.max_iters:
            converged = False
            break
        cond = np.linalg.cond(H)
        if not np.isfinite(cond) or cond > cfg.cond_cap:
            if perturbed:
                converged = False
                break
            s[3:] += cfg.perturb / np.sqrt(3.0)
            perturbed = True
            continue
        s[3:] -= _newton_step(H, F)
        iters += 1
    dv = s[3:] - s0[3:]
    return dv, ManeuverRecord(t, dv, iters, float(abs(F[0])), F, converged, True, nf)


# --------------------------------------------------------------------------
# closed loop

def run_stationkeeping(aa_start, cfg: SKConfig, pkg: NormalFormPackage,
                       units: Units | None = None) -> SKReport:
    """Propagate, burn, repeat until ``tf`` or departure."""
    if pkg.kind != cfg.kind:
        raise ValueError(f"{cfg.scheme} needs a {cfg.kind} package, got {pkg.kind}")
    units = units or Units.default()
    s = chart.analytic_inverse(aa_start, pkg)
    mu = pkg.params.mu
    records: list[ManeuverRecord] = []
    departed, t_dep, reason = False, None, ""
    t = 0.0
    for k in range(1, cfg.n_maneuvers + 1):
        t_next = k * cfg.dt
        s = propagate(s, (t, t_next), mu, cfg.rtol, cfg.atol).final
        t = t_next
        try:
            dv, rec = newton_maneuver(s, cfg, pkg, t)
        except FlowDivergence as exc:
            departed, t_dep, reason = True, t, str(exc)
            break
        if cfg.scheme == "ResonantHalo" and not rec.converged and rec.residual_x >= cfg.halo_skip:
            dv, rec.applied = np.zeros(3), False
        rec.dv = (1.0 + cfg.error_scale) * dv
        s = s.copy()
        s[3:] += rec.dv
        # the Newton record already describes s0 + dv; re-evaluate otherwise
        if cfg.error_scale != 0.0 or not rec.applied:
            try:
                rec.nf_after = chart.numeric_nf(s, pkg)
            except FlowDivergence as exc:
                departed, t_dep, reason = True, t, str(exc)
                break
            rec.F_after = _error_nf(rec.nf_after, cfg)[0]
        records.append(rec)
        if np.max(np.abs(rec.F_after)) > cfg.departure:
            departed, t_dep, reason = True, t, f"max|F| = {np.max(np.abs(rec.F_after)):.3e}"
            break
    total = float(sum(r.dv_norm for r in records))
    duration = t_dep if departed else cfg.tf
    per_year = total * units.velocity_unit_mps * units.year_tu / duration if duration > 0 else 0.0
    return SKReport(cfg.scheme, records, total, per_year, duration, departed, t_dep, reason)


@dataclass(frozen=True)
class PhaseAudit:
    max_deviation: float
    fluctuation: float
    planned: np.ndarray
    controlled: np.ndarray


def phase_tracking_audit(report: SKReport, aa_start, pkg: NormalFormPackage) -> PhaseAudit:
    """Compare the controlled ``Ih2`` history with the planned one from
    action-angle propagation of the same start state."""
    t = np.concatenate([[0.0], report.times])
    planned = propagate_aa_resonant(aa_start, pkg, t).Ih2[1:]
    controlled = report.Ih2()
    dev = float(np.max(np.abs(controlled - planned))) if len(planned) else 0.0
    fluct = float(planned.max() - planned.min()) if len(planned) else 0.0
    return PhaseAudit(dev, fluct, planned, controlled)
