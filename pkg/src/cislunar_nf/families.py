"""Center-manifold families in action-angle variables: normal-form
propagation, halo action solving, torus classification, and action
constancy along corrected periodic orbits."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from . import chart
from .chart import ActionAngleB, ActionAngleR, FlowDivergence
from .dynamics import PeriodicOrbit, correct_periodic, propagate
from .nfbuild import NormalFormPackage

AA_RTOL = 1e-12
AA_ATOL = 1e-14
BRANCHES = ("north", "south")

LISSAJOUS, QUASIHALO, HALO, INDETERMINATE = "Lissajous", "Quasihalo", "Halo", "Indeterminate"


def halo_angle(point: str, branch: str) -> float:
    """``theta2`` of a halo: ``+pi/2`` for the northern L1 family, signs flip at L2."""
    branch = branch.lower()
    if branch not in BRANCHES:
        raise ValueError(f"branch must be one of {BRANCHES}")
    s = 1.0 if branch == "north" else -1.0
    if point == "L2":
        s = -s
    return s * np.pi / 2


def _require(pkg: NormalFormPackage, kind: str):
    if pkg.kind != kind:
        raise ValueError(f"package is {pkg.kind}, expected {kind}")


# --------------------------------------------------------------------------
# Birkhoff

def birkhoff_rates(pkg: NormalFormPackage, I) -> np.ndarray:
    """``dH/dI_k``: the saddle rate and the two center frequencies."""
    return pkg.action_terms.gradient(I)[0]


def propagate_aa_birkhoff(aa0: ActionAngleB, pkg: NormalFormPackage, t) -> ActionAngleB | list:
    """Actions fixed; angles advance at ``dH/dI``; the saddle pair scales by
    ``exp(+-rate t)``.  ``t`` may be a scalar or an array."""
    _require(pkg, "birkhoff")
    w = birkhoff_rates(pkg, aa0.I)

    def at(tt):
        return ActionAngleB(aa0.xt * np.exp(w[0] * tt), aa0.pxt * np.exp(-w[0] * tt),
                            aa0.I2, aa0.I3, aa0.phi2 + w[1] * tt, aa0.phi3 + w[2] * tt)

    if np.ndim(t) == 0:
        return at(float(t))
    return [at(float(tt)) for tt in t]


# --------------------------------------------------------------------------
# resonant

def resonant_partials(pkg: NormalFormPackage, Ih1: float, Ih2: float, Ih3: float, theta2: float):
    """``(dH/dIh1, dH/dIh2, dH/dIh3, dH/dtheta2)`` of the resonant Hamiltonian."""
    g, dth = pkg.action_terms.gradient([Ih1, Ih2, Ih3 - Ih2], theta2)
    return g[0], g[1] - g[2], g[2], dth


def resonant_hamiltonian(pkg: NormalFormPackage, Ih1, Ih2, Ih3, theta2) -> float:
    return pkg.action_terms.value([Ih1, Ih2, Ih3 - Ih2], theta2)


@dataclass
class ResonantTrajectory:
    t: np.ndarray
    xt: np.ndarray
    pxt: np.ndarray
    Ih2: np.ndarray
    Ih3: float
    theta2: np.ndarray
    theta3: np.ndarray

    def __len__(self):
        return len(self.t)

    def state(self, i: int) -> ActionAngleR:
        return ActionAngleR(float(self.xt[i]), float(self.pxt[i]), float(self.Ih2[i]), self.Ih3,
                            chart.wrap_angle(self.theta2[i]), float(self.theta3[i]))

    def hamiltonian(self, pkg: NormalFormPackage) -> np.ndarray:
        return np.array([resonant_hamiltonian(pkg, x * p, i2, self.Ih3, th)
                         for x, p, i2, th in zip(self.xt, self.pxt, self.Ih2, self.theta2)])


def propagate_aa_resonant(aa0: ActionAngleR, pkg: NormalFormPackage, t,
                          rtol: float = AA_RTOL, atol: float = AA_ATOL) -> ResonantTrajectory:
    """Integrate ``Ih2' = -dH/dtheta2``, ``theta2' = dH/dIh2``, ``theta3' = dH/dIh3``
    with ``Ih1`` and ``Ih3`` held fixed.  ``t`` is an array of output times
    starting at 0 (or a final time)."""
    _require(pkg, "resonant")
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if len(t) == 1:
        t = np.array([0.0, t[0]])
    Ih1, Ih3 = aa0.Ih1, aa0.Ih3

    def rhs(_, y):
        x, px, i2, th2, _th3 = y
        h1, h2, h3, hth = resonant_partials(pkg, Ih1, i2, Ih3, th2)
        return [h1 * x, -h1 * px, -hth, h2, h3]

    y0 = [aa0.xt, aa0.pxt, aa0.Ih2, aa0.theta2, aa0.theta3]
    if t[-1] == t[0]:
        ys = np.tile(np.array(y0)[:, None], (1, len(t)))
    else:
        sol = solve_ivp(rhs, (t[0], t[-1]), y0, method="DOP853", rtol=rtol, atol=atol, t_eval=t)
        if sol.status < 0:
            raise RuntimeError(f"resonant propagation failed: {sol.message}")
        ys = sol.y
    return ResonantTrajectory(t, ys[0], ys[1], ys[2], Ih3, ys[3], ys[4])


# --------------------------------------------------------------------------
# halo actions

@dataclass(frozen=True)
class HaloActions:
    kind: str
    branch: str
    I2: float
    I3: float
    theta2: float
    residual: float

    @property
    def Ih2(self) -> float:
        return self.I2

    @property
    def Ih3(self) -> float:
        return self.I2 + self.I3

    def action_angle(self, phase: float = 0.0, birkhoff_phi3: float = 0.0):
        """Start state on the halo; ``phase`` is ``theta3`` (or ``phi3``)."""
        if self.kind == "resonant":
            return ActionAngleR(0.0, 0.0, self.Ih2, self.Ih3, self.theta2, phase)
        return ActionAngleB(0.0, 0.0, self.I2, self.I3, phase + self.theta2, phase)


class NoHaloError(ValueError):
    """No sign change of the halo residual inside the search interval."""


def _bracket_root(f, lo, hi, n_grid=400):
    grid = np.linspace(lo, hi, n_grid)
    vals = np.array([f(x) for x in grid])
    idx = np.flatnonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)
    if not len(idx):
        raise NoHaloError("halo residual has no sign change in the search interval")
    i = int(idx[0])
    return brentq(f, grid[i], grid[i + 1], xtol=1e-16, maxiter=200)


def solve_halo_actions(fixed: float, pkg: NormalFormPackage, branch: str = "north",
                       search: tuple[float, float] | None = None) -> HaloActions:
    """Halo actions at a fixed out-of-plane level.

    Resonant: ``fixed`` is ``Ih3``; ``Ih2`` is varied until ``theta2' = 0``
    at ``theta2 = +-pi/2``.  Birkhoff: ``fixed`` is ``I3``; ``I2`` is varied
    until ``phi2' = phi3'``.
    """
    th = halo_angle(pkg.params.point, branch)
    if pkg.kind == "resonant":
        def resid(i2):
            return resonant_partials(pkg, 0.0, i2, fixed, th)[1]
        lo, hi = search or (1e-9 * fixed, fixed * (1 - 1e-9))
        i2 = _bracket_root(resid, lo, hi)
        return HaloActions("resonant", branch, i2, fixed - i2, th, abs(resid(i2)))

    def resid(i2):
        w = birkhoff_rates(pkg, [0.0, i2, fixed])
        return w[1] - w[2]
    lo, hi = search or (1e-9, 1.0)
    i2 = _bracket_root(resid, lo, hi)
    return HaloActions("birkhoff", branch, i2, fixed, th, abs(resid(i2)))


def halo_orbit(halo: HaloActions, pkg: NormalFormPackage, tol: float = 1e-11) -> PeriodicOrbit:
    """Differentially corrected halo seeded by the inverse transformation.

    The seed is coasted to its first ``y = 0`` crossing, snapped onto the
    ``x-z`` symmetry plane and handed to the corrector.
    """
    s0 = chart.analytic_inverse(halo.action_angle(0.0), pkg)
    mu = pkg.params.mu

    def cross(t, y, mu):
        return y[1]
    cross.terminal = True
    tr = propagate(s0, (1e-3, 20.0), mu, events=cross)
    if not len(tr.t) or abs(tr.final[1]) > 1e-8:
        raise RuntimeError("halo seed never crosses y = 0")
    s = tr.final.copy()
    s[[1, 3, 5]] = 0.0
    return correct_periodic(s, "Halo", mu, tol=tol)


# --------------------------------------------------------------------------
# classification

@dataclass(frozen=True)
class Classification:
    label: str
    span: float
    center: float
    crossings: int


def classify(theta2, halo_tol: float = 1e-6, min_cycles: int = 2) -> Classification:
    """Lissajous, quasihalo or halo from a sampled ``theta2`` history.

    ``theta2`` is unwrapped and its full-window range inspected: a range of
    ``2 pi * min_cycles`` or more is circulation; a range below ``halo_tol``
    about ``+-pi/2`` is a halo; otherwise the motion must stay within
    ``pi/2`` of ``+-pi/2`` and cross its mean ``2 * min_cycles`` times to count
    as libration.  Anything else is indeterminate.
    """
    th = np.unwrap(np.asarray(theta2, dtype=float))
    span = float(th.max() - th.min())
    mid = 0.5 * (th.max() + th.min())
    if span >= 2 * np.pi * min_cycles:
        return Classification(LISSAJOUS, span, mid, 0)
    centre = chart.wrap_angle(mid)
    target = np.sign(centre) * np.pi / 2 if centre != 0 else np.pi / 2
    offset = th - mid + centre
    if np.max(np.abs(offset - target)) < halo_tol:
        return Classification(HALO, span, centre, 0)
    dev = th - th.mean()
    crossings = int(np.sum(np.sign(dev[:-1]) * np.sign(dev[1:]) < 0))
    if span < 2 * np.pi and np.max(np.abs(offset - target)) < np.pi / 2:
        if crossings >= 2 * min_cycles:
            return Classification(QUASIHALO, span, centre, crossings)
    return Classification(INDETERMINATE, span, centre, crossings)


# --------------------------------------------------------------------------
# constancy along corrected orbits

@dataclass
class FamilySample:
    t: np.ndarray
    actions: np.ndarray  # (n, 3): (I1, I2, I3) or (Ih1, Ih2, Ih3)
    angles: np.ndarray
    failed: np.ndarray  # per-sample flag

    def _ok(self):
        return self.actions[~self.failed]

    @property
    def mean(self) -> np.ndarray:
        return self._ok().mean(axis=0)

    @property
    def std(self) -> np.ndarray:
        return self._ok().std(axis=0)

    @property
    def max_dev(self) -> np.ndarray:
        a = self._ok()
        return np.abs(a - a.mean(axis=0)).max(axis=0)

    @property
    def rel_std(self) -> np.ndarray:
        m = np.abs(self.mean)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(m > 0, self.std / m, np.nan)

    def summary(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist(),
                "max_dev": self.max_dev.tolist(), "rel_std": self.rel_std.tolist(),
                "failed": int(self.failed.sum())}


def sample_family_actions(orbit: PeriodicOrbit, pkg: NormalFormPackage, n_samples: int = 100,
                          method: str = "analytic") -> FamilySample:
    """Transform ``n_samples`` equally spaced states of ``orbit`` to actions."""
    traj = orbit.sample(n_samples)
    acts = np.zeros((n_samples, 3))
    angs = np.zeros((n_samples, 3))
    failed = np.zeros(n_samples, dtype=bool)
    transform = chart.analytic_forward if method == "analytic" else chart.numeric_forward
    for i, s in enumerate(traj.states):
        try:
            aa = transform(s, pkg)
        except FlowDivergence:
            failed[i] = True
            continue
        if isinstance(aa, ActionAngleR):
            acts[i], angs[i] = aa.Ih, aa.theta
        else:
            acts[i], angs[i] = aa.I, aa.phi
        failed[i] = aa.flagged
    return FamilySample(traj.t, acts, angs, failed)
