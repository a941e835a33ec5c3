"""Command-line frontend.

Every verb reads one JSON run configuration::

    {
      "system":     {"mu": ..., "point": "L1", "units": {...}},
      "build":      {"kind": "resonant", "order": 11, "cache_dir": "cache"},
      "scenario":   {...},          # verb specific
      "integrator": {"rtol": 1e-12, "atol": 1e-14},
      "output":     {"dir": "out", "prefix": "run"},
      "seed": 0
    }

Exit codes: 0 success, 2 configuration error, 3 numerical failure
(small divisor, non-convergence, departure), 4 cache mismatch.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import chart, families, stakeep
from .chart import ActionAngleB, ActionAngleR, FlowDivergence
from .config import Units, default_mu
from .dynamics import (POINTS, ConvergenceError, SystemParams, correct_periodic, lyapunov_guess,
                       vertical_guess)
from .families import NoHaloError
from .nfbuild import KINDS, CacheMismatch, NormalFormPackage, SmallDivisorError, reduce

log = logging.getLogger("cislunar_nf")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_CACHE = 0, 2, 3, 4
VERBS = ("build", "family-compare", "stationkeep", "sweep", "transform")


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


# --------------------------------------------------------------------------
# configuration

def _check_keys(d, allowed, where):
    if not isinstance(d, dict):
        raise ConfigError(f"{where} must be an object")
    extra = set(d) - set(allowed)
    if extra:
        raise ConfigError(f"unknown key(s) in {where}: {sorted(extra)}")


def _num(d, key, where, default=None, positive=False, nonneg=False):
    v = d.get(key, default)
    if v is None:
        raise ConfigError(f"{where}.{key} is required")
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not np.isfinite(v):
        raise ConfigError(f"{where}.{key} must be a finite number")
    if positive and v <= 0:
        raise ConfigError(f"{where}.{key} must be positive")
    if nonneg and v < 0:
        raise ConfigError(f"{where}.{key} must be non-negative")
    return float(v)


def _vec(d, key, where, n):
    v = d.get(key)
    if not isinstance(v, list) or len(v) != n or not all(
            isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
        raise ConfigError(f"{where}.{key} must be a list of {n} numbers")
    return [float(x) for x in v]


@dataclass(frozen=True)
class RunConfig:
    verb: str
    mu: float
    point: str
    units: Units
    kinds: tuple
    order: int
    cache_dir: Path | None
    scenario: dict
    rtol: float
    atol: float
    out_dir: Path
    prefix: str
    seed: int
    source: dict = field(default_factory=dict, compare=False)

    def params(self) -> SystemParams:
        return SystemParams.from_mu(self.mu, self.point)


_FAMILY_KEYS = {"family", "jacobi", "seed_amplitude", "n_samples", "method", "Ih3", "branch"}
_SK_KEYS = {"scheme", "targets", "start", "halo", "dt", "tf", "error_scale", "xtol", "max_iters"}
_SWEEP_KEYS = _SK_KEYS | {"sweep"}
_TRANSFORM_KEYS = {"state", "action_angle", "method"}


def _parse_family(sc):
    _check_keys(sc, _FAMILY_KEYS, "scenario")
    fam = sc.get("family")
    if fam not in ("Lyapunov", "Vertical", "Halo"):
        raise ConfigError("scenario.family must be Lyapunov, Vertical or Halo")
    out = {"family": fam, "n_samples": int(_num(sc, "n_samples", "scenario", 100, positive=True)),
           "method": sc.get("method", "analytic")}
    if out["method"] not in ("analytic", "numeric"):
        raise ConfigError("scenario.method must be analytic or numeric")
    if fam == "Halo":
        out["Ih3"] = _num(sc, "Ih3", "scenario", positive=True)
        out["branch"] = sc.get("branch", "north")
        if out["branch"] not in families.BRANCHES:
            raise ConfigError(f"scenario.branch must be one of {families.BRANCHES}")
    else:
        out["jacobi"] = _num(sc, "jacobi", "scenario")
        out["seed_amplitude"] = _num(sc, "seed_amplitude", "scenario", 0.01, positive=True)
    return out


def _parse_sk(sc, keys=_SK_KEYS):
    _check_keys(sc, keys, "scenario")
    scheme = sc.get("scheme")
    if scheme not in stakeep.SCHEMES:
        raise ConfigError(f"scenario.scheme must be one of {stakeep.SCHEMES}")
    out = {"scheme": scheme, "dt": _num(sc, "dt", "scenario", positive=True),
           "tf": _num(sc, "tf", "scenario", nonneg=True),
           "error_scale": _num(sc, "error_scale", "scenario", 0.0),
           "xtol": _num(sc, "xtol", "scenario", 1e-14, positive=True),
           "max_iters": int(_num(sc, "max_iters", "scenario", 20, nonneg=True))}
    if "halo" in sc:
        h = sc["halo"]
        _check_keys(h, {"Ih3", "branch", "theta3"}, "scenario.halo")
        if scheme == "BirkhoffFull":
            raise ConfigError("scenario.halo needs a resonant scheme")
        out["halo"] = {"Ih3": _num(h, "Ih3", "scenario.halo", positive=True),
                       "branch": h.get("branch", "north"),
                       "theta3": _num(h, "theta3", "scenario.halo", 0.0)}
        if out["halo"]["branch"] not in families.BRANCHES:
            raise ConfigError(f"scenario.halo.branch must be one of {families.BRANCHES}")
        if "start" in sc:
            raise ConfigError("give either scenario.start or scenario.halo")
    else:
        st = sc.get("start")
        _check_keys(st, {"actions", "angles"}, "scenario.start")
        out["start"] = {"actions": _vec(st, "actions", "scenario.start", 2),
                        "angles": _vec(st, "angles", "scenario.start", 2)}
    if "targets" in sc:
        n = 2 if scheme == "BirkhoffFull" else 1
        out["targets"] = _vec(sc, "targets", "scenario", n)
    elif scheme == "ResonantHalo" and "halo" not in sc:
        raise ConfigError("ResonantHalo needs scenario.halo or scenario.targets")
    try:
        _sk_config(out)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return out


def _parse_sweep(sc):
    out = _parse_sk(sc, _SWEEP_KEYS)
    sw = sc.get("sweep")
    _check_keys(sw, {"param", "values", "workers"}, "scenario.sweep")
    if sw.get("param") not in ("dt", "error_scale", "tf"):
        raise ConfigError("scenario.sweep.param must be dt, error_scale or tf")
    vals = sw.get("values")
    if not isinstance(vals, list) or not vals:
        raise ConfigError("scenario.sweep.values must be a non-empty list")
    out["sweep"] = {"param": sw["param"], "values": [float(v) for v in vals],
                    "workers": int(_num(sw, "workers", "scenario.sweep", 1, positive=True))}
    for v in out["sweep"]["values"]:
        try:
            _sk_config({**out, sw["param"]: v})
        except ValueError as exc:
            raise ConfigError(f"sweep value {v}: {exc}") from exc
    return out


def _parse_transform(sc):
    _check_keys(sc, _TRANSFORM_KEYS, "scenario")
    method = sc.get("method", "numeric")
    if method not in ("analytic", "numeric"):
        raise ConfigError("scenario.method must be analytic or numeric")
    if ("state" in sc) == ("action_angle" in sc):
        raise ConfigError("give exactly one of scenario.state or scenario.action_angle")
    if "state" in sc:
        return {"state": _vec(sc, "state", "scenario", 6), "method": method}
    aa = sc["action_angle"]
    _check_keys(aa, {"actions", "angles", "saddle"}, "scenario.action_angle")
    return {"action_angle": {"actions": _vec(aa, "actions", "scenario.action_angle", 2),
                             "angles": _vec(aa, "angles", "scenario.action_angle", 2),
                             "saddle": _vec(aa, "saddle", "scenario.action_angle", 2)
                             if "saddle" in aa else [0.0, 0.0]},
            "method": method}


_SCENARIO_PARSERS = {"family-compare": _parse_family, "stationkeep": _parse_sk,
                     "sweep": _parse_sweep, "transform": _parse_transform}


def load_config(path, verb: str, overrides: argparse.Namespace | None = None) -> RunConfig:
    """Parse and fully validate a run configuration."""
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    _check_keys(raw, {"system", "build", "scenario", "integrator", "output", "seed"}, "config")
    ov = overrides or argparse.Namespace(out=None, kind=None, order=None, seed=None)

    system = raw.get("system", {})
    _check_keys(system, {"mu", "point", "units"}, "system")
    mu = _num(system, "mu", "system", default_mu(), positive=True)
    if mu >= 0.5:
        raise ConfigError("system.mu must be below 0.5")
    point = system.get("point", "L1")
    if point not in POINTS:
        raise ConfigError(f"system.point must be one of {POINTS}")
    u = system.get("units", {})
    _check_keys(u, {"length_unit_km", "time_unit_s", "year_days"}, "system.units")
    d = Units.default()
    units = Units(_num(u, "length_unit_km", "system.units", d.length_unit_km, positive=True),
                  _num(u, "time_unit_s", "system.units", d.time_unit_s, positive=True),
                  _num(u, "year_days", "system.units", d.year_days, positive=True))

    build = raw.get("build", {})
    _check_keys(build, {"kind", "order", "cache_dir"}, "build")
    kind = ov.kind or build.get("kind", "both")
    if kind == "both":
        kinds = KINDS
    elif kind in KINDS:
        kinds = (kind,)
    else:
        raise ConfigError("build.kind must be birkhoff, resonant or both")
    order = int(ov.order if ov.order is not None else _num(build, "order", "build", 10))
    if order < 3:
        raise ConfigError("build.order must be at least 3")
    cache_dir = build.get("cache_dir")
    cache_dir = None if cache_dir is None else Path(cache_dir)

    integ = raw.get("integrator", {})
    _check_keys(integ, {"rtol", "atol"}, "integrator")
    rtol = _num(integ, "rtol", "integrator", 1e-12, positive=True)
    atol = _num(integ, "atol", "integrator", 1e-14, positive=True)

    output = raw.get("output", {})
    _check_keys(output, {"dir", "prefix"}, "output")
    out_dir = Path(ov.out or output.get("dir", "out"))
    prefix = str(output.get("prefix", verb.replace("-", "_")))

    seed = ov.seed if ov.seed is not None else raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError("seed must be an integer")

    scenario = {}
    if verb in _SCENARIO_PARSERS:
        scenario = _SCENARIO_PARSERS[verb](raw.get("scenario"))
        if verb in ("stationkeep", "sweep"):
            need = stakeep.SCHEME_KIND[scenario["scheme"]]
            if ov.kind and ov.kind != need:
                raise ConfigError(f"{scenario['scheme']} needs --kind {need}")
            kinds = (need,)
    elif "scenario" in raw:
        raise ConfigError(f"{verb} takes no scenario")
    return RunConfig(verb, mu, point, units, kinds, order, cache_dir, scenario, rtol, atol,
                     out_dir, prefix, seed, raw)


# --------------------------------------------------------------------------
# packages

def cache_path(cache_dir: Path, params: SystemParams, kind: str, order: int) -> Path:
    return cache_dir / f"{params.point}_{kind}_N{order}_mu{params.mu:.12g}.npz"


def get_package(cfg: RunConfig, kind: str) -> tuple[NormalFormPackage, bool]:
    """Load from the cache when present, otherwise build (and store)."""
    params = cfg.params()
    if cfg.cache_dir is not None:
        path = cache_path(cfg.cache_dir, params, kind, cfg.order)
        if path.exists():
            expect = {"mu": params.mu, "point": params.point, "kind": kind, "order": cfg.order}
            return NormalFormPackage.load(path, expect), True
    pkg = reduce(params, kind, cfg.order)
    if cfg.cache_dir is not None:
        cfg.cache_dir.mkdir(parents=True, exist_ok=True)
        pkg.save(cache_path(cfg.cache_dir, params, kind, cfg.order))
    return pkg, False


# --------------------------------------------------------------------------
# output

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def write_csv(path: Path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    _atomic_write(path, buf.getvalue())


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in o]
    if isinstance(o, (np.bool_, bool)):
        return bool(o)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (float, np.floating)):
        f = float(o)
        return f if np.isfinite(f) else None
    return o


def write_json(path: Path, obj):
    _atomic_write(path, json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def _meta(cfg: RunConfig) -> dict:
    return {"verb": cfg.verb, "mu": cfg.mu, "point": cfg.point, "order": cfg.order,
            "kinds": list(cfg.kinds), "seed": cfg.seed, "units": cfg.units.to_dict()}


# --------------------------------------------------------------------------
# verbs

def cmd_build(cfg: RunConfig) -> int:
    summary = {"meta": _meta(cfg), "packages": {}}
    for kind in cfg.kinds:
        pkg, hit = get_package(cfg, kind)
        counts = pkg.term_counts()
        print(f"{kind} N={pkg.order} {'cache hit' if hit else 'built'}; "
              f"min divisor {pkg.min_divisor:.6g}")
        print("  H_nf terms by degree: " + ", ".join(f"{d}:{c}" for d, c in counts["H_nf"].items()))
        print("  G terms by degree:    " + ", ".join(f"{d}:{c}" for d, c in counts["G"].items()))
        summary["packages"][kind] = {"term_counts": counts, "min_divisor": pkg.min_divisor,
                                     "near_resonances": [[list(e), d] for e, d in pkg.near_resonances],
                                     "frequencies": [pkg.linear.lam, pkg.linear.omega1, pkg.linear.omega2]}
    write_json(cfg.out_dir / f"{cfg.prefix}.json", summary)
    return EXIT_OK


def _family_orbit(cfg: RunConfig, sc: dict, packages: dict):
    params = cfg.params()
    if sc["family"] == "Halo":
        pkg = packages.get("resonant") or get_package(cfg, "resonant")[0]
        halo = families.solve_halo_actions(sc["Ih3"], pkg, sc["branch"])
        return families.halo_orbit(halo, pkg)
    guess = (lyapunov_guess if sc["family"] == "Lyapunov" else vertical_guess)(params, sc["seed_amplitude"])
    return correct_periodic(guess, sc["family"], params.mu, jacobi=sc["jacobi"], rtol=cfg.rtol, atol=cfg.atol)


def cmd_family_compare(cfg: RunConfig) -> int:
    sc = cfg.scenario
    packages = {k: get_package(cfg, k)[0] for k in cfg.kinds}
    orbit = _family_orbit(cfg, sc, packages)
    samples = {k: families.sample_family_actions(orbit, p, sc["n_samples"], sc["method"])
               for k, p in packages.items()}
    header, cols = ["sample", "t"], []
    names = {"birkhoff": ("I1", "I2", "I3"), "resonant": ("Ih1", "Ih2", "Ih3")}
    for k, fs in samples.items():
        header += [f"{k}_{n}" for n in names[k]] + [f"{k}_flag"]
        cols.append(fs)
    rows = []
    t = next(iter(samples.values())).t
    for i in range(sc["n_samples"]):
        row = [i, t[i]]
        for fs in cols:
            row += list(fs.actions[i]) + [bool(fs.failed[i])]
        rows.append(row)
    write_csv(cfg.out_dir / f"{cfg.prefix}_actions.csv", header, rows)
    summary = {"meta": _meta(cfg), "scenario": sc,
               "orbit": {"family": orbit.family, "x0": orbit.x0, "period": orbit.period,
                         "jacobi": orbit.jacobi},
               "constancy": {k: fs.summary() for k, fs in samples.items()}}
    write_json(cfg.out_dir / f"{cfg.prefix}_summary.json", summary)
    for k, fs in samples.items():
        print(f"{k}: relative std {np.array2string(fs.rel_std, precision=3)}")
    return EXIT_OK


def _sk_config(sc: dict, targets=None) -> stakeep.SKConfig:
    scheme = sc["scheme"]
    if targets is None:
        targets = sc.get("targets")
    if targets is None:
        if "halo" in sc:
            targets = [0.0]  # replaced once the halo actions are solved
        else:
            a = sc["start"]["actions"]
            targets = list(a) if scheme == "BirkhoffFull" else [a[1]]
    return stakeep.SKConfig(scheme, tuple(targets), sc["dt"], sc["tf"], xtol=sc["xtol"],
                            max_iters=sc["max_iters"], error_scale=sc["error_scale"])


def _sk_start(sc: dict, pkg: NormalFormPackage):
    """Start state and final controller config."""
    if "halo" in sc:
        h = families.solve_halo_actions(sc["halo"]["Ih3"], pkg, sc["halo"]["branch"])
        aa = h.action_angle(sc["halo"]["theta3"])
        return aa, _sk_config(sc, sc.get("targets", [h.Ih3]))
    (a2, a3), (g2, g3) = sc["start"]["actions"], sc["start"]["angles"]
    aa = ActionAngleB(0.0, 0.0, a2, a3, g2, g3) if pkg.kind == "birkhoff" else ActionAngleR(0.0, 0.0, a2, a3, g2, g3)
    return aa, _sk_config(sc)


_SK_HEADER = {"BirkhoffFull": ["F_x", "F_I2", "F_I3"], "ResonantNonHalo": ["F_x", "F_Ih3"],
              "ResonantHalo": ["F_x", "F_gamma", "F_Ih3"]}


def _run_sk(cfg: RunConfig, sc: dict, pkg: NormalFormPackage, stem: str):
    aa, skc = _sk_start(sc, pkg)
    skc = replace(skc, rtol=cfg.rtol, atol=cfg.atol)
    report = stakeep.run_stationkeeping(aa, skc, pkg, cfg.units)
    header = ["t", "dv_norm", "dv_x", "dv_y", "dv_z", "iters", "residual_x", "converged", "applied"]
    header += _SK_HEADER[skc.scheme] + ["Ih2_after", "theta2_after"]
    ih2, th2 = (report.Ih2(), report.theta2()) if report.records else ([], [])
    rows = [[r.t, r.dv_norm, *r.dv, r.iters, r.residual_x, r.converged, r.applied, *r.F_after, i2, t2]
            for r, i2, t2 in zip(report.records, ih2, th2)]
    write_csv(cfg.out_dir / f"{stem}_maneuvers.csv", header, rows)
    out = {"meta": _meta(cfg), "scenario": sc, "targets": list(skc.targets),
           "start": {"actions": [float(v) for v in (aa.Ih[1:] if isinstance(aa, ActionAngleR) else aa.I[1:])],
                     "angles": [float(v) for v in (aa.theta[1:] if isinstance(aa, ActionAngleR) else aa.phi[1:])]},
           "report": report.summary()}
    if skc.scheme == "ResonantNonHalo" and report.records:
        audit = stakeep.phase_tracking_audit(report, aa, pkg)
        out["phase_audit"] = {"max_deviation": audit.max_deviation, "fluctuation": audit.fluctuation}
        out["classification"] = families.classify(report.theta2()).label
    write_json(cfg.out_dir / f"{stem}_report.json", out)
    return report


def cmd_stationkeep(cfg: RunConfig) -> int:
    pkg, _ = get_package(cfg, cfg.kinds[0])
    report = _run_sk(cfg, cfg.scenario, pkg, cfg.prefix)
    s = report.summary()
    print(f"{s['scheme']}: {s['maneuvers']} maneuvers, {s['converged']} converged, "
          f"cost {s['dv_per_year_mps']:.6g} m/s/yr")
    if report.departed:
        print(f"departed at t = {report.departure_time} TU ({report.departure_reason})")
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_sweep(cfg: RunConfig) -> int:
    pkg, _ = get_package(cfg, cfg.kinds[0])
    _ = pkg.flow_fields, pkg.action_terms  # build lazy caches before threads share the package
    sw = cfg.scenario["sweep"]
    base = {k: v for k, v in cfg.scenario.items() if k != "sweep"}

    def one(i_v):
        i, v = i_v
        return _run_sk(cfg, {**base, sw["param"]: v}, pkg, f"{cfg.prefix}_{i:02d}")

    with ThreadPoolExecutor(max_workers=sw["workers"]) as ex:
        reports = list(ex.map(one, enumerate(sw["values"])))
    rows = [[v, r.dv_per_year, r.total_dv, len(r.records), r.n_converged, r.median_iterations(),
             r.departed, r.departure_time if r.departed else ""] for v, r in zip(sw["values"], reports)]
    write_csv(cfg.out_dir / f"{cfg.prefix}_sweep.csv",
              [sw["param"], "dv_per_year_mps", "total_dv", "maneuvers", "converged",
               "median_iterations", "departed", "departure_time"], rows)
    write_json(cfg.out_dir / f"{cfg.prefix}_sweep.json",
               {"meta": _meta(cfg), "param": sw["param"],
                "runs": [{"value": v, **r.summary()} for v, r in zip(sw["values"], reports)]})
    for row in rows:
        print(f"{sw['param']} = {row[0]:g}: {row[1]:.6g} m/s/yr" + (" (departed)" if row[6] else ""))
    return EXIT_OK


def cmd_transform(cfg: RunConfig) -> int:
    sc = cfg.scenario
    result = {"meta": _meta(cfg), "scenario": sc, "results": {}}
    for kind in cfg.kinds:
        pkg, _ = get_package(cfg, kind)
        if "state" in sc:
            fwd = chart.numeric_forward if sc["method"] == "numeric" else chart.analytic_forward
            aa = fwd(sc["state"], pkg)
            res = {"saddle": [aa.xt, aa.pxt],
                   "actions": list(aa.Ih[1:] if kind == "resonant" else aa.I[1:]),
                   "angles": list(aa.theta[1:] if kind == "resonant" else aa.phi[1:]),
                   "residue": aa.residue}
        else:
            a = sc["action_angle"]
            cls = ActionAngleR if kind == "resonant" else ActionAngleB
            aa = cls(*a["saddle"], *a["actions"], *a["angles"])
            if sc["method"] == "numeric":
                s = chart.numeric_inverse_nf(chart.from_action_angle(aa), pkg)
            else:
                s = chart.analytic_inverse(aa, pkg)
            res = {"state": list(s)}
        result["results"][kind] = res
    text = json.dumps(_jsonable(result), indent=2, sort_keys=True)
    print(text)
    _atomic_write(cfg.out_dir / f"{cfg.prefix}.json", text + "\n")
    return EXIT_OK


COMMANDS = {"build": cmd_build, "family-compare": cmd_family_compare, "stationkeep": cmd_stationkeep,
            "sweep": cmd_sweep, "transform": cmd_transform}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cislunar-nf",
                                 description="Normal forms and station-keeping about collinear points.")
    ap.add_argument("verb", choices=VERBS)
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--out", help="output directory (overrides output.dir)")
    ap.add_argument("--kind", choices=KINDS, help="normal form (overrides build.kind)")
    ap.add_argument("--order", type=int, help="truncation order N (overrides build.order)")
    ap.add_argument("--seed", type=int, help="random seed (overrides seed)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.verb, args)
        return COMMANDS[args.verb](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CacheMismatch as exc:
        print(f"cache mismatch: {exc}", file=sys.stderr)
        return EXIT_CACHE
    except SmallDivisorError as exc:
        print(f"small divisor: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConvergenceError, NoHaloError, FlowDivergence) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
