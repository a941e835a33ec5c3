"""Compare the compiled and pure-Python kernel backends.

Times the three hot paths of a reduction and a station-keeping step on
realistic inputs: truncated products, Poisson brackets, and the unit-time
generating-function flow with its variational equations.

    python3 benchmarks/bench_kernels.py [--order N] [--repeat R]
"""
from __future__ import annotations

import argparse
import json
import timeit

import numpy as np

from cislunar_nf import kernels
from cislunar_nf.dynamics import SystemParams
from cislunar_nf.nfbuild import complex_hamiltonian, reduce
from cislunar_nf.polyalg import degree_keys


def _pair_cases(H, order):
    """Degree pairs whose product stays within ``order``."""
    cases = []
    for da in H.degrees:
        for db in H.degrees:
            if da + db - 2 <= order and da + db <= order + 2:
                cases.append((H.part(da), H.part(db), da + db))
    return cases


def bench(name, fn, repeat):
    t = min(timeit.repeat(fn, number=1, repeat=repeat))
    return name, t


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--order", type=int, default=8)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", help="write timings to this file")
    args = ap.parse_args(argv)
    if "cython" not in kernels.BACKENDS:
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation`")

    params = SystemParams.from_mu(point="L1")
    H, _ = complex_hamiltonian(params, args.order)
    pkg = reduce(params, "resonant", args.order)
    field = pkg.flow_fields[0][1]
    x0 = np.array([1e-3, 0.2, 0.1, -1e-3, 0.15, -0.05])
    cases = _pair_cases(H, args.order)

    def products(impl):
        def run():
            for (ka, ca), (kb, cb), d in cases:
                if d <= args.order:
                    impl.mul_into(ka, ca, kb, cb, degree_keys(d), np.zeros(len(degree_keys(d)), complex))
        return run

    def brackets(impl):
        def run():
            for (ka, ca), (kb, cb), d in cases:
                d -= 2
                impl.bracket_into(ka, ca, kb, cb, degree_keys(d), np.zeros(len(degree_keys(d)), complex))
        return run

    def flows(impl):
        def run():
            for _, f in pkg.flow_fields:
                impl.flow(x0, f.M, f.parent, f.var, f.offsets, f.gidx, f.coef, f.slot,
                          -1.0, 1.0, 1e-13, 1e-15, True, 2000, 50.0)
        return run

    rows = {}
    for label, make in (("products", products), ("brackets", brackets), ("flow chain + STM", flows)):
        times = {b: bench(b, make(kernels.backend(b)), args.repeat)[1] for b in ("python", "cython")}
        rows[label] = times
        print(f"{label:<18} python {times['python'] * 1e3:9.2f} ms   cython {times['cython'] * 1e3:9.2f} ms"
              f"   speed-up {times['python'] / times['cython']:7.1f}x")
    # the two backends must agree on the same input
    a = kernels.backend("python").flow(x0, field.M, field.parent, field.var, field.offsets, field.gidx,
                                       field.coef, field.slot, -1.0, 1.0, 1e-13, 1e-15, True, 2000, 50.0)
    b = kernels.backend("cython").flow(x0, field.M, field.parent, field.var, field.offsets, field.gidx,
                                       field.coef, field.slot, -1.0, 1.0, 1e-13, 1e-15, True, 2000, 50.0)
    print(f"flow agreement: |dx| = {np.abs(a[0] - b[0]).max():.2e}, |dPhi| = {np.abs(a[1] - b[1]).max():.2e}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"order": args.order, "seconds": rows}, fh, indent=2, sort_keys=True)


if __name__ == "__main__":
    main()
