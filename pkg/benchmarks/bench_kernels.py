"""Compare the compiled kernels against the numpy fallback.

Usage::

    python benchmarks/bench_kernels.py [--T 20000] [--repeat 3]

Both backends run on identical inputs; the script reports the best wall
time of ``--repeat`` runs, the speedup and the largest output mismatch.
"""

import argparse
import time

import numpy as np

from nsc import gpc, lds
from nsc._kernels import _fallback

try:
    from nsc._kernels import _core
except ImportError:
    _core = None


def best_time(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def cases(T, H):
    sys, cert = lds.synth_stable_instance(3, 2, 2.0, 0.3, seed=1)
    g = np.random.default_rng(0)
    w = np.ascontiguousarray(g.normal(size=(T, sys.d_x)))
    e = np.ascontiguousarray(g.choice([-1.0, 1.0], size=(T, sys.d_u)))
    x0 = np.zeros(sys.d_x)
    Acl = sys.closed_loop(cert.K)
    costs = lds.make_costs("quadratic", sys.d_x, sys.d_u, {})
    Qc, Rc, qc, rc, c0, a, b = costs.kernel_args(0, T)
    radii = gpc.policy_radii(2.0, 0.3, H)
    hist = np.zeros((2 * H + 1, sys.d_x))
    eta = gpc.auto_learning_rate(2.0, 1.0, T, 2.0, 0.3)

    def loop(mod):
        M = np.zeros((H, sys.d_u, sys.d_x))
        return lambda: mod.gpc_loop(sys.A, sys.B, sys.A, sys.B, cert.K, w, x0, hist, M, radii,
                                    eta, Qc, Rc, qc, rc, c0, a, b)

    return {
        "closed_loop_states": lambda mod: (lambda: mod.closed_loop_states(Acl, sys.B, w, e, x0)),
        "gpc_loop": loop,
    }


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--T", type=int, default=20000)
    p.add_argument("--H", type=int, default=10)
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args()
    if _core is None:
        print("compiled core not built; only the fallback is available")
    print(f"{'kernel':<20}{'python s':>12}{'cython s':>12}{'speedup':>10}{'max diff':>12}")
    for name, make in cases(args.T, args.H).items():
        tp, outp = best_time(make(_fallback), args.repeat)
        if _core is None:
            print(f"{name:<20}{tp:>12.4f}{'-':>12}{'-':>10}{'-':>12}")
            continue
        tc, outc = best_time(make(_core), args.repeat)
        outp = outp if isinstance(outp, tuple) else (outp,)
        outc = outc if isinstance(outc, tuple) else (outc,)
        diff = max(float(np.max(np.abs(np.asarray(x) - np.asarray(y)))) for x, y in zip(outp, outc))
        print(f"{name:<20}{tp:>12.4f}{tc:>12.4f}{tp / tc:>10.1f}{diff:>12.2e}")


if __name__ == "__main__":
    main()
