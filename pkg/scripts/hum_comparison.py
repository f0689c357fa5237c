"""Two-stage versus joint penalized HUM on the reference instance, plus an eps sweep."""
import argparse
import time

from degcascade.hum import ControlSetup, HumProblem, synthesize_control
from degcascade.presets import canonical


def run(Na, Nx, method, eps):
    p = canonical(Na, Nx, eps=eps, method=method)
    t0 = time.perf_counter()
    rep = synthesize_control(p.u0, p.v0, HumProblem(p.rates, p.k1, p.k2, p.setup)).report
    its = {k: s.iterations for k, s in rep.stages.items()}
    ident = {k: f"{s.identity_rel:.1e}" for k, s in rep.stages.items()}
    print(f"{method:9s} eps={eps:.0e} grid {2 * Na}x{Na}x{Nx}: drop {rep.residual_drop:9.2f}x  "
          f"C_hat {rep.C_hat:.3g}  iterations {its}  identities {ident}  ({time.perf_counter() - t0:.1f} s)")
    return rep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--Na", type=int, default=40)
    ap.add_argument("--Nx", type=int, default=60)
    ap.add_argument("--eps", type=float, nargs="+", default=[1e-4, 1e-6, 1e-8])
    args = ap.parse_args()
    for method in ("two_stage", "joint"):
        run(args.Na, args.Nx, method, 1e-8)
    print("eps sweep (joint):")
    for eps in args.eps:
        run(args.Na, args.Nx, "joint", eps)


if __name__ == "__main__":
    main()
