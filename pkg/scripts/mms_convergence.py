"""Three-grid convergence of the forward solver against a manufactured solution."""
import argparse

from degcascade.coefficients import DegeneracyModel
from degcascade.verification import space_order, time_order


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alpha", type=float, default=0.5, help="k(x) = x^alpha")
    args = ap.parse_args()
    k = DegeneracyModel.power_at_0(args.alpha)
    for label, study in (("time", time_order(k)), ("space", space_order(k))):
        print(f"{label}: resolutions {study.resolutions}")
        print(f"  successive differences {['%.3e' % d for d in study.differences]}")
        print(f"  self-convergence order {study.order:.3f}")
        print(f"  errors vs exact {['%.3e' % e for e in study.exact_errors]}")


if __name__ == "__main__":
    main()
