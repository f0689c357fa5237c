"""Carleman and observability ensemble constants on the reference grid and one refinement.

With --diagnose, the fine adjoint solution of one member is also evaluated on the
coarse sampling, which separates quadrature error from solution error.
"""
import argparse

import numpy as np

from degcascade.adjoint import TerminalData, solve_adjoint
from degcascade.inequalities import VARIANTS, adjoint_forcing, carleman_constant_sweep, carleman_sides
from degcascade.inequalities import observability_sides
from degcascade.presets import canonical, random_band_limited
from degcascade.scheme import Trajectory
from degcascade.weights import CarlemanConfig, Window

S = [1.0, 2.0, 4.0, 8.0]


def members(p, n, seed):
    rng = np.random.default_rng(seed)
    g, d = p.grid, p.setup.delta
    return [TerminalData(random_band_limited(rng, g, (d, None)), random_band_limited(rng, g, (d, None)), (d, g.A))
            for _ in range(n)]


def study(Na, Nx, n_carl, n_obs):
    p = canonical(Na, Nx)
    out = {}
    adjs = [(t, solve_adjoint(t, p.rates, p.k1, p.k2)) for t in members(p, n_carl, 7)]
    for comp, k in (("y", p.k2), ("z", p.k1)):
        mem = [(a.y if comp == "y" else a.z, adjoint_forcing(a, p.rates, p.k1, p.k2, comp)) for _, a in adjs]
        tab = carleman_constant_sweep(mem, S, CarlemanConfig(1.0, k, Window(0.0, p.grid.T)), k, min_members=1)
        out[f"carleman-{comp}"] = tab.max_ratio
    worst = {v: 0.0 for v in VARIANTS}
    for t in members(p, n_obs, 8):
        a = solve_adjoint(t, p.rates, p.k1, p.k2)
        for v in VARIANTS:
            worst[v] = max(worst[v], observability_sides(a, t, p.setup.delta, v, p.rates, p.k1, p.k2).ratio)
    out.update(worst)
    return out


def diagnose():
    sols = {}
    for Na, Nx in ((40, 60), (80, 120)):
        p = canonical(Na, Nx)
        t = members(p, 1, 7)[0]
        a = solve_adjoint(t, p.rates, p.k1, p.k2)
        sols[Na] = (p, a.y, adjoint_forcing(a, p.rates, p.k1, p.k2, "y"))
    pc, yc, fc = sols[40]
    pf, yf, ff = sols[80]
    sub = Trajectory(pc.grid, 0, yf.values[::2, ::2, ::2])
    for s in S:
        conf = CarlemanConfig(s, pc.k2, Window(0.0, pc.grid.T))
        lc = carleman_sides(yc, fc, pc.k2, conf).lhs
        ls = carleman_sides(sub, ff[::2, ::2, ::2], pc.k2, conf).lhs
        lf = carleman_sides(yf, ff, pf.k2, conf).lhs
        print(f"s={s:3.0f}: lhs coarse {lc:.3e}  fine-on-coarse-sampling {ls:.3e}  fine {lf:.3e}")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--carleman-members", type=int, default=20)
    ap.add_argument("--observability-members", type=int, default=50)
    ap.add_argument("--diagnose", action="store_true")
    args = ap.parse_args()
    c = study(40, 60, args.carleman_members, args.observability_members)
    f = study(80, 120, args.carleman_members, args.observability_members)
    for key in c:
        cv, fv = np.atleast_1d(c[key]), np.atleast_1d(f[key])
        ch = np.maximum(cv / fv, fv / cv)
        print(f"{key:10s} coarse {np.array2string(cv, precision=3)}  fine {np.array2string(fv, precision=3)}  "
              f"change {np.array2string(ch, precision=2)}")
    if args.diagnose:
        diagnose()


if __name__ == "__main__":
    main()
