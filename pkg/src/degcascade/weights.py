"""Carleman weight functions Theta, p (or p-bar) and phi.

Products Theta^m * exp(2 s phi) are formed in log space and flushed to zero
below exp(-700); Theta alone spans many decades on desk-size grids.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.special import roots_jacobi, roots_legendre

from .coefficients import DegeneracyModel, eval_k

LOG_FLOOR = -700.0


@dataclass(frozen=True)
class Window:
    """Time-age window (T_gamma, T_beta) x (gamma, A) of the weight Theta."""
    t_lo: float
    t_hi: float
    a_lo: float = 0.0

    def __post_init__(self):
        if not self.t_hi > self.t_lo >= 0.0:
            raise ValueError("need 0 <= T_gamma < T_beta")
        if self.a_lo < 0.0:
            raise ValueError("gamma must be nonnegative")


def theta(t, a, window: Window):
    t = np.asarray(t, dtype=float)
    a = np.asarray(a, dtype=float)
    inside = (t > window.t_lo) & (t < window.t_hi) & (a > window.a_lo)
    if not np.all(inside):
        raise ValueError("theta is infinite on the window boundary; use interior nodes")
    return 1.0 / ((t - window.t_lo) ** 4 * (window.t_hi - t) ** 4 * (a - window.a_lo) ** 4)


def log_theta(t, a, window: Window):
    t = np.asarray(t, dtype=float)
    a = np.asarray(a, dtype=float)
    return -4.0 * (np.log(t - window.t_lo) + np.log(window.t_hi - t) + np.log(a - window.a_lo))


class WeightP:
    """Tabulated p(x) = int_0^x y/k e^{R y^2} dy, or the at-1 form with (y-1)."""

    def __init__(self, k: DegeneracyModel, R: float = 1.0, side: str = "at0", n_table: int = 4096,
                 order: int = 8):
        if R <= 0:
            raise ValueError("R must be positive")
        if side not in ("at0", "at1"):
            raise ValueError("side must be 'at0' or 'at1'")
        if k.side is not None and k.side != side:
            raise ValueError(f"side mismatch: weight side {side!r}, coefficient degenerates {k.side!r}")
        self.k, self.R, self.side = k, float(R), side
        self.x = np.linspace(0.0, 1.0, n_table + 1)
        self.values = self._cumulative(order)
        self.sup = float(max(abs(self.values[0]), abs(self.values[-1])))
        self._interp = PchipInterpolator(self.x, self.values)

    def _integrand(self, y):
        lever = y if self.side == "at0" else y - 1.0
        shift = y if self.side == "at0" else y - 1.0
        return lever / eval_k(self.k, y) * np.exp(self.R * shift ** 2)

    def _cell_integral(self, l, r, nodes, wts):
        y = 0.5 * (r - l) * nodes + 0.5 * (r + l)
        return 0.5 * (r - l) * float(np.sum(wts * self._integrand(y)))

    def _cumulative(self, order):
        nodes, wts = roots_legendre(order)
        x = self.x
        incr = np.empty(x.size - 1)
        for m in range(x.size - 1):
            incr[m] = self._cell_integral(x[m], x[m + 1], nodes, wts)
        end = 0 if self.side == "at0" else x.size - 2
        incr[end] = self._endpoint_cell(x[end], x[end + 1], order, nodes, wts)
        return np.concatenate([[0.0], np.cumsum(incr)])

    def _endpoint_cell(self, l, r, order, nodes, wts):
        """Integral over the cell touching the degenerate endpoint.

        Power laws: Gauss-Jacobi with the exact endpoint factor d^(1-alpha).
        Other kinds: geometric refinement toward the endpoint (the integrand
        of a tabulated k with k'(0) != 0 is bounded there).
        """
        k = self.k
        h = r - l
        if k.kind in ("power_at_0", "power_at_1"):
            e = 1.0 - k.exponent
            # weight (1-t)^a (1+t)^b on [-1, 1]; the endpoint sits at t=-1 (at0) or t=+1 (at1)
            a_j, b_j = (0.0, e) if self.side == "at0" else (e, 0.0)
            t, w = roots_jacobi(2 * order, a_j, b_j)
            y = l + 0.5 * h * (1.0 + t)
            smooth = np.exp(self.R * (y if self.side == "at0" else y - 1.0) ** 2) / k.scale
            sign = 1.0 if self.side == "at0" else -1.0
            return sign * (0.5 * h) ** (1.0 + e) * float(np.sum(w * smooth))
        dist = np.concatenate([[0.0], h * np.geomspace(1e-12, 1.0, 50)])
        total = 0.0
        for i in range(dist.size - 1):
            d0, d1 = dist[i], dist[i + 1]
            if self.side == "at0":
                total += self._cell_integral(d0, d1, nodes, wts)
            else:
                total += self._cell_integral(r - d1, r - d0, nodes, wts)
        return total

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x < 0) or np.any(x > 1):
            raise ValueError("x must lie in [0, 1]")
        return self._interp(x)


@dataclass
class CarlemanConfig:
    s: float
    k: DegeneracyModel
    window: Window
    R: float = 1.0
    side: str = "at0"
    _p: WeightP = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if self.s <= 0:
            raise ValueError("s must be positive")
        self._p = WeightP(self.k, self.R, self.side)

    @property
    def p(self):
        return self._p

    def with_s(self, s):
        new = CarlemanConfig.__new__(CarlemanConfig)
        new.s, new.k, new.window, new.R, new.side, new._p = s, self.k, self.window, self.R, self.side, self._p
        if s <= 0:
            raise ValueError("s must be positive")
        return new


def phi(t, a, x, config: CarlemanConfig):
    """Theta(t,a) (p(x) - 2 sup|p|); strictly negative at interior nodes."""
    p = config.p
    return theta(t, a, config.window) * (p(x) - 2.0 * p.sup)


def weight_product(t, a, x, config: CarlemanConfig, power: int):
    """Theta^power * exp(2 s phi) in log space with flush-to-zero.

    Arguments broadcast against each other.
    """
    p = config.p
    lt = log_theta(t, a, config.window)
    th = np.exp(lt)
    expo = power * lt + 2.0 * config.s * th * (p(x) - 2.0 * p.sup)
    return np.where(expo < LOG_FLOOR, 0.0, np.exp(np.maximum(expo, LOG_FLOOR)))
