"""Degenerate diffusion coefficients and their structural hypotheses.

A coefficient ``k`` on [0, 1] either vanishes at x=0 (``power_at_0``), at x=1
(``power_at_1``), is given by a table of samples (``tabulated``), or is a
positive constant (``constant``, a non-degenerate sanity configuration).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicHermiteSpline, PchipInterpolator

KINDS = ("power_at_0", "power_at_1", "tabulated", "constant")


@dataclass(frozen=True)
class DegeneracyModel:
    kind: str
    exponent: float = 1.0
    scale: float = 1.0
    samples: tuple | None = None       # (x, k) for tabulated models
    derivative: tuple | None = None    # optional k' at the same x
    degenerate_side: str | None = None  # tabulated only: "at0" or "at1"
    _interp: object = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown coefficient kind {self.kind!r}")
        if self.scale <= 0:
            raise ValueError("scale must be positive")
        if self.kind in ("power_at_0", "power_at_1") and self.exponent <= 0:
            raise ValueError("exponent must be positive")
        if self.kind == "tabulated":
            if self.samples is None:
                raise ValueError("tabulated model needs samples")
            xs = np.asarray(self.samples[0], dtype=float)
            ks = np.asarray(self.samples[1], dtype=float)
            if xs.ndim != 1 or xs.shape != ks.shape or xs.size < 4:
                raise ValueError("samples must be two equal 1-D arrays of length >= 4")
            if np.any(np.diff(xs) <= 0):
                raise ValueError("sample abscissae must be strictly increasing")
            if xs[0] < 0 or xs[-1] > 1:
                raise ValueError("samples must lie in [0, 1]")
            side = self.degenerate_side
            if side not in ("at0", "at1"):
                raise ValueError("tabulated model needs degenerate_side 'at0' or 'at1'")
            interior = (xs > 0) if side == "at0" else (xs < 1)
            if np.any(ks[interior] <= 0):
                raise ValueError("tabulated k must be positive away from the degenerate endpoint")
            if self.derivative is not None:
                dks = np.asarray(self.derivative, dtype=float)
                interp = CubicHermiteSpline(xs, ks, dks, extrapolate=True)
            else:
                interp = PchipInterpolator(xs, ks, extrapolate=True)
            object.__setattr__(self, "_interp", interp)

    # -- constructors -------------------------------------------------------
    @classmethod
    def power_at_0(cls, alpha, scale=1.0):
        return cls("power_at_0", exponent=float(alpha), scale=float(scale))

    @classmethod
    def power_at_1(cls, beta, scale=1.0):
        return cls("power_at_1", exponent=float(beta), scale=float(scale))

    @classmethod
    def constant(cls, c=1.0):
        return cls("constant", scale=float(c))

    @classmethod
    def tabulated(cls, x, k, side="at0", dk=None):
        x = tuple(float(v) for v in x)
        k = tuple(float(v) for v in k)
        dk = None if dk is None else tuple(float(v) for v in dk)
        return cls("tabulated", samples=(x, k), derivative=dk, degenerate_side=side)

    @classmethod
    def from_csv(cls, path, side="at0"):
        """Two-column CSV (x, k); a header line is allowed."""
        xs, ks = [], []
        with open(Path(path), newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].strip().startswith("#"):
                    continue
                try:
                    xs.append(float(row[0]))
                    ks.append(float(row[1]))
                except ValueError:
                    if xs:
                        raise
                    continue  # header
        return cls.tabulated(xs, ks, side=side)

    # -- evaluation ---------------------------------------------------------
    @property
    def side(self):
        if self.kind == "power_at_0":
            return "at0"
        if self.kind == "power_at_1":
            return "at1"
        if self.kind == "tabulated":
            return self.degenerate_side
        return None

    def __call__(self, x):
        return eval_k(self, x)

    def derivative_at(self, x):
        x = _check_unit(x)
        if self.kind == "power_at_0":
            a = self.exponent
            with np.errstate(divide="ignore", invalid="ignore"):
                return self.scale * a * np.power(x, a - 1.0)
        if self.kind == "power_at_1":
            b = self.exponent
            with np.errstate(divide="ignore", invalid="ignore"):
                return -self.scale * b * np.power(1.0 - x, b - 1.0)
        if self.kind == "constant":
            return np.zeros_like(x)
        return self._interp.derivative(1)(x)

    def second_derivative_at(self, x):
        x = _check_unit(x)
        if self.kind == "power_at_0":
            a = self.exponent
            with np.errstate(divide="ignore", invalid="ignore"):
                return self.scale * a * (a - 1.0) * np.power(x, a - 2.0)
        if self.kind == "power_at_1":
            b = self.exponent
            with np.errstate(divide="ignore", invalid="ignore"):
                return self.scale * b * (b - 1.0) * np.power(1.0 - x, b - 2.0)
        if self.kind == "constant":
            return np.zeros_like(x)
        return self._interp.derivative(2)(x)

    def ratio(self, x):
        """x k'/k (degenerate at 0) or (x-1) k'/k (degenerate at 1)."""
        x = np.asarray(x, dtype=float)
        if self.kind == "power_at_0":
            return np.full_like(x, self.exponent)
        if self.kind == "power_at_1":
            return np.full_like(x, self.exponent)
        lever = x if self.side != "at1" else x - 1.0
        return lever * self.derivative_at(x) / eval_k(self, x)

    def ratio_derivative(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind in ("power_at_0", "power_at_1", "constant"):
            return np.zeros_like(x)
        lever = x if self.side != "at1" else x - 1.0
        k = eval_k(self, x)
        k1 = self.derivative_at(x)
        k2 = self.second_derivative_at(x)
        return (k1 + lever * k2) / k - lever * k1 ** 2 / k ** 2


def _check_unit(x):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0.0) or np.any(x > 1.0) or np.any(~np.isfinite(x)):
        raise ValueError("x must lie in [0, 1]")
    return x


def eval_k(model: DegeneracyModel, x):
    """Evaluate k at x in [0, 1] (exact closed forms for the power kinds)."""
    x = _check_unit(x)
    if model.kind == "power_at_0":
        return model.scale * np.power(x, model.exponent)
    if model.kind == "power_at_1":
        return model.scale * np.power(1.0 - x, model.exponent)
    if model.kind == "constant":
        return np.full_like(x, model.scale)
    out = np.asarray(model._interp(x), dtype=float)
    # pin the declared zero; the interpolant may overshoot by rounding there
    if model.side == "at0":
        out = np.where(x == 0.0, 0.0, out)
    else:
        out = np.where(x == 1.0, 0.0, out)
    return out


@dataclass
class DegeneracyReport:
    side: str | None
    degeneracy_class: str
    M_best: float
    hypothesis_items: list = field(default_factory=list)

    def to_dict(self):
        return {
            "side": self.side,
            "class": self.degeneracy_class,
            "M_best": self.M_best,
            "hypothesis_items": [dict(i) for i in self.hypothesis_items],
        }


def _class_of(M):
    if 0.0 < M < 1.0:
        return "WD"
    if 1.0 <= M < 2.0:
        return "SD"
    return "none"


def _interior_samples(side, n):
    # uniform sample of [0,1] with the degenerate endpoint removed
    x = np.linspace(0.0, 1.0, n + 1)
    return x[1:] if side != "at1" else x[:-1]


def classify_degeneracy(model: DegeneracyModel, n_samples: int = 4096) -> DegeneracyReport:
    """Sampled supremum of the degeneracy ratio and the WD/SD class.

    M_best is a lower bound for the true supremum; it is exact for the
    power kinds.
    """
    if n_samples < 16:
        raise ValueError("n_samples must be >= 16")
    if model.kind == "constant":
        return DegeneracyReport(None, "none", 0.0)
    x = _interior_samples(model.side, n_samples)
    r = model.ratio(x)
    if not np.all(np.isfinite(r)):
        raise ValueError("non-finite degeneracy ratio at an interior sample")
    M = float(np.max(r))
    return DegeneracyReport(model.side, _class_of(M), M)


def _distance_grid(eps, n, x_floor):
    # distances from the degenerate endpoint, log-spaced toward it
    lo = max(x_floor, eps * 1e-6)
    return np.geomspace(lo, eps, n)


def _bounded_near_endpoint(values, n_bands=6, growth=10.0):
    """Heuristic boundedness test on nested shells approaching the endpoint.

    ``values`` are ordered from the endpoint outwards.  The function is
    declared unbounded when the supremum over the innermost shell exceeds
    ``growth`` times the supremum over the outer shells.
    """
    a = np.abs(np.asarray(values, dtype=float))
    if not np.all(np.isfinite(a)):
        return False, float("inf")
    bands = np.array_split(a, n_bands)
    inner = float(np.max(bands[0]))
    outer = float(max(np.max(b) for b in bands[n_bands // 2:]))
    return inner <= growth * outer + 1e-9, float(np.max(a))


def check_carleman_hypotheses(model: DegeneracyModel, eps_nbhd: float = 0.5,
                              n_refine: int = 2048, n_samples: int = 4096):
    """Pass/fail items for the Carleman hypotheses near the degenerate endpoint."""
    if not 0.0 < eps_nbhd <= 1.0:
        raise ValueError("eps_nbhd must lie in (0, 1]")
    side = model.side
    if side is None:
        return [{"item": "degenerate coefficient", "passed": False, "value": None}]
    x_floor = 1e-10
    if model.kind == "tabulated":
        xs = np.asarray(model.samples[0])
        d = xs if side == "at0" else 1.0 - xs
        x_floor = float(np.min(d[d > 0]))
    dist = _distance_grid(eps_nbhd, n_refine, x_floor)
    x = dist if side == "at0" else 1.0 - dist
    with np.errstate(all="ignore"):
        r = model.ratio(x)
        dr = model.ratio_derivative(x)
    ok_r, sup_r = _bounded_near_endpoint(r)
    ok_dr, sup_dr = _bounded_near_endpoint(dr)

    xs = _interior_samples(side, n_samples)
    with np.errstate(all="ignore"):
        rg = np.concatenate([model.ratio(xs), r])
    M = float(np.max(rg)) if np.all(np.isfinite(rg)) else float("inf")
    return [
        {"item": "ratio bounded near endpoint", "passed": bool(ok_r), "value": sup_r},
        {"item": "global bound M < 2", "passed": bool(M < 2.0), "value": M},
        {"item": "derivative bounded", "passed": bool(ok_dr), "value": sup_dr},
    ]


def check_pair_ordering(k1: DegeneracyModel, k2: DegeneracyModel, n: int = 4096):
    """True iff k1 >= k2 at every sample; also the worst margin min(k1 - k2)."""
    x = np.linspace(0.0, 1.0, n)
    margin = float(np.min(eval_k(k1, x) - eval_k(k2, x)))
    return margin >= 0.0, margin


def same_coefficient(k1: DegeneracyModel, k2: DegeneracyModel, n: int = 1025) -> bool:
    x = np.linspace(0.0, 1.0, n)
    return bool(np.array_equal(eval_k(k1, x), eval_k(k2, x)))
