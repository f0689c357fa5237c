"""Canonical instance, initial-data shapes and random terminal-data ensembles."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coefficients import DegeneracyModel
from .forward import RatePack
from .hum import ControlSetup
from .mesh import TensorGrid


def gaussian_bump(grid: TensorGrid, center=(0.3, 0.5), width=(0.12, 0.12), amplitude=1.0):
    """exp(-|(a, x) - center|^2 / 2 width^2), zeroed on the x boundary."""
    a, x = grid.a[:, None], grid.x[None, :]
    f = amplitude * np.exp(-0.5 * (((a - center[0]) / width[0]) ** 2 + ((x - center[1]) / width[1]) ** 2))
    f[:, 0] = f[:, -1] = 0.0
    return f


def bubble_product(grid: TensorGrid, amplitude=1.0, a_range=(0.0, None)):
    """amplitude * sin^2 age bubble on a_range times 4x(1-x)."""
    lo, hi = a_range
    hi = grid.A if hi is None else hi
    s = np.clip((grid.a - lo) / (hi - lo), 0.0, 1.0)
    fa = np.sin(np.pi * s) ** 2
    fx = 4.0 * grid.x * (1.0 - grid.x)
    f = amplitude * np.outer(fa, fx)
    f[:, 0] = f[:, -1] = 0.0
    return f


def band_cutoff(grid: TensorGrid, lo: float, hi: float | None = None):
    """sin^2 ramp on (lo, hi), exactly zero outside the open interval and at a = A."""
    hi = grid.A if hi is None else hi
    a = grid.a
    s = (a - lo) / (hi - lo)
    c = np.where((s > 1e-12) & (s < 1 - 1e-12), np.sin(np.pi * np.clip(s, 0, 1)) ** 2, 0.0)
    c[-1] = 0.0
    return c


def random_band_limited(rng, grid: TensorGrid, support=(0.0, None), modes=(4, 6), decay=1.0):
    """Random slice sum_{p,q} c_pq sin(p pi x) cos((q-1) pi s) times the band cutoff.

    Coefficients are standard normal scaled by (p q)^(-decay).
    """
    mp, mq = modes
    lo, hi = support
    hi = grid.A if hi is None else hi
    s = np.clip((grid.a - lo) / (hi - lo), 0.0, 1.0)
    p = np.arange(1, mp + 1)
    q = np.arange(1, mq + 1)
    coef = rng.standard_normal((mq, mp)) / np.outer(q, p) ** decay
    age = np.cos(np.pi * np.outer(s, q - 1))                # (Na+1, mq)
    space = np.sin(np.pi * np.outer(p, grid.x))              # (mp, Nx+1)
    f = age @ coef @ space
    f *= band_cutoff(grid, lo, hi)[:, None]
    f[:, 0] = f[:, -1] = 0.0
    return f


def sine_bubbles(rng, x, n_modes=8):
    """Random profile sum_{m<=n} c_m sin(m pi x), vanishing at both ends."""
    c = rng.standard_normal(n_modes) / np.arange(1, n_modes + 1)
    w = np.sin(np.pi * np.outer(x, np.arange(1, n_modes + 1))) @ c
    w[0] = w[-1] = 0.0
    return w


@dataclass
class Problem:
    grid: TensorGrid
    k1: DegeneracyModel
    k2: DegeneracyModel
    rates: RatePack
    setup: ControlSetup
    u0: np.ndarray
    v0: np.ndarray


def canonical(Na=40, Nx=60, T=2.0, A=1.0, abar=0.5, delta=0.6, omega=(0.3, 0.7),
              alpha1=0.5, alpha2=0.7, eps=1e-8, method="joint", b1=4.0, b2=3.0,
              mu11=0.1, mu22=0.1, mu21=1.0) -> Problem:
    """Desk-scale reference instance; Na=40, Nx=60 gives the 80 x 40 x 60 lattice."""
    grid = TensorGrid.aligned_grid(T, A, Na, Nx)
    k1 = DegeneracyModel.power_at_0(alpha1)
    k2 = DegeneracyModel.power_at_0(alpha2)
    rates = RatePack.constant(grid, mu11, mu22, mu21, b1, b2, abar, abar)
    setup = ControlSetup(omega=omega, delta=delta, eps=eps, method=method,
                         equal_coefficients=alpha1 == alpha2)
    u0 = gaussian_bump(grid, center=(0.3, 0.5))
    v0 = bubble_product(grid, 0.5, a_range=(0.0, 0.6))
    return Problem(grid, k1, k2, rates, setup, u0, v0)
