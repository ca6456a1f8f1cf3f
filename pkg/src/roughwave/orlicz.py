"""Young functions, Luxemburg cube norms, and the Orlicz maximal operator.

The Luxemburg norm over a cube is the smallest lambda making the cube
average of Phi(|f|/lambda) at most one.  The average is monotone in lambda,
so bisection (in log-lambda, for dynamic range) is exact and robust; the
power case additionally has the closed form (<|f|^p>_Q)^(1/p).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .dyadic import Cube, DyadicLattice, prefix_sum
from .grid import GridFunction, ksum

__all__ = [
    "YoungFunction",
    "luxemburg_norm",
    "orlicz_maximal",
    "check_refinement_inequality",
    "scale_luxemburg_norms",
]

_E2 = math.e ** 2

_BISECT_ITERS = 64
_BRACKET_FLOOR = 1e-16


@dataclass(frozen=True)
class YoungFunction:
    """Convex increasing t -> Phi(t) with Phi(0) = 0, vectorized."""

    name: str
    fn: Callable[[np.ndarray], np.ndarray]
    power: float | None = None  # exponent when Phi(t) = t^p

    def __call__(self, t) -> np.ndarray:
        return self.fn(np.asarray(t, dtype=np.float64))

    @staticmethod
    def power_fn(p: float) -> "YoungFunction":
        if p < 1:
            raise ValueError("power Young functions need p >= 1")
        return YoungFunction(f"power:{p:g}", lambda t: t ** p, power=float(p))

    @staticmethod
    def phi_loglog() -> "YoungFunction":
        return YoungFunction("phi", lambda t: t * np.log(np.log(_E2 + t)))

    @staticmethod
    def psi1() -> "YoungFunction":
        return YoungFunction("psi1", lambda t: t * np.log(math.e + t))

    @staticmethod
    def psi2() -> "YoungFunction":
        return YoungFunction(
            "psi2", lambda t: t * np.log(math.e + t) * np.log(np.log(_E2 + t))
        )

    @staticmethod
    def from_name(name: str) -> "YoungFunction":
        if name.startswith("power:"):
            return YoungFunction.power_fn(float(name.split(":", 1)[1]))
        if name == "phi":
            return YoungFunction.phi_loglog()
        if name == "psi1":
            return YoungFunction.psi1()
        if name == "psi2":
            return YoungFunction.psi2()
        raise ValueError(f"unknown Young function {name!r}")


def _cube_cells(f: GridFunction, Q: Cube) -> tuple[np.ndarray, int]:
    """(|f| samples on Q inside the domain, full cube cell count)."""
    i0, i1, j0, j1 = Q.cell_bounds(f.domain)
    if i0 >= i1 or j0 >= j1:
        raise ValueError("cube does not intersect the domain")
    vals = np.abs(f.values[i0:i1, j0:j1]).ravel()
    return vals, Q.cell_count(f.domain)


def luxemburg_norm(f: GridFunction, Q: Cube, phi: YoungFunction) -> float:
    """Luxemburg norm <|f|>_{Phi,Q}; zero when f vanishes on Q.

    The function is zero-extended outside the domain and the average is
    normalized by the full cube cell count.
    """
    vals, n_cells = _cube_cells(f, Q)
    top = float(vals.max(initial=0.0))
    if top == 0.0:
        return 0.0
    if phi.power is not None:
        return (ksum(vals ** phi.power) / n_cells) ** (1.0 / phi.power)

    def avg(lam: float) -> float:
        return ksum(np.asarray(phi(vals / lam))) / n_cells

    hi = top
    while avg(hi) > 1.0:
        hi *= 2.0
    lo = top * _BRACKET_FLOOR
    log_lo, log_hi = math.log(lo), math.log(hi)
    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (log_lo + log_hi)
        if avg(math.exp(mid)) > 1.0:
            log_lo = mid
        else:
            log_hi = mid
    return math.exp(log_hi)


def scale_luxemburg_norms(
    absf: np.ndarray,
    phi: YoungFunction,
    tiling,
) -> np.ndarray:
    """Luxemburg norms over every cube of one scale tiling, vectorized.

    Runs the log-bisection simultaneously for all cubes of the tiling.
    """
    n_cells = tiling.side_cells ** 2
    mi, mj = tiling.cell_to_cube()

    if phi.power is not None:
        p = phi.power
        sums = np.maximum(tiling.cube_sums(prefix_sum(absf ** p)), 0.0)
        return (sums / n_cells) ** (1.0 / p)

    pref_mask = prefix_sum((absf > 0).astype(np.float64))
    nonzero = tiling.cube_sums(pref_mask) > 0

    # per-cube max via segment maxima along each axis
    n = absf.shape[0]
    cx, cy = tiling.axis_corners()
    ax = np.clip(cx, 0, n - 1)
    ay = np.clip(cy, 0, n - 1)
    colmax = np.maximum.reduceat(absf, ax, axis=0)
    tops = np.maximum.reduceat(colmax, ay, axis=1)

    lam = np.zeros(tops.shape)
    if not np.any(nonzero):
        return lam

    hi = np.where(nonzero, tops, 1.0)

    def avgs(lam_grid: np.ndarray) -> np.ndarray:
        lam_cell = lam_grid[mi[:, None], mj[None, :]]
        vals = np.asarray(phi(absf / lam_cell))
        return tiling.cube_sums(prefix_sum(vals)) / n_cells

    for _ in range(60):
        over = nonzero & (avgs(hi) > 1.0)
        if not np.any(over):
            break
        hi = np.where(over, 2.0 * hi, hi)
    log_hi = np.log(hi)
    log_lo = log_hi + math.log(_BRACKET_FLOOR)
    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (log_lo + log_hi)
        over = avgs(np.exp(mid)) > 1.0
        log_lo = np.where(over, mid, log_lo)
        log_hi = np.where(over, log_hi, mid)
    lam[nonzero] = np.exp(log_hi)[nonzero]
    return lam


def orlicz_maximal(
    f: GridFunction, phi: YoungFunction, lattices: list[DyadicLattice]
) -> GridFunction:
    """Pointwise sup of the Luxemburg norm over all lattice cubes containing x."""
    absf = np.abs(f.values)
    acc = np.zeros_like(absf)
    for lat in lattices:
        for k in lat.levels():
            tiling = lat.tiling(k)
            lam = scale_luxemburg_norms(absf, phi, tiling)
            mi, mj = tiling.cell_to_cube()
            np.maximum(acc, lam[mi[:, None], mj[None, :]], out=acc)
    return GridFunction(f.domain, acc)


def check_refinement_inequality(f: GridFunction, Q: Cube, r: float) -> float:
    """Ratio of the loglog-Luxemburg norm to log(1+r')<|f|>_Q + <|f|>_{r,Q}."""
    if r <= 1:
        raise ValueError("need r > 1")
    r_conj = r / (r - 1.0)
    num = luxemburg_norm(f, Q, YoungFunction.phi_loglog())
    mean = luxemburg_norm(f, Q, YoungFunction.power_fn(1.0))
    mean_r = luxemburg_norm(f, Q, YoungFunction.power_fn(r))
    denom = math.log(1.0 + r_conj) * mean + mean_r
    if denom == 0.0:
        return 0.0
    return num / denom
