"""Muckenhoupt weights and their A_p, A_1, A_infinity constants.

The continuum 'sup over all cubes' is realized as a sup over the standard
lattice family restricted to cubes fully inside the box with side >= 4
cells; w^(1-p') is not extendable by zero, so boundary-crossing cubes are
excluded throughout.  All three constants are exactly invariant under
w -> c*w.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dyadic import DyadicLattice, prefix_sum
from .grid import Domain, GridFunction
from .operators import hl_maximal

__all__ = ["Weight", "ap_constant", "a1_constant", "ainf_constant", "parse_weight"]

_MIN_SIDE = 4


@dataclass
class Weight:
    """Positive grid function with cached Muckenhoupt constants."""

    values: GridFunction
    cached_constants: dict = field(default_factory=dict)

    def __post_init__(self):
        if np.any(self.values.values <= 0):
            raise ValueError("weights must be strictly positive")

    @property
    def domain(self) -> Domain:
        return self.values.domain

    def mass(self) -> float:
        return float(np.sum(self.values.values)) * self.domain.cell_area


def _inside_scales(lat: DyadicLattice):
    for k in lat.levels():
        if lat.side_cells(k) < _MIN_SIDE:
            continue
        yield lat.tiling(k)


def ap_constant(w: Weight, p: float, lattices: list[DyadicLattice]) -> float:
    """sup_Q <w>_Q <w^(1-p')>_Q^(p-1) over interior lattice cubes."""
    if p <= 1:
        raise ValueError("A_p constants need p > 1")
    key = ("ap", float(p))
    if key in w.cached_constants:
        return w.cached_constants[key]
    vals = w.values.values
    dual_exp = -1.0 / (p - 1.0)  # 1 - p'
    pref_w = prefix_sum(vals)
    pref_dual = prefix_sum(vals ** dual_exp)
    best = 0.0
    for lat in lattices:
        for tiling in _inside_scales(lat):
            inside = tiling.fully_inside()
            if not np.any(inside):
                continue
            n_cells = tiling.side_cells ** 2
            mean_w = tiling.cube_sums(pref_w) / n_cells
            mean_dual = tiling.cube_sums(pref_dual) / n_cells
            prod = mean_w * mean_dual ** (p - 1.0)
            best = max(best, float(prod[inside].max()))
    w.cached_constants[key] = best
    return best


def a1_constant(w: Weight, lattices: list[DyadicLattice]) -> float:
    """sup_x Mw(x)/w(x) with the lattice Hardy-Littlewood maximal."""
    if "a1" in w.cached_constants:
        return w.cached_constants["a1"]
    mw = hl_maximal(w.values, lattices, r=1.0)
    out = float(np.max(mw.values / w.values.values))
    w.cached_constants["a1"] = out
    return out


def ainf_constant(w: Weight, lattices: list[DyadicLattice]) -> float:
    """Fujii-Wilson constant sup_Q (1/w(Q)) int_Q M(w chi_Q).

    The inner maximal runs over the same lattice family; scales above four
    times the side of Q are skipped because their averages of w chi_Q are
    dominated by the containing cube of triple side, which is present.
    """
    if "ainf" in w.cached_constants:
        return w.cached_constants["ainf"]
    vals = w.values.values
    n = w.domain.resolution
    pref = prefix_sum(vals)

    def rect_sum(i0, i1, j0, j1):
        return pref[i1, j1] - pref[i0, j1] - pref[i1, j0] + pref[i0, j0]

    best = 0.0
    for lat in lattices:
        for tiling in _inside_scales(lat):
            s = tiling.side_cells
            cx, cy = tiling.axis_corners()
            inside = tiling.fully_inside()
            for a in range(len(cx)):
                for b in range(len(cy)):
                    if not inside[a, b]:
                        continue
                    qi0, qj0 = int(cx[a]), int(cy[b])
                    qi1, qj1 = qi0 + s, qj0 + s
                    w_q = rect_sum(qi0, qi1, qj0, qj1)
                    if w_q <= 0:
                        continue
                    macc = np.zeros((s, s))
                    for lat2 in lattices:
                        for t2 in lat2.levels():
                            s2 = lat2.side_cells(t2)
                            if s2 > 4 * s:
                                continue
                            til2 = lat2.tiling(t2)
                            o2x, o2y = til2.ox, til2.oy
                            m0x = (qi0 - o2x - s2) // s2 + 1
                            m1x = (qi1 - 1 - o2x) // s2
                            m0y = (qj0 - o2y - s2) // s2 + 1
                            m1y = (qj1 - 1 - o2y) // s2
                            for mx in range(m0x, m1x + 1):
                                c2x = o2x + mx * s2
                                ii0, ii1 = max(c2x, qi0), min(c2x + s2, qi1)
                                if ii0 >= ii1:
                                    continue
                                for my in range(m0y, m1y + 1):
                                    c2y = o2y + my * s2
                                    jj0, jj1 = max(c2y, qj0), min(c2y + s2, qj1)
                                    if jj0 >= jj1:
                                        continue
                                    avg = rect_sum(ii0, ii1, jj0, jj1) / (s2 * s2)
                                    blk = macc[
                                        ii0 - qi0 : ii1 - qi0, jj0 - qj0 : jj1 - qj0
                                    ]
                                    np.maximum(blk, avg, out=blk)
                    best = max(best, float(macc.sum() / w_q))
    w.cached_constants["ainf"] = best
    return best


def parse_weight(spec: str, domain: Domain) -> Weight:
    """Weight presets: 'const:c', 'power:a:x0:y0', 'indicator-mix:ci:co:r[:x0:y0]'."""
    parts = spec.split(":")
    X, Y = domain.meshgrid()
    if parts[0] == "const":
        c = float(parts[1])
        return Weight(GridFunction(domain, np.full_like(X, c)))
    if parts[0] == "power":
        a = float(parts[1])
        if a <= -2.0:
            raise ValueError("power weights need exponent > -d = -2")
        x0 = float(parts[2]) if len(parts) > 2 else 0.0
        y0 = float(parts[3]) if len(parts) > 3 else 0.0
        reg = domain.cell_size / 2.0
        r = np.hypot(X - x0, Y - y0) + reg
        return Weight(GridFunction(domain, r ** a))
    if parts[0] == "indicator-mix":
        c_in, c_out, radius = float(parts[1]), float(parts[2]), float(parts[3])
        x0 = float(parts[4]) if len(parts) > 4 else 0.0
        y0 = float(parts[5]) if len(parts) > 5 else 0.0
        if c_in <= 0 or c_out <= 0:
            raise ValueError("indicator-mix levels must be positive")
        vals = np.where(np.hypot(X - x0, Y - y0) <= radius, c_in, c_out)
        return Weight(GridFunction(domain, vals))
    raise ValueError(f"unknown weight preset {spec!r}")
