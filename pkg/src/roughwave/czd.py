"""Calderon-Zygmund decomposition at level 1/lambda with doubly-exponential
level splitting of the bad part.

f = g + sum_P b_P, with P the maximal lattice cubes where the average of |f|
exceeds 1/lambda, b_P carrying the values above 2^c1 / lambda on P, split
further into level pieces b_P^l over (2^(c1 2^(l-1)), 2^(c1 2^l)] / lambda,
each re-centered on P into a constant part and a mean-zero part.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .dyadic import Cube, DyadicLattice, cube_from_cells, prefix_sum
from .grid import Domain, GridFunction, ksum, lp_norm

__all__ = ["CZDecomposition", "cz_decompose", "aggregate", "cz_report", "exceptional_sets"]


@dataclass
class CZDecomposition:
    domain: Domain
    f: GridFunction
    lam: float
    c1: float
    maximal_cubes: list[Cube]
    cube_bounds: list[tuple[int, int, int, int]]
    good_part: GridFunction
    level_values: list[int]
    # (cube index, l) -> average of the level-l piece over the cube
    bad_level_means: dict[tuple[int, int], float]

    @property
    def inv_lambda(self) -> float:
        return 1.0 / self.lam

    def level_thresholds(self, l: int) -> tuple[float, float]:
        inv = self.inv_lambda
        return (2.0 ** (self.c1 * 2 ** (l - 1)) * inv, 2.0 ** (self.c1 * 2 ** l) * inv)

    def level_mask(self, idx: int, l: int) -> np.ndarray:
        """Mask (on the cube window) of the level-l set of cube idx."""
        i0, i1, j0, j1 = self.cube_bounds[idx]
        window = np.abs(self.f.values[i0:i1, j0:j1])
        lo, hi = self.level_thresholds(l)
        return (window > lo) & (window <= hi)

    def bad_piece(self, idx: int, l: int) -> tuple[float, np.ndarray]:
        """(constant part value, mean-zero part on the cube window)."""
        i0, i1, j0, j1 = self.cube_bounds[idx]
        mask = self.level_mask(idx, l)
        window = self.f.values[i0:i1, j0:j1]
        b_l = np.where(mask, window, 0.0)
        mean = self.bad_level_means[(idx, l)]
        return mean, b_l - mean

    def union_measure(self) -> float:
        return self.domain.cell_area * sum(
            (i1 - i0) * (j1 - j0) for i0, i1, j0, j1 in self.cube_bounds
        )


def _stopping_cubes(
    absf: np.ndarray, domain: Domain, lattice: DyadicLattice, threshold: float
) -> list[tuple[int, int, int]]:
    """Maximal lattice cubes (corner_i, corner_j, side_cells) with mean > threshold."""
    n = domain.resolution
    pref = prefix_sum(absf)
    area = domain.cell_area

    def mean(i0, j0, s):
        a0, a1 = max(i0, 0), min(i0 + s, n)
        b0, b1 = max(j0, 0), min(j0 + s, n)
        if a0 >= a1 or b0 >= b1:
            return 0.0
        total = pref[a1, b1] - pref[a0, b1] - pref[a1, b0] + pref[a0, b0]
        return total * area / ((s * s) * area)

    root_side = 2 * n
    if mean(0, 0, root_side) > threshold:
        raise ValueError(
            "mass too large: even the double-box ancestor exceeds the level, "
            "so stopping-cube maximality cannot be certified"
        )
    selected: list[tuple[int, int, int]] = []
    stack = [(0, 0, root_side)]
    while stack:
        i0, j0, s = stack.pop()
        if s == 1:
            continue
        half = s // 2
        for di in (0, half):
            for dj in (0, half):
                ci, cj = i0 + di, j0 + dj
                if ci >= n or cj >= n or ci + half <= 0 or cj + half <= 0:
                    continue
                if mean(ci, cj, half) > threshold:
                    selected.append((ci, cj, half))
                elif half > 1:
                    stack.append((ci, cj, half))
    return sorted(selected)


def cz_decompose(
    f: GridFunction, lam: float, lattice: DyadicLattice, c1: float = 0.2
) -> CZDecomposition:
    """Decompose f at level 1/lam over the given (unshifted) lattice."""
    if not 0.0 < lam < 1.0:
        raise ValueError("lam must lie in (0, 1)")
    if not 0.0 < c1 < 0.25:
        raise ValueError("c1 must lie in (0, 1/4)")
    if lattice.alternating or lattice.base_cells != 1:
        raise ValueError("the decomposition lattice must be the unshifted base lattice")
    domain = f.domain
    inv = 1.0 / lam
    absf = np.abs(f.values)
    raw = _stopping_cubes(absf, domain, lattice, inv)

    cubes, bounds = [], []
    n = domain.resolution
    for ci, cj, s in raw:
        cubes.append(cube_from_cells(domain, ci, cj, s))
        bounds.append((max(ci, 0), min(ci + s, n), max(cj, 0), min(cj + s, n)))

    big = 2.0 ** c1 * inv
    g_vals = f.values.copy()
    union = np.zeros_like(absf, dtype=bool)
    for i0, i1, j0, j1 in bounds:
        union[i0:i1, j0:j1] = True
    bad_mask = union & (absf > big)
    g_vals[bad_mask] = 0.0

    top = float(absf.max(initial=0.0))
    levels = []
    l = 1
    while 2.0 ** (c1 * 2 ** (l - 1)) * inv < top:
        levels.append(l)
        l += 1

    means: dict[tuple[int, int], float] = {}
    for idx, (i0, i1, j0, j1) in enumerate(bounds):
        window = f.values[i0:i1, j0:j1]
        awin = absf[i0:i1, j0:j1]
        n_cells = cubes[idx].cell_count(domain)
        for lv in levels:
            lo, hi = (2.0 ** (c1 * 2 ** (lv - 1)) * inv, 2.0 ** (c1 * 2 ** lv) * inv)
            mask = (awin > lo) & (awin <= hi)
            if np.any(mask):
                means[(idx, lv)] = ksum(window[mask]) / n_cells
            else:
                means[(idx, lv)] = 0.0

    return CZDecomposition(
        domain=domain,
        f=f,
        lam=lam,
        c1=c1,
        maximal_cubes=cubes,
        cube_bounds=bounds,
        good_part=GridFunction(domain, g_vals),
        level_values=levels,
        bad_level_means=means,
    )


def aggregate(dec: CZDecomposition, which: str, l: int, j: int | None = None) -> GridFunction:
    """Named aggregates: G^l, G1^l, G2^l and their per-side restrictions.

    which: 'G', 'G1', 'G2', 'B', 'B1', 'B2'.  The B kinds restrict to cubes
    of side 2^j cells and need j.
    """
    if which not in ("G", "G1", "G2", "B", "B1", "B2"):
        raise ValueError(f"unknown aggregate kind {which!r}")
    if which.startswith("B") and j is None:
        raise ValueError("side exponent j is required for B aggregates")
    out = np.zeros_like(dec.f.values)
    h = dec.domain.cell_size
    for idx, cube in enumerate(dec.maximal_cubes):
        if which.startswith("B"):
            side_cells = int(round(cube.side / h))
            if side_cells != (1 << j):
                continue
        i0, i1, j0_, j1_ = dec.cube_bounds[idx]
        mean, b2 = dec.bad_piece(idx, l)
        region = out[i0:i1, j0_:j1_]
        if which in ("G", "B"):
            region += b2 + mean
        elif which in ("G1", "B1"):
            region += mean
        else:
            region += b2
    return GridFunction(dec.domain, out)


def cz_report(dec: CZDecomposition) -> dict:
    """Measured constants of the decomposition's bounds, JSON-ready."""
    f = dec.f
    inv = dec.inv_lambda
    norm1 = lp_norm(f, 1)
    const_ii = 0.0
    for l in dec.level_values:
        g_l = aggregate(dec, "G", l)
        bound = 2.0 ** (dec.c1 * 2 ** l) * inv * norm1
        if bound > 0:
            const_ii = max(const_ii, lp_norm(g_l, 2) ** 2 / bound)
    abs_b1_sum = np.zeros_like(f.values)
    for l in dec.level_values:
        for idx in range(len(dec.maximal_cubes)):
            i0, i1, j0, j1 = dec.cube_bounds[idx]
            abs_b1_sum[i0:i1, j0:j1] += abs(dec.bad_level_means[(idx, l)])
    const_iii = float(abs_b1_sum.max(initial=0.0)) / inv
    const_iv = dec.good_part.max_abs() / (2.0 ** dec.c1 * inv)
    g1_abs = np.zeros_like(f.values)
    for l in dec.level_values:
        g1_abs += np.abs(aggregate(dec, "G1", l).values)
    const_eq26 = (
        float(np.sum(g1_abs)) * dec.domain.cell_area / norm1 if norm1 > 0 else 0.0
    )
    return {
        "lambda": dec.lam,
        "c1": dec.c1,
        "num_cubes": len(dec.maximal_cubes),
        "measure_of_union": dec.union_measure(),
        "constants": {
            "ii": const_ii,
            "iii": const_iii,
            "iv": const_iv,
            "eq2_6": const_eq26,
        },
    }


def exceptional_sets(dec: CZDecomposition, lattices: list[DyadicLattice]) -> dict:
    """Diagnostic measures of the dilated-cube union E and its maximal blowup E*."""
    from .operators import hl_maximal

    n = dec.domain.resolution
    e_mask = np.zeros((n, n), dtype=bool)
    for cube in dec.maximal_cubes:
        big = cube.dilate(72.0)  # 36 * d with d = 2
        i0, i1, j0, j1 = big.cell_bounds(dec.domain)
        if i0 < i1 and j0 < j1:
            e_mask[i0:i1, j0:j1] = True
    chi = GridFunction(dec.domain, e_mask.astype(np.float64))
    m_chi = hl_maximal(chi, lattices, r=1.0)
    e_star = m_chi.values > dec.lam / 32.0
    area = dec.domain.cell_area
    return {
        "measure_E": float(np.count_nonzero(e_mask)) * area,
        "measure_E_star": float(np.count_nonzero(e_star)) * area,
    }


def save_cz_report(dec: CZDecomposition, path) -> None:
    with open(path, "w") as fh:
        json.dump(cz_report(dec), fh, sort_keys=True, indent=2)
        fh.write("\n")
