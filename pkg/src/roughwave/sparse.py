"""Construction of eta-sparse cube families adapted to (f, T) and the
bilinear sparse forms they support.

The builder recurses through one shifted lattice from a root cube holding
the support of f.  At each selected cube Q it flags the exceptional set
where either |f| exceeds a multiple of the loglog-Orlicz average over 3Q or
the grand maximal function of T applied to f chi_3Q exceeds a multiple of
its median over Q, covers the flagged cells by maximal dyadic children of
majority overlap, recurses into those children, and keeps the remainder of
Q as the witness set.  Sparseness is never assumed: every family is
re-verified cell-exactly, and the threshold multiplier escalates on
failure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dyadic import (
    Cube,
    DyadicLattice,
    SparseFamily,
    cube_from_cells,
    prefix_sum,
    verify_sparse,
)
from .grid import GridFunction, integrate
from .operators import (
    LOCALIZATION_MIN_SIDE,
    OperatorHandle,
    rearrangement_value,
)
from .orlicz import YoungFunction, luxemburg_norm

__all__ = [
    "SparseBuildParams",
    "SparseBuildError",
    "build_sparse_family",
    "bilinear_form",
    "domination_ratio",
]


@dataclass(frozen=True)
class SparseBuildParams:
    threshold_multiplier: float = 16.0
    eta_target: float = 0.5
    max_depth: int = 8
    escalation_factor: float = 2.0
    rearrangement_level: float = 0.25  # lambda inside the grand maximal

    def __post_init__(self):
        if self.threshold_multiplier <= 1:
            raise ValueError("threshold_multiplier must exceed 1")
        if not 0 < self.eta_target <= 0.75:
            raise ValueError("eta_target must lie in (0, 1 - 2^-d] = (0, 3/4]")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.escalation_factor <= 1:
            raise ValueError("escalation_factor must exceed 1")
        if not 0 < self.rearrangement_level < 1:
            raise ValueError("rearrangement_level must lie in (0, 1)")


class SparseBuildError(RuntimeError):
    def __init__(self, worst_ratio: float, escalations: int):
        self.worst_ratio = worst_ratio
        self.escalations = escalations
        super().__init__(
            f"sparseness target missed after {escalations} escalations "
            f"(worst witness ratio {worst_ratio:.3f})"
        )


def _find_root(f: GridFunction, lattice: DyadicLattice) -> tuple[int, int, int]:
    """Smallest lattice cube fully inside the box containing supp f."""
    vals = f.values
    rows = np.flatnonzero(np.any(vals != 0.0, axis=1))
    cols = np.flatnonzero(np.any(vals != 0.0, axis=0))
    if rows.size == 0:
        raise ValueError("cannot root a sparse family on the zero function")
    lo = (int(rows[0]), int(cols[0]))
    hi = (int(rows[-1]) + 1, int(cols[-1]) + 1)
    n = f.domain.resolution
    for k in lattice.levels():
        s = lattice.side_cells(k)
        ox, oy = lattice.level_offset(k)
        mx = (lo[0] - ox) // s
        my = (lo[1] - oy) // s
        ci, cj = ox + mx * s, oy + my * s
        if (
            ci + s >= hi[0]
            and cj + s >= hi[1]
            and ci >= 0
            and cj >= 0
            and ci + s <= n
            and cj + s <= n
        ):
            return (ci, cj, s)
    raise ValueError(
        "no lattice cube inside the box contains the support; "
        "shrink the support or enlarge the box"
    )


def _grand_maximal_on_cube(
    f_masked: GridFunction,
    T: OperatorHandle,
    lattices: list[DyadicLattice],
    q_bounds: tuple[int, int, int, int],
    lam: float,
) -> np.ndarray:
    """M_{lam,T}(f_masked) evaluated on the cells of Q.

    Only localization cubes of side < 2 * side(Q) can contribute: any larger
    cube meeting Q has a 3-dilate swallowing 3Q and hence the whole masked
    support, which zeroes the operator input.
    """
    qi0, qi1, qj0, qj1 = q_bounds
    s = qi1 - qi0
    n = f_masked.domain.resolution
    pad = 2 * s
    out_window = (
        max(qi0 - pad, 0),
        min(qi1 + pad, n),
        max(qj0 - pad, 0),
        min(qj1 + pad, n),
    )
    prep = T.prepare(f_masked, out_window=out_window)
    mvals = np.zeros((s, s))
    for lat in lattices:
        for k in lat.levels():
            sp = lat.side_cells(k)
            if sp < LOCALIZATION_MIN_SIDE or sp >= 2 * s:
                continue
            ox, oy = lat.level_offset(k)
            m0x = (qi0 - ox - sp) // sp + 1
            m1x = (qi1 - 1 - ox) // sp
            m0y = (qj0 - oy - sp) // sp + 1
            m1y = (qj1 - 1 - oy) // sp
            for mx in range(m0x, m1x + 1):
                ci = ox + mx * sp
                if ci < 0 or ci + sp > n:
                    continue
                for my in range(m0y, m1y + 1):
                    cj = oy + my * sp
                    if cj < 0 or cj + sp > n:
                        continue
                    out_b = (ci, ci + sp, cj, cj + sp)
                    mask_b = (
                        max(ci - sp, 0),
                        min(ci + 2 * sp, n),
                        max(cj - sp, 0),
                        min(cj + 2 * sp, n),
                    )
                    u = prep.complement_on(mask_b, out_b)
                    v = rearrangement_value(u, lam)
                    if v <= 0.0:
                        continue
                    ii0, ii1 = max(ci, qi0), min(ci + sp, qi1)
                    jj0, jj1 = max(cj, qj0), min(cj + sp, qj1)
                    blk = mvals[ii0 - qi0 : ii1 - qi0, jj0 - qj0 : jj1 - qj0]
                    np.maximum(blk, v, out=blk)
    return mvals


def _majority_children(e_mask: np.ndarray, min_side: int) -> list[tuple[int, int, int]]:
    """Maximal dyadic sub-cubes of the mask's square with > half overlap."""
    s = e_mask.shape[0]
    pref = prefix_sum(e_mask.astype(np.float64))

    def count(i0, j0, side):
        return pref[i0 + side, j0 + side] - pref[i0, j0 + side] - pref[i0 + side, j0] + pref[i0, j0]

    selected = []
    stack = []
    if s % 2 == 0:
        half = s // 2
        stack = [(i, j, half) for i in (0, half) for j in (0, half)]
    while stack:
        i0, j0, side = stack.pop()
        if count(i0, j0, side) > side * side / 2.0:
            selected.append((i0, j0, side))
        elif side % 2 == 0 and side // 2 >= min_side:
            half = side // 2
            stack.extend(
                (i0 + a, j0 + b, half) for a in (0, half) for b in (0, half)
            )
    return sorted(selected)


def build_sparse_family(
    f: GridFunction,
    T: OperatorHandle,
    r: float,
    params: SparseBuildParams,
    lattices: list[DyadicLattice],
) -> SparseFamily:
    """Build an eta-sparse family adapted to (f, T), verified at runtime.

    The family does not depend on r (it must serve every pairing function),
    but r is recorded in the build info for reporting.
    """
    if r <= 1:
        raise ValueError("need r > 1")
    if f.max_abs() == 0.0:
        raise ValueError("f must not vanish identically")
    domain = f.domain
    n = domain.resolution
    phi = YoungFunction.phi_loglog()
    root_lattice = lattices[1] if len(lattices) > 1 else lattices[0]
    root = _find_root(f, root_lattice)

    a_mult = params.threshold_multiplier
    for escalation in range(6):
        cubes: list[Cube] = []
        witnesses: list[np.ndarray] = []
        stack = [(root, 0)]
        while stack:
            (ci, cj, s), depth = stack.pop()
            q_bounds = (ci, ci + s, cj, cj + s)
            cube = cube_from_cells(domain, ci, cj, s)
            children: list[tuple[int, int, int]] = []
            can_split = depth < params.max_depth and s % 2 == 0 and s >= 2 * 3
            if can_split:
                mask_b = (
                    max(ci - s, 0),
                    min(ci + 2 * s, n),
                    max(cj - s, 0),
                    min(cj + 2 * s, n),
                )
                masked_vals = np.zeros_like(f.values)
                masked_vals[mask_b[0] : mask_b[1], mask_b[2] : mask_b[3]] = f.values[
                    mask_b[0] : mask_b[1], mask_b[2] : mask_b[3]
                ]
                f_masked = GridFunction(domain, masked_vals)
                lux = luxemburg_norm(f, cube.dilate(3.0), phi)
                mvals = _grand_maximal_on_cube(
                    f_masked, T, lattices, q_bounds, params.rearrangement_level
                )
                window = np.abs(f.values[ci : ci + s, cj : cj + s])
                e_mask = window > a_mult * lux
                med = float(np.median(mvals))
                e_mask |= mvals > a_mult * med
                rel_children = _majority_children(e_mask, min_side=3)
                children = [(ci + a, cj + b, side) for a, b, side in rel_children]
            wit_mask = np.zeros((s, s), dtype=bool)
            wit_mask[:] = True
            for ai, aj, side in children:
                wit_mask[ai - ci : ai - ci + side, aj - cj : aj - cj + side] = False
            ii, jj = np.nonzero(wit_mask)
            flat = (ii + ci) * n + (jj + cj)
            cubes.append(cube)
            witnesses.append(np.sort(flat.astype(np.int64)))
            for child in children:
                stack.append((child, depth + 1))
        family = SparseFamily(domain, cubes, witnesses, eta=params.eta_target)
        report = verify_sparse(family)
        if report.ok:
            family.build_info = {
                "r": r,
                "num_cubes": len(cubes),
                "eta_achieved": report.worst_ratio,
                "escalations": escalation,
            }
            return family
        a_mult *= params.escalation_factor
    raise SparseBuildError(report.worst_ratio, escalation)


def bilinear_form(
    S: SparseFamily,
    f: GridFunction,
    g: GridFunction,
    phi1: YoungFunction,
    phi2: YoungFunction,
) -> float:
    """sum over S of <|f|>_{phi1,Q} <|g|>_{phi2,Q} |Q|."""
    total = 0.0
    for cube in S.cubes:
        a = luxemburg_norm(f, cube, phi1)
        if a == 0.0:
            continue
        b = luxemburg_norm(g, cube, phi2)
        total += a * b * cube.side ** 2
    return total


def domination_ratio(
    f: GridFunction,
    g: GridFunction,
    t_star_output: GridFunction,
    S: SparseFamily,
    r: float,
    omega_sup: float,
) -> float:
    """|<g, T* f>| over the two-term sparse bound; nan when degenerate."""
    if r <= 1:
        raise ValueError("need r > 1")
    r_conj = r / (r - 1.0)
    numerator = abs(integrate(g * t_star_output))
    l1 = YoungFunction.power_fn(1.0)
    lr = YoungFunction.power_fn(r)
    phi = YoungFunction.phi_loglog()
    denom = omega_sup * (
        r_conj * bilinear_form(S, f, g, l1, lr) + bilinear_form(S, f, g, phi, lr)
    )
    if denom == 0.0:
        return math.nan
    return numerator / denom
