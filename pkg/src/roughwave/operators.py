"""Grid operators: the rough singular integral, its truncated, maximal,
lacunary, and mollified variants, Hardy-Littlewood averages, rearrangements,
and the grand/sharp maximal functions of a localized operator.

All convolutions are direct summation (scipy.signal.convolve2d); no FFT is
used anywhere in the operator path.  A kernel-backed operator is a list of
component tables (annuli of the hard truncation, or smooth dyadic pieces)
plus a combine rule: plain sum for the linear kinds, sup of |suffix sums|
for the maximal kinds.  Preparing an operator on an input caches the
component convolutions so that the masked evaluations T(f x outside 3Q)
needed by the localized maximal functions reduce to small window
corrections.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import convolve2d

from .dyadic import DyadicLattice, prefix_sum
from .grid import Domain, GridFunction
from .kernel import (
    KernelPiece,
    KernelTable,
    Mollifier,
    RoughKernel,
    ScaleRangeError,
    difference_kernel,
    full_kernel_table,
    mollified_kernel,
    mollified_piece_table,
)

__all__ = [
    "TruncationGrid",
    "OperatorHandle",
    "PreparedOperator",
    "singular_integral",
    "truncated_integral",
    "maximal_truncation",
    "lacunary_maximal",
    "mollified_operator",
    "lacunary_mollified",
    "difference_sup",
    "hl_maximal",
    "Rearrangement",
    "rearrangement",
    "rearrangement_value",
    "grand_maximal",
    "sharp_maximal",
    "commutator_maximal",
    "bmo_seminorm",
    "handle_singular",
    "handle_maximal_truncation",
    "handle_lacunary",
    "handle_mollified",
    "handle_lacunary_mollified",
    "handle_difference_sup",
    "handle_commutator",
    "localization_tilings",
    "LOCALIZATION_MIN_SIDE",
]

# Localized maximal functions scan cubes fully inside the box with at least
# this many cells per side; averaging operators scan every scale.
LOCALIZATION_MIN_SIDE = 4


# --- truncation grids -------------------------------------------------------


@dataclass(frozen=True)
class TruncationGrid:
    """Geometric truncation radii {h * 2^k}, covering up to the box diameter."""

    epsilons: tuple[float, ...]

    def __post_init__(self):
        eps = self.epsilons
        if len(eps) < 1 or any(b <= a for a, b in zip(eps, eps[1:])):
            raise ValueError("epsilons must be strictly increasing")

    @staticmethod
    def for_domain(domain: Domain) -> "TruncationGrid":
        h = domain.cell_size
        eps = [h]
        while eps[-1] < domain.diameter:
            eps.append(eps[-1] * 2.0)
        return TruncationGrid(tuple(eps))


# --- convolution primitives -------------------------------------------------


def _bbox_of_support(values: np.ndarray) -> tuple[int, int, int, int] | None:
    rows = np.flatnonzero(np.any(values != 0.0, axis=1))
    if rows.size == 0:
        return None
    cols = np.flatnonzero(np.any(values != 0.0, axis=0))
    return (int(rows[0]), int(rows[-1]) + 1, int(cols[0]), int(cols[-1]) + 1)


def _conv_pair(f_in: np.ndarray, t_c: np.ndarray, s0: int, s1: int, out_shape) -> np.ndarray:
    """Entries [s, s + out) of the full linear convolution of f_in and t_c.

    Runs convolve2d in 'valid' mode on the minimally zero-padded larger
    factor, so the work is ~ out_size * min(factor sizes).
    """
    if t_c.size <= f_in.size:
        in1, in2 = f_in, t_c
    else:
        in1, in2 = t_c, f_in
    pads = []
    qmins = []
    for ax, s in enumerate((s0, s1)):
        n1, n2, m = in1.shape[ax], in2.shape[ax], out_shape[ax]
        lo = max(0, (n2 - 1) - s)
        hi = max(0, s + m - n1)
        pads.append((lo, hi))
        qmins.append(s - (n2 - 1) + lo)
    if any(p != (0, 0) for p in pads):
        in1 = np.pad(in1, pads)
    valid = convolve2d(in1, in2, mode="valid")
    q0, q1 = qmins
    return valid[q0 : q0 + out_shape[0], q1 : q1 + out_shape[1]]


def conv_window(
    values: np.ndarray,
    table: KernelTable,
    in_win: tuple[int, int, int, int],
    out_win: tuple[int, int, int, int],
    h: float,
) -> np.ndarray:
    """h^2 * sum_{y in in_win} K(x - y) f(y) for x in out_win.

    Windows are (i0, i1, j0, j1) half-open cell ranges; the kernel table is
    cropped to the offsets the window pair can realize.
    """
    ia0, ia1, ja0, ja1 = in_win
    oa0, oa1, jo0, jo1 = out_win
    out_shape = (oa1 - oa0, jo1 - jo0)
    if ia0 >= ia1 or ja0 >= ja1 or oa0 >= oa1 or jo0 >= jo1:
        return np.zeros(out_shape)
    lo = (oa0 - (ia1 - 1), jo0 - (ja1 - 1))
    hi = (oa1 - 1 - ia0, jo1 - 1 - ja0)
    cropped = table.crop(lo, hi)
    if cropped is None:
        return np.zeros(out_shape)
    t_c, alo = cropped
    f_in = values[ia0:ia1, ja0:ja1]
    s0 = oa0 - ia0 - alo[0]
    s1 = jo0 - ja0 - alo[1]
    return _conv_pair(f_in, t_c, s0, s1, out_shape) * (h * h)


def conv_full(values: np.ndarray, table: KernelTable, h: float) -> np.ndarray:
    """Kernel-table convolution over the whole grid (support-cropped input)."""
    n = values.shape[0]
    supp = _bbox_of_support(values)
    if supp is None:
        return np.zeros_like(values)
    return conv_window(values, table, supp, (0, n, 0, n), h)


# --- operator handles -------------------------------------------------------


@dataclass
class OperatorHandle:
    """A kernel-backed sublinear operator in component form.

    kind: 'singular' | 'maximal_truncation' | 'lacunary' | 'mollified' |
          'lacunary_mollified' | 'difference_sup' | 'commutator'.
    Components are ordered coarse-from-fine (ascending scale); maximal kinds
    take sup_k |sum over components k..end|, linear kinds take the plain sum.
    """

    kind: str
    domain: Domain
    components: list[KernelTable]
    sup_type: bool
    kernel: RoughKernel | None = None
    symbol: GridFunction | None = None  # commutator symbol b
    param: int | None = None

    def prepare(self, f: GridFunction, out_window=None) -> "PreparedOperator":
        return PreparedOperator(self, f, out_window)

    def apply(self, f: GridFunction) -> GridFunction:
        return GridFunction(self.domain, self.prepare(f).full())


def _mask_table(base: KernelTable, h: float, r_lo: float, r_hi: float) -> KernelTable:
    """base restricted to offsets with r_lo <= |z| < r_hi, bbox-cropped."""
    if math.isinf(r_hi):
        radius = base.radius
    else:
        radius = min(int(math.floor(r_hi / h)) + 1, base.radius)
    c = base.radius
    sub = base.values[c - radius : c + radius + 1, c - radius : c + radius + 1]
    o = np.arange(-radius, radius + 1)
    rr = np.hypot(o[:, None], o[None, :]) * h
    vals = np.where((rr >= r_lo) & (rr < r_hi), sub, 0.0)
    return KernelTable(vals, radius)


def handle_singular(kernel: RoughKernel, domain: Domain) -> OperatorHandle:
    return OperatorHandle(
        "singular", domain, [full_kernel_table(kernel, domain)], sup_type=False,
        kernel=kernel,
    )


def _annulus_components(
    kernel: RoughKernel, domain: Domain, grid: TruncationGrid
) -> list[KernelTable]:
    base = full_kernel_table(kernel, domain)
    h = domain.cell_size
    eps = list(grid.epsilons) + [math.inf]
    comps = []
    max_r = math.sqrt(2.0) * (domain.resolution - 1) * h
    for lo, hi in zip(eps[:-1], eps[1:]):
        if lo > max_r:
            break
        comps.append(_mask_table(base, h, lo, min(hi, max_r * 1.0000001)))
    return [c for c in comps if np.any(c.values != 0.0)]


def handle_maximal_truncation(
    kernel: RoughKernel, domain: Domain, grid: TruncationGrid | None = None
) -> OperatorHandle:
    grid = grid or TruncationGrid.for_domain(domain)
    return OperatorHandle(
        "maximal_truncation",
        domain,
        _annulus_components(kernel, domain, grid),
        sup_type=True,
        kernel=kernel,
    )


def handle_lacunary(pieces: list[KernelPiece], domain: Domain) -> OperatorHandle:
    pieces = sorted(pieces, key=lambda p: p.scale_index)
    return OperatorHandle(
        "lacunary", domain, [p.table for p in pieces], sup_type=True
    )


def handle_mollified(
    pieces: list[KernelPiece], moll: Mollifier, l: int, domain: Domain
) -> OperatorHandle:
    return OperatorHandle(
        "mollified", domain, [mollified_kernel(pieces, moll, l, domain)],
        sup_type=False, param=l,
    )


def handle_lacunary_mollified(
    pieces: list[KernelPiece], moll: Mollifier, l: int, domain: Domain
) -> OperatorHandle:
    pieces = sorted(pieces, key=lambda p: p.scale_index)
    comps = [mollified_piece_table(p, moll, l, domain) for p in pieces]
    return OperatorHandle(
        "lacunary_mollified", domain, comps, sup_type=True, param=l
    )


def handle_difference_sup(
    pieces: list[KernelPiece], moll: Mollifier, m: int, domain: Domain
) -> OperatorHandle:
    pieces = sorted(pieces, key=lambda p: p.scale_index)
    comps = difference_kernel(pieces, moll, m, domain)
    return OperatorHandle("difference_sup", domain, comps, sup_type=True, param=m)


def handle_commutator(
    kernel: RoughKernel,
    domain: Domain,
    b: GridFunction,
    grid: TruncationGrid | None = None,
) -> OperatorHandle:
    grid = grid or TruncationGrid.for_domain(domain)
    return OperatorHandle(
        "commutator",
        domain,
        _annulus_components(kernel, domain, grid),
        sup_type=True,
        kernel=kernel,
        symbol=b,
    )


class PreparedOperator:
    """An operator with its component convolutions cached for one input.

    Supports the full evaluation and the masked evaluations
    T(f x_{complement of 3Q}) restricted to a cube window, which only need
    small correction convolutions on top of the cache.
    """

    def __init__(self, handle: OperatorHandle, f: GridFunction, out_window=None):
        self.handle = handle
        self.f = f
        n = handle.domain.resolution
        self.out_window = out_window or (0, n, 0, n)
        self.h = handle.domain.cell_size
        self.supp = _bbox_of_support(f.values)
        self._streams = [f.values]
        if handle.kind == "commutator":
            self._streams = [f.values, handle.symbol.values * f.values]
        self._cache: list[list[np.ndarray]] | None = None

    def _comps_on_out(self) -> list[list[np.ndarray]]:
        if self._cache is None:
            out = self.out_window
            cache = []
            for stream in self._streams:
                supp = _bbox_of_support(stream)
                comps = []
                for table in self.handle.components:
                    if supp is None:
                        comps.append(np.zeros((out[1] - out[0], out[3] - out[2])))
                    else:
                        comps.append(conv_window(stream, table, supp, out, self.h))
                cache.append(comps)
            self._cache = cache
        return self._cache

    def _combine(self, per_stream: list[list[np.ndarray]], out_bounds) -> np.ndarray:
        handle = self.handle
        comps = per_stream[0]
        if not comps:
            i0, i1, j0, j1 = out_bounds
            return np.zeros((i1 - i0, j1 - j0))
        if not handle.sup_type:
            total = np.zeros_like(comps[0])
            for c in comps:
                total = total + c
            return total
        if handle.kind == "commutator":
            i0, i1, j0, j1 = out_bounds
            b_win = handle.symbol.values[i0:i1, j0:j1]
            s1 = np.zeros_like(comps[0])
            s2 = np.zeros_like(comps[0])
            best = np.zeros_like(comps[0])
            for c1, c2 in zip(reversed(comps), reversed(per_stream[1])):
                s1 += c1
                s2 += c2
                np.maximum(best, np.abs(b_win * s1 - s2), out=best)
            return best
        s = np.zeros_like(comps[0])
        best = np.zeros_like(comps[0])
        for c in reversed(comps):
            s += c
            np.maximum(best, np.abs(s), out=best)
        return best

    def full(self) -> np.ndarray:
        return self._combine(self._comps_on_out(), self.out_window)

    def complement_on(self, mask_bounds, out_bounds) -> np.ndarray:
        """T(f x_{complement of the mask window}) on the out window.

        mask_bounds are the cell bounds of 3Q (clipped), out_bounds those of
        Q; out_bounds must lie inside this preparation's out window.
        """
        mi0, mi1, mj0, mj1 = mask_bounds
        oi0, oi1, oj0, oj1 = out_bounds
        out_shape = (oi1 - oi0, oj1 - oj0)
        if self.supp is None:
            return np.zeros(out_shape)
        si0, si1, sj0, sj1 = self.supp
        if mi0 <= si0 and mi1 >= si1 and mj0 <= sj0 and mj1 >= sj1:
            return np.zeros(out_shape)  # mask swallows the whole support

        in_i0, in_i1 = max(mi0, si0), min(mi1, si1)
        in_j0, in_j1 = max(mj0, sj0), min(mj1, sj1)
        mask_area = max(in_i1 - in_i0, 0) * max(in_j1 - in_j0, 0)

        # remainder bbox for the direct route, shrunk along fully covered axes
        ri0, ri1, rj0, rj1 = si0, si1, sj0, sj1
        if mi0 <= si0 and mi1 >= si1:  # i-extent fully masked
            if mj0 <= sj0:
                rj0 = max(rj0, mj1)
            if mj1 >= sj1:
                rj1 = min(rj1, mj0)
        if mj0 <= sj0 and mj1 >= sj1:
            if mi0 <= si0:
                ri0 = max(ri0, mi1)
            if mi1 >= si1:
                ri1 = min(ri1, mi0)
        remainder_area = max(ri1 - ri0, 0) * max(rj1 - rj0, 0)

        per_stream = []
        if mask_area == 0:
            # nothing masked inside the support: restrict the cache
            comps_full = self._comps_on_out()
            w = self.out_window
            for comps in comps_full:
                per_stream.append(
                    [
                        c[oi0 - w[0] : oi1 - w[0], oj0 - w[2] : oj1 - w[2]]
                        for c in comps
                    ]
                )
            return self._combine(per_stream, out_bounds)

        if remainder_area < mask_area:
            # direct route: convolve the complement-masked input
            in_win = (ri0, ri1, rj0, rj1)
            for stream in self._streams:
                masked = stream[ri0:ri1, rj0:rj1].copy()
                ci0, ci1 = max(mi0, ri0) - ri0, min(mi1, ri1) - ri0
                cj0, cj1 = max(mj0, rj0) - rj0, min(mj1, rj1) - rj0
                if ci0 < ci1 and cj0 < cj1:
                    masked[ci0:ci1, cj0:cj1] = 0.0
                comps = []
                for table in self.handle.components:
                    d = conv_window_raw(masked, table, in_win, out_bounds, self.h)
                    comps.append(d)
                per_stream.append(comps)
            return self._combine(per_stream, out_bounds)

        # cached route: subtract the mask-window correction per component
        comps_full = self._comps_on_out()
        w = self.out_window
        in_win = (in_i0, in_i1, in_j0, in_j1)
        for stream, comps in zip(self._streams, comps_full):
            fixed = []
            for table, c in zip(self.handle.components, comps):
                d = conv_window(stream, table, in_win, out_bounds, self.h)
                fixed.append(
                    c[oi0 - w[0] : oi1 - w[0], oj0 - w[2] : oj1 - w[2]] - d
                )
            per_stream.append(fixed)
        return self._combine(per_stream, out_bounds)


def conv_window_raw(
    masked: np.ndarray,
    table: KernelTable,
    in_win: tuple[int, int, int, int],
    out_win: tuple[int, int, int, int],
    h: float,
) -> np.ndarray:
    """conv_window on an already-extracted input window array."""
    ia0, ia1, ja0, ja1 = in_win
    oa0, oa1, jo0, jo1 = out_win
    out_shape = (oa1 - oa0, jo1 - jo0)
    if masked.size == 0:
        return np.zeros(out_shape)
    lo = (oa0 - (ia1 - 1), jo0 - (ja1 - 1))
    hi = (oa1 - 1 - ia0, jo1 - 1 - ja0)
    cropped = table.crop(lo, hi)
    if cropped is None:
        return np.zeros(out_shape)
    t_c, alo = cropped
    s0 = oa0 - ia0 - alo[0]
    s1 = jo0 - ja0 - alo[1]
    return _conv_pair(masked, t_c, s0, s1, out_shape) * (h * h)


# --- spec operator surface --------------------------------------------------


def singular_integral(f: GridFunction, kernel: RoughKernel) -> GridFunction:
    """Principal-value quadrature with the singular cell omitted."""
    table = full_kernel_table(kernel, f.domain)
    return GridFunction(f.domain, conv_full(f.values, table, f.domain.cell_size))


def truncated_integral(f: GridFunction, kernel: RoughKernel, eps: float) -> GridFunction:
    """Quadrature restricted to |x - y| >= eps (closed truncation)."""
    h = f.domain.cell_size
    if eps < h:
        raise ValueError(f"truncation radius {eps:.3g} below cell size {h:.3g}")
    base = full_kernel_table(kernel, f.domain)
    table = _mask_table(base, h, eps, math.inf)
    return GridFunction(f.domain, conv_full(f.values, table, h))


def maximal_truncation(
    f: GridFunction, kernel: RoughKernel, grid: TruncationGrid | None = None
) -> GridFunction:
    return handle_maximal_truncation(kernel, f.domain, grid).apply(f)


def lacunary_maximal(f: GridFunction, pieces: list[KernelPiece]) -> GridFunction:
    return handle_lacunary(pieces, f.domain).apply(f)


def mollified_operator(
    f: GridFunction, pieces: list[KernelPiece], moll: Mollifier, l: int
) -> GridFunction:
    return handle_mollified(pieces, moll, l, f.domain).apply(f)


def lacunary_mollified(
    f: GridFunction, pieces: list[KernelPiece], moll: Mollifier, l: int
) -> GridFunction:
    return handle_lacunary_mollified(pieces, moll, l, f.domain).apply(f)


def difference_sup(
    f: GridFunction, pieces: list[KernelPiece], moll: Mollifier, m: int
) -> GridFunction:
    return handle_difference_sup(pieces, moll, m, f.domain).apply(f)


def commutator_maximal(
    f: GridFunction,
    b: GridFunction,
    kernel: RoughKernel,
    grid: TruncationGrid | None = None,
) -> GridFunction:
    """sup over truncation radii of |b(x) T_eps f(x) - T_eps(b f)(x)|."""
    return handle_commutator(kernel, f.domain, b, grid).apply(f)


def hl_maximal(
    f: GridFunction, lattices: list[DyadicLattice], r: float = 1.0
) -> GridFunction:
    """Dyadic-lattice Hardy-Littlewood maximal function of |f|^r, rooted."""
    if r < 1:
        raise ValueError("need r >= 1")
    absf = np.abs(f.values)
    powf = absf if r == 1.0 else absf ** r
    pref = prefix_sum(powf)
    acc = np.zeros_like(absf)
    for lat in lattices:
        for k in lat.levels():
            tiling = lat.tiling(k)
            means = tiling.cube_sums(pref) / tiling.side_cells ** 2
            mi, mj = tiling.cell_to_cube()
            np.maximum(acc, means[mi[:, None], mj[None, :]], out=acc)
    if r != 1.0:
        acc **= 1.0 / r
    return GridFunction(f.domain, acc)


# --- rearrangement ----------------------------------------------------------


class Rearrangement:
    """Non-increasing rearrangement of a (value, measure) list; right-continuous."""

    def __init__(self, pairs):
        vals = np.array([abs(float(v)) for v, _ in pairs])
        meas = np.array([float(m) for _, m in pairs])
        if np.any(meas <= 0):
            raise ValueError("measures must be positive")
        order = np.argsort(-vals, kind="stable")
        self.values = vals[order]
        self.cum_measure = np.cumsum(meas[order])

    @property
    def total_measure(self) -> float:
        return float(self.cum_measure[-1]) if self.cum_measure.size else 0.0

    def __call__(self, t: float) -> float:
        if t < 0:
            raise ValueError("rearrangement argument must be >= 0")
        k = int(np.searchsorted(self.cum_measure, t, side="right"))
        if k >= self.values.size:
            return 0.0
        return float(self.values[k])


def rearrangement(pairs) -> Rearrangement:
    return Rearrangement(pairs)


def rearrangement_value(values: np.ndarray, lam: float) -> float:
    """(g x_Q)^*(lam |Q|) for cell samples: the ceil((1-lam) n)-th smallest |g|."""
    flat = np.abs(np.asarray(values)).ravel()
    n = flat.size
    k = min(max(int(math.ceil((1.0 - lam) * n)), 1), n)
    return float(np.partition(flat, k - 1)[k - 1])


# --- localized maximal functions --------------------------------------------


def localization_tilings(domain: Domain, lattices: list[DyadicLattice]):
    """Tilings used for the masked sups: sides >= LOCALIZATION_MIN_SIDE cells."""
    for lat in lattices:
        for k in lat.levels():
            if lat.side_cells(k) < LOCALIZATION_MIN_SIDE:
                continue
            yield lat.tiling(k)


def _masked_cube_scan(
    f: GridFunction,
    T: OperatorHandle,
    lattices: list[DyadicLattice],
    fold,
    max_side_cells: int | None = None,
    prep: PreparedOperator | None = None,
) -> np.ndarray:
    """max over fully-inside cubes Q of fold(T(f x outside 3Q) on Q) * chi_Q."""
    n = f.domain.resolution
    prep = prep or T.prepare(f)
    acc = np.zeros((n, n))
    for tiling in localization_tilings(f.domain, lattices):
        s = tiling.side_cells
        if max_side_cells is not None and s > max_side_cells:
            continue
        cx, cy = tiling.axis_corners()
        inside = tiling.fully_inside()
        for a in np.flatnonzero((cx >= 0) & (cx + s <= n)):
            for b_idx in np.flatnonzero((cy >= 0) & (cy + s <= n)):
                if not inside[a, b_idx]:
                    continue
                i0, j0 = int(cx[a]), int(cy[b_idx])
                out_b = (i0, i0 + s, j0, j0 + s)
                mask_b = (
                    max(i0 - s, 0),
                    min(i0 + 2 * s, n),
                    max(j0 - s, 0),
                    min(j0 + 2 * s, n),
                )
                u = prep.complement_on(mask_b, out_b)
                v = fold(u)
                if v > 0.0:
                    region = acc[i0 : i0 + s, j0 : j0 + s]
                    np.maximum(region, v, out=region)
    return acc


def grand_maximal(
    f: GridFunction,
    lam: float,
    T: OperatorHandle,
    lattices: list[DyadicLattice],
    max_side_cells: int | None = None,
) -> GridFunction:
    """Rearrangement-at-lam|Q| grand maximal function of the localized operator."""
    if not 0.0 < lam < 1.0:
        raise ValueError("lam must lie in (0, 1)")
    fold = lambda u: rearrangement_value(u, lam)
    vals = _masked_cube_scan(f, T, lattices, fold, max_side_cells)
    return GridFunction(f.domain, vals)


def sharp_maximal(
    f: GridFunction,
    p: float,
    T: OperatorHandle,
    lattices: list[DyadicLattice],
    max_side_cells: int | None = None,
) -> GridFunction:
    """L^p-average sharp maximal function of the localized operator (p=inf: sup)."""
    if p != math.inf and p <= 0:
        raise ValueError("p must be positive or inf")
    if p == math.inf:
        fold = lambda u: float(np.max(np.abs(u)))
    else:
        fold = lambda u: float(np.mean(np.abs(u) ** p) ** (1.0 / p))
    vals = _masked_cube_scan(f, T, lattices, fold, max_side_cells)
    return GridFunction(f.domain, vals)


def bmo_seminorm(b: GridFunction, lattices: list[DyadicLattice]) -> float:
    """max over lattice cubes of the mean oscillation <|b - <b>_Q|>_Q."""
    vals = b.values
    best = 0.0
    pref = prefix_sum(vals)
    for lat in lattices:
        for k in lat.levels():
            tiling = lat.tiling(k)
            counts = tiling.inside_counts()
            ok = counts > 0
            means = np.zeros(counts.shape)
            means[ok] = tiling.cube_sums(pref)[ok] / counts[ok]
            mi, mj = tiling.cell_to_cube()
            osc = np.abs(vals - means[mi[:, None], mj[None, :]])
            sums = tiling.cube_sums(prefix_sum(osc))
            with np.errstate(invalid="ignore"):
                ratio = np.where(ok, sums / np.maximum(counts, 1), 0.0)
            best = max(best, float(ratio.max()))
    return best
