"""Axis-parallel cubes, shifted dyadic lattices, and eta-sparse families.

Lattices are truncated to cell-aligned scales between one cell and twice the
box side.  The shifted lattices alternate their offset sign between
consecutive levels; this is what makes every lattice simultaneously nested
and able to supply, for every dyadic cube Q, a unique containing cube of
side 3*l(Q).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grid import Domain

__all__ = [
    "Cube",
    "DyadicLattice",
    "ScaleTiling",
    "three_lattice_cover",
    "standard_lattices",
    "cubes_containing",
    "SparseFamily",
    "SparseReport",
    "verify_sparse",
    "prefix_sum",
]


@dataclass(frozen=True)
class Cube:
    """Half-open axis-parallel cube [x0, x0+side) x [y0, y0+side)."""

    lower_corner: tuple[float, float]
    side: float

    def __post_init__(self):
        if self.side <= 0:
            raise ValueError(f"cube side must be positive, got {self.side}")

    @property
    def center(self) -> tuple[float, float]:
        x0, y0 = self.lower_corner
        return (x0 + self.side / 2.0, y0 + self.side / 2.0)

    def dilate(self, lam: float) -> "Cube":
        """Cube with the same center and side lam * side."""
        cx, cy = self.center
        s = lam * self.side
        return Cube((cx - s / 2.0, cy - s / 2.0), s)

    def contains_point(self, x: float, y: float) -> bool:
        x0, y0 = self.lower_corner
        return x0 <= x < x0 + self.side and y0 <= y < y0 + self.side

    def contains_cube(self, other: "Cube") -> bool:
        x0, y0 = self.lower_corner
        u0, v0 = other.lower_corner
        eps = 1e-9 * self.side
        return (
            x0 <= u0 + eps
            and y0 <= v0 + eps
            and u0 + other.side <= x0 + self.side + eps
            and v0 + other.side <= y0 + self.side + eps
        )

    def cell_bounds(self, domain: Domain) -> tuple[int, int, int, int]:
        """(i0, i1, j0, j1) cell index bounds, clipped to the domain.

        A cell belongs to the cube when its center does; for cell-aligned
        cubes this is the exact half-open cell range.
        """
        h = domain.cell_size
        L = domain.half_width
        n = domain.resolution
        x0, y0 = self.lower_corner
        i0 = int(np.ceil((x0 + L) / h - 0.5 - 1e-9))
        j0 = int(np.ceil((y0 + L) / h - 0.5 - 1e-9))
        i1 = int(np.floor((x0 + self.side + L) / h - 0.5 + 1e-9)) + 1
        j1 = int(np.floor((y0 + self.side + L) / h - 0.5 + 1e-9)) + 1
        return (max(i0, 0), min(i1, n), max(j0, 0), min(j1, n))

    def cell_count(self, domain: Domain) -> int:
        """Total number of cells of the full cube (not clipped)."""
        return int(round(self.side / domain.cell_size)) ** 2


def cube_from_cells(domain: Domain, ix: int, iy: int, side_cells: int) -> Cube:
    h = domain.cell_size
    L = domain.half_width
    return Cube((-L + ix * h, -L + iy * h), side_cells * h)


@dataclass(frozen=True)
class ScaleTiling:
    """One scale of a lattice: a full tiling of the plane by congruent cubes.

    Cube (mx, my) covers cells [ox + mx*s, ox + (mx+1)*s) x [...] where s is
    the side in cells and (ox, oy) the level's corner offset.  Only cubes
    meeting the domain are enumerated; m-indices are stored relative to
    (m_lo_x, m_lo_y).
    """

    domain: Domain
    side_cells: int
    ox: int
    oy: int

    def _axis_range(self, o: int) -> tuple[int, int]:
        n = self.domain.resolution
        s = self.side_cells
        m_lo = (0 - o) // s
        m_hi = (n - 1 - o) // s
        return m_lo, m_hi

    def grid_shape(self) -> tuple[int, int]:
        mlx, mhx = self._axis_range(self.ox)
        mly, mhy = self._axis_range(self.oy)
        return (mhx - mlx + 1, mhy - mly + 1)

    def axis_corners(self) -> tuple[np.ndarray, np.ndarray]:
        """Cell coordinates of cube lower corners along each axis (unclipped)."""
        s = self.side_cells
        mlx, mhx = self._axis_range(self.ox)
        mly, mhy = self._axis_range(self.oy)
        cx = self.ox + s * np.arange(mlx, mhx + 1)
        cy = self.oy + s * np.arange(mly, mhy + 1)
        return cx, cy

    def cell_to_cube(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-axis maps from cell index to cube array index."""
        n = self.domain.resolution
        s = self.side_cells
        mlx, _ = self._axis_range(self.ox)
        mly, _ = self._axis_range(self.oy)
        i = np.arange(n)
        mi = (i - self.ox) // s - mlx
        mj = (i - self.oy) // s - mly
        return mi, mj

    def cube_sums(self, values: np.ndarray) -> np.ndarray:
        """Sum of the array over each cube, clipped to the domain.

        Uses per-segment reduction (the tiles partition each axis), so small
        cube sums never suffer prefix-difference cancellation.
        """
        n = self.domain.resolution
        cx, cy = self.axis_corners()
        ax = np.clip(cx, 0, n - 1)
        ay = np.clip(cy, 0, n - 1)
        rows = np.add.reduceat(values, ax, axis=0)
        return np.add.reduceat(rows, ay, axis=1)

    def inside_counts(self) -> np.ndarray:
        """Number of in-domain cells per cube."""
        n = self.domain.resolution
        s = self.side_cells
        cx, cy = self.axis_corners()
        wx = np.clip(cx + s, 0, n) - np.clip(cx, 0, n)
        wy = np.clip(cy + s, 0, n) - np.clip(cy, 0, n)
        return wx[:, None] * wy[None, :]

    def fully_inside(self) -> np.ndarray:
        """Mask of cubes entirely inside the domain box."""
        n = self.domain.resolution
        s = self.side_cells
        cx, cy = self.axis_corners()
        okx = (cx >= 0) & (cx + s <= n)
        oky = (cy >= 0) & (cy + s <= n)
        return okx[:, None] & oky[None, :]

    def cubes(self, only_inside: bool = False):
        """Iterate Cube objects (optionally only those fully inside)."""
        s = self.side_cells
        cx, cy = self.axis_corners()
        inside = self.fully_inside()
        for a in range(len(cx)):
            for b in range(len(cy)):
                if only_inside and not inside[a, b]:
                    continue
                yield cube_from_cells(self.domain, int(cx[a]), int(cy[b]), s)


@dataclass(frozen=True)
class DyadicLattice:
    """Truncated dyadic lattice of cell-aligned cubes.

    Level k holds cubes of side base_cells * 2^k cells.  Shifted lattices
    offset level-k corners by (-1)^k * shift * 2^k * shift_scale cells per
    axis, which keeps consecutive levels nested while cycling the corner
    residues mod 3 through all classes.
    """

    domain: Domain
    base_cells: int = 1
    shift: tuple[int, int] = (0, 0)
    shift_scale: int = 1
    alternating: bool = False

    def __post_init__(self):
        if self.base_cells < 1:
            raise ValueError("base_cells must be >= 1")

    @property
    def base_scale(self) -> float:
        return self.base_cells * self.domain.cell_size

    @property
    def origin_shift(self) -> tuple[float, float]:
        """Level-0 corner offset as a physical point relative to the box corner."""
        ox, oy = self.level_offset(0)
        h = self.domain.cell_size
        return (ox * h, oy * h)

    def levels(self) -> list[int]:
        out = []
        k = 0
        max_side = 2 * self.domain.resolution
        while self.base_cells * (1 << k) <= max_side:
            out.append(k)
            k += 1
        return out

    def side_cells(self, k: int) -> int:
        return self.base_cells << k

    def level_offset(self, k: int) -> tuple[int, int]:
        if not self.alternating:
            return (0, 0)
        sgn = -1 if (k % 2) else 1
        u = sgn * (1 << k) * self.shift_scale
        return (self.shift[0] * u, self.shift[1] * u)

    def tiling(self, k: int) -> ScaleTiling:
        ox, oy = self.level_offset(k)
        return ScaleTiling(self.domain, self.side_cells(k), ox, oy)

    def cube_at(self, k: int, x: float, y: float) -> Cube:
        """The unique level-k cube containing the point (x, y)."""
        h = self.domain.cell_size
        L = self.domain.half_width
        s = self.side_cells(k)
        ox, oy = self.level_offset(k)
        ci = (x + L) / h - ox
        cj = (y + L) / h - oy
        mx = int(np.floor(ci / s))
        my = int(np.floor(cj / s))
        return cube_from_cells(self.domain, ox + mx * s, oy + my * s, s)

    def children(self, cube: Cube) -> list[Cube]:
        """The four lattice children of a lattice cube (exact partition)."""
        h = self.domain.cell_size
        s_cells = int(round(cube.side / h))
        if s_cells % 2 or s_cells < 2 * self.base_cells:
            raise ValueError("cube has no lattice children at this truncation")
        half = s_cells // 2
        L = self.domain.half_width
        ix = int(round((cube.lower_corner[0] + L) / h))
        iy = int(round((cube.lower_corner[1] + L) / h))
        return [
            cube_from_cells(self.domain, ix + a * half, iy + b * half, half)
            for a in (0, 1)
            for b in (0, 1)
        ]


def three_lattice_cover(D: DyadicLattice) -> list[DyadicLattice]:
    """The 3^d = 9 shifted lattices covering all 3-dilates of D's cubes.

    Each returned lattice contains, for every cube Q of D within range, a
    unique cube of side 3*l(Q) containing Q, and every 3Q belongs to exactly
    one of them.
    """
    return [
        DyadicLattice(
            D.domain,
            base_cells=3 * D.base_cells,
            shift=(sx, sy),
            shift_scale=D.base_cells,
            alternating=True,
        )
        for sx in (0, 1, 2)
        for sy in (0, 1, 2)
    ]


def standard_lattices(domain: Domain) -> list[DyadicLattice]:
    """The base lattice together with its three-lattice cover (10 lattices).

    This is the cube family behind every discrete 'sup over all cubes'.
    """
    base = DyadicLattice(domain)
    return [base] + three_lattice_cover(base)


def cubes_containing(x: tuple[float, float], D: DyadicLattice):
    """Yield the unique lattice cube containing x at each scale, coarse to fine."""
    px, py = x
    L = D.domain.half_width
    if not (-L <= px < L and -L <= py < L):
        raise ValueError("point outside the domain box")
    for k in reversed(D.levels()):
        yield D.cube_at(k, px, py)


def prefix_sum(values: np.ndarray) -> np.ndarray:
    """(N+1, N+1) inclusive 2-D prefix sums with a zero border."""
    n0, n1 = values.shape
    out = np.zeros((n0 + 1, n1 + 1))
    np.cumsum(values, axis=0, out=out[1:, 1:])
    np.cumsum(out[1:, 1:], axis=1, out=out[1:, 1:])
    return out


# --- sparse families -------------------------------------------------------


@dataclass
class SparseFamily:
    """Cubes with pairwise-disjoint witness cell sets of density >= eta."""

    domain: Domain
    cubes: list[Cube]
    witnesses: list[np.ndarray] = field(repr=False)  # flat cell indices, sorted
    eta: float = 0.5

    def __post_init__(self):
        if not 0 < self.eta < 1:
            raise ValueError("eta must lie in (0, 1)")
        if len(self.cubes) != len(self.witnesses):
            raise ValueError("cubes and witnesses must be parallel lists")

    def witness_mask(self, idx: int) -> np.ndarray:
        n = self.domain.resolution
        mask = np.zeros(n * n, dtype=bool)
        mask[self.witnesses[idx]] = True
        return mask.reshape(n, n)


@dataclass(frozen=True)
class SparseReport:
    ok: bool
    worst_ratio: float
    overlap_count: int


def verify_sparse(S: SparseFamily) -> SparseReport:
    """Independent re-check of the sparse-family invariants.

    Disjointness is cell-exact; the density ratio uses full cube cell counts.
    """
    all_idx = (
        np.concatenate(S.witnesses)
        if S.witnesses
        else np.empty(0, dtype=np.int64)
    )
    overlap = int(all_idx.size - np.unique(all_idx).size)
    worst = 1.0
    for cube, wit in zip(S.cubes, S.witnesses):
        total = cube.cell_count(S.domain)
        ratio = wit.size / total
        worst = min(worst, ratio)
    ok = overlap == 0 and worst >= S.eta - 1e-12
    return SparseReport(ok=ok, worst_ratio=worst, overlap_count=overlap)


def _rle_encode(idx: np.ndarray) -> list[list[int]]:
    if idx.size == 0:
        return []
    idx = np.sort(idx)
    breaks = np.flatnonzero(np.diff(idx) != 1)
    starts = np.concatenate(([0], breaks + 1))
    ends = np.concatenate((breaks, [idx.size - 1]))
    return [[int(idx[s]), int(idx[e] - idx[s] + 1)] for s, e in zip(starts, ends)]


def _rle_decode(runs: list[list[int]]) -> np.ndarray:
    if not runs:
        return np.empty(0, dtype=np.int64)
    return np.concatenate([np.arange(s, s + ln, dtype=np.int64) for s, ln in runs])


def save_sparse_family(S: SparseFamily, path: str | Path):
    payload = {
        "eta": S.eta,
        "half_width": S.domain.half_width,
        "resolution": S.domain.resolution,
        "cubes": [
            {
                "lower_corner": list(c.lower_corner),
                "side": c.side,
                "witness_cell_count": int(w.size),
                "witness_rle": _rle_encode(w),
            }
            for c, w in zip(S.cubes, S.witnesses)
        ],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True)
        fh.write("\n")


def load_sparse_family(path: str | Path) -> SparseFamily:
    with open(path) as fh:
        payload = json.load(fh)
    domain = Domain(payload["half_width"], payload["resolution"])
    cubes, wits = [], []
    for entry in payload["cubes"]:
        cubes.append(Cube(tuple(entry["lower_corner"]), entry["side"]))
        w = _rle_decode(entry["witness_rle"])
        if w.size != entry["witness_cell_count"]:
            raise ValueError("witness RLE does not match recorded cell count")
        wits.append(w)
    return SparseFamily(domain, cubes, wits, eta=payload["eta"])
