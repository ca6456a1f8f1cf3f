"""Uniform cell-centered grid on the box [-L, L)^2.

Functions are real-valued samples at cell centers, treated as compactly
supported: identically zero outside the box.  All reductions that feed
1e-10-level assertions go through compensated summation.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "Domain",
    "GridFunction",
    "integrate",
    "lp_norm",
    "superlevel_measure",
    "save_grid_function",
    "load_grid_function",
]


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Domain:
    """Box [-half_width, half_width)^2 sampled on an N x N cell-centered grid."""

    half_width: float
    resolution: int

    def __post_init__(self):
        if self.half_width <= 0:
            raise ValueError(f"half_width must be positive, got {self.half_width}")
        if self.resolution < 16 or not _is_power_of_two(self.resolution):
            raise ValueError(
                f"resolution must be a power of two >= 16, got {self.resolution}"
            )

    @property
    def cell_size(self) -> float:
        return 2.0 * self.half_width / self.resolution

    @property
    def cell_area(self) -> float:
        return self.cell_size ** 2

    @property
    def diameter(self) -> float:
        return 2.0 * math.sqrt(2.0) * self.half_width

    def axis_centers(self) -> np.ndarray:
        """Cell-center coordinates along one axis."""
        h = self.cell_size
        return -self.half_width + h * (np.arange(self.resolution) + 0.5)

    def meshgrid(self) -> tuple[np.ndarray, np.ndarray]:
        """(X, Y) cell-center coordinate arrays, index order [i, j] = [x, y]."""
        c = self.axis_centers()
        return np.meshgrid(c, c, indexing="ij")


class GridFunction:
    """Immutable samples of a function on a Domain."""

    __slots__ = ("domain", "_values")

    def __init__(self, domain: Domain, values: np.ndarray):
        values = np.asarray(values, dtype=np.float64)
        n = domain.resolution
        if values.shape != (n, n):
            raise ValueError(f"values must have shape {(n, n)}, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("values must be finite")
        values = values.copy()
        values.flags.writeable = False
        self.domain = domain
        self._values = values

    @property
    def values(self) -> np.ndarray:
        return self._values

    @staticmethod
    def zeros(domain: Domain) -> "GridFunction":
        return GridFunction(domain, np.zeros((domain.resolution,) * 2))

    @staticmethod
    def from_callable(domain: Domain, fn) -> "GridFunction":
        X, Y = domain.meshgrid()
        return GridFunction(domain, fn(X, Y))

    def _check_same_domain(self, other: "GridFunction"):
        if self.domain != other.domain:
            raise ValueError("grid functions live on different domains")

    def __add__(self, other: "GridFunction") -> "GridFunction":
        self._check_same_domain(other)
        return GridFunction(self.domain, self._values + other._values)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        self._check_same_domain(other)
        return GridFunction(self.domain, self._values - other._values)

    def __mul__(self, c) -> "GridFunction":
        if isinstance(c, GridFunction):
            self._check_same_domain(c)
            return GridFunction(self.domain, self._values * c._values)
        return GridFunction(self.domain, self._values * float(c))

    __rmul__ = __mul__

    def __abs__(self) -> "GridFunction":
        return GridFunction(self.domain, np.abs(self._values))

    def max_abs(self) -> float:
        return float(np.max(np.abs(self._values)))


def ksum(values: np.ndarray) -> float:
    """Compensated sum of an array (exact to one ulp of the result)."""
    return math.fsum(np.asarray(values, dtype=np.float64).ravel())


def integrate(f: GridFunction) -> float:
    """Cell quadrature h^2 * sum of samples."""
    return f.domain.cell_area * ksum(f.values)


def lp_norm(f: GridFunction, p: float) -> float:
    """L^p norm by cell quadrature; p = inf gives the sample sup."""
    if p == math.inf or p == np.inf:
        return f.max_abs()
    p = float(p)
    if p < 1:
        raise ValueError(f"p must be >= 1 or inf, got {p}")
    total = ksum(np.abs(f.values) ** p)
    return (f.domain.cell_area * total) ** (1.0 / p)


def superlevel_measure(f: GridFunction, alpha: float, weight: "GridFunction | None" = None) -> float:
    """Measure of {|f| > alpha}; with a weight, the weighted measure of the set."""
    mask = np.abs(f.values) > alpha
    if weight is None:
        return f.domain.cell_area * int(np.count_nonzero(mask))
    f._check_same_domain(weight)
    if not np.any(mask):
        return 0.0
    return f.domain.cell_area * ksum(weight.values[mask])


def save_grid_function(f: GridFunction, csv_path: str | Path):
    """Write row-major `i,j,value` CSV plus a JSON header sidecar.

    Values use repr() (17 significant digits), so load round-trips bit-exactly.
    """
    csv_path = Path(csv_path)
    n = f.domain.resolution
    with open(csv_path, "w") as fh:
        vals = f.values
        for i in range(n):
            row = vals[i]
            for j in range(n):
                fh.write(f"{i},{j},{row[j]!r}\n")
    sidecar = csv_path.with_suffix(".json")
    with open(sidecar, "w") as fh:
        json.dump(
            {"half_width": f.domain.half_width, "resolution": f.domain.resolution},
            fh,
            sort_keys=True,
        )
        fh.write("\n")


def load_grid_function(csv_path: str | Path) -> GridFunction:
    csv_path = Path(csv_path)
    with open(csv_path.with_suffix(".json")) as fh:
        header = json.load(fh)
    domain = Domain(half_width=float(header["half_width"]), resolution=int(header["resolution"]))
    n = domain.resolution
    values = np.empty((n, n))
    seen = 0
    with open(csv_path) as fh:
        for line in fh:
            i_s, j_s, v_s = line.rstrip("\n").split(",")
            values[int(i_s), int(j_s)] = float(v_s)
            seen += 1
    if seen != n * n:
        raise ValueError(f"expected {n * n} samples, found {seen}")
    return GridFunction(domain, values)
