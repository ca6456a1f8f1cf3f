"""Rough angular kernels and their smooth dyadic decomposition.

The convolution kernel is Omega(z/|z|) / |z|^2 with Omega bounded and
mean-zero on the circle.  Everything kernel-valued is tabulated on the
difference grid: offsets o in [-R, R]^2, physical z = o*h, stored as
(2R+1, 2R+1) arrays with the origin at index (R, R).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.integrate import quad
from scipy.signal import convolve2d

from .grid import Domain

__all__ = [
    "ScaleRangeError",
    "RoughKernel",
    "PartitionBump",
    "Mollifier",
    "KernelTable",
    "KernelPiece",
    "evaluate_omega",
    "resolvable_scales",
    "build_kernel_piece",
    "build_all_pieces",
    "mollified_piece_table",
    "mollified_kernel",
    "difference_kernel",
    "full_kernel_table",
]


class ScaleRangeError(ValueError):
    """A dyadic scale fell below the grid's resolvable range."""


# --- angular part -----------------------------------------------------------


class RoughKernel:
    """Bounded angular profile on the circle, sampled at M equispaced angles.

    The sample mean is subtracted at construction, so the discrete profile
    always has mean value zero.
    """

    __slots__ = ("angular_samples", "sup_norm")

    def __init__(self, angular_samples):
        samples = np.asarray(angular_samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size < 8:
            raise ValueError("need a 1-D array of at least 8 angular samples")
        if not np.all(np.isfinite(samples)):
            raise ValueError("angular samples must be finite")
        samples = samples - math.fsum(samples) / samples.size
        samples.flags.writeable = False
        self.angular_samples = samples
        self.sup_norm = float(np.max(np.abs(samples))) if samples.size else 0.0

    @property
    def resolution(self) -> int:
        return self.angular_samples.size

    def at_angle(self, theta: np.ndarray) -> np.ndarray:
        """Linear interpolation between adjacent angular samples."""
        m = self.resolution
        pos = np.asarray(theta, dtype=np.float64) * (m / (2.0 * math.pi))
        k0 = np.floor(pos).astype(np.int64)
        frac = pos - k0
        s = self.angular_samples
        return s[k0 % m] * (1.0 - frac) + s[(k0 + 1) % m] * frac

    @staticmethod
    def preset(name: str, resolution: int = 512) -> "RoughKernel":
        theta = 2.0 * math.pi * np.arange(resolution) / resolution
        if name == "cos":
            vals = np.cos(theta)
        elif name == "sin":
            vals = np.sin(theta)
        elif name == "cos2":
            vals = np.cos(2.0 * theta)
        elif name == "sign4":
            if resolution % 4:
                raise ValueError("sign4 needs a resolution divisible by 4")
            quadrant = np.floor(theta / (math.pi / 2.0)).astype(int) % 4
            vals = np.where(quadrant % 2 == 0, 1.0, -1.0)
        else:
            raise ValueError(f"unknown kernel preset {name!r}")
        return RoughKernel(vals)

    @staticmethod
    def from_json(path_or_dict) -> "RoughKernel":
        if isinstance(path_or_dict, (str, Path)):
            with open(path_or_dict) as fh:
                payload = json.load(fh)
        else:
            payload = path_or_dict
        if "preset" in payload:
            return RoughKernel.preset(
                payload["preset"], resolution=int(payload.get("angles", 512))
            )
        values = payload["values"]
        if "angles" in payload and int(payload["angles"]) != len(values):
            raise ValueError("angles field disagrees with values length")
        return RoughKernel(values)


def evaluate_omega(kernel: RoughKernel, direction) -> float:
    """Profile value in a given direction (normalized internally)."""
    dx, dy = float(direction[0]), float(direction[1])
    if dx == 0.0 and dy == 0.0:
        raise ValueError("direction must be nonzero")
    theta = math.atan2(dy, dx) % (2.0 * math.pi)
    return float(kernel.at_angle(np.array([theta]))[0])


# --- smooth bumps -----------------------------------------------------------


def _bump(u: np.ndarray) -> np.ndarray:
    """exp(-1/u) for u > 0, zero otherwise (infinitely smooth glue)."""
    u = np.asarray(u, dtype=np.float64)
    out = np.zeros_like(u)
    pos = u > 0
    with np.errstate(over="ignore"):
        out[pos] = np.exp(-1.0 / u[pos])
    return out


def smooth_step(u) -> np.ndarray:
    """0 for u <= 0, 1 for u >= 1, smooth and monotone in between."""
    u = np.atleast_1d(np.asarray(u, dtype=np.float64))
    a = _bump(u)
    b = _bump(1.0 - u)
    out = np.where(u >= 1.0, 1.0, np.where(u <= 0.0, 0.0, a / np.where(a + b > 0, a + b, 1.0)))
    return out


class PartitionBump:
    """Annular bump eta(x) = Theta(|x|) - Theta(2|x|) built from a smooth step.

    Theta = 1 on [0, 1], 0 on [2, inf), so supp eta = {1/2 <= |x| <= 2} and
    the dyadic rescalings eta(2^-j x) telescope to exactly 1.
    """

    def outer_profile(self, t) -> np.ndarray:
        return smooth_step(2.0 - np.asarray(t, dtype=np.float64))

    def eta(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=np.float64)
        return self.outer_profile(r) - self.outer_profile(2.0 * r)

    def eta_scaled(self, r, j: int) -> np.ndarray:
        """eta(2^-j x) as a function of the radius |x|."""
        return self.eta(np.asarray(r, dtype=np.float64) * 2.0 ** (-j))


class Mollifier:
    """Radial smooth bump with unit mass supported in {|x| <= 1/4}."""

    def __init__(self):
        mass, _ = quad(lambda r: math.exp(-1.0 / (1.0 - (4.0 * r) ** 2)) * r, 0.0, 0.25)
        self.normalization = 1.0 / (2.0 * math.pi * mass)
        self.delta = False

    @staticmethod
    def dirac() -> "Mollifier":
        """Degenerate test mollifier: convolution becomes the identity."""
        m = Mollifier.__new__(Mollifier)
        m.normalization = math.nan
        m.delta = True
        return m

    def profile(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=np.float64)
        out = np.zeros_like(r)
        inside = np.abs(r) < 0.25
        x = 4.0 * r[inside]
        out[inside] = self.normalization * np.exp(-1.0 / (1.0 - x * x))
        return out

    def stencil(self, scale: float, h: float) -> np.ndarray:
        """Discrete weights of the rescaled mollifier at cell offsets.

        Weights absorb the h^2 quadrature factor and are renormalized to sum
        exactly to one, so convolving a kernel table with the stencil
        preserves its discrete integral.
        """
        if self.delta:
            return np.ones((1, 1))
        if scale < h:
            raise ScaleRangeError(
                f"mollifier scale {scale:.3g} below cell size {h:.3g}"
            )
        radius = int(math.floor(scale / 4.0 / h))
        if radius == 0:
            return np.ones((1, 1))
        o = np.arange(-radius, radius + 1)
        rr = np.hypot(o[:, None], o[None, :]) * h / scale
        w = self.profile(rr)
        total = w.sum()
        if total <= 0:
            return np.ones((1, 1))
        return w / total


# --- kernel tables ----------------------------------------------------------


@dataclass(frozen=True)
class KernelTable:
    """Kernel values on the difference grid, origin at index (radius, radius)."""

    values: np.ndarray
    radius: int

    def __post_init__(self):
        r = self.radius
        if self.values.shape != (2 * r + 1, 2 * r + 1):
            raise ValueError("table shape disagrees with radius")

    def crop(self, lo: tuple[int, int], hi: tuple[int, int]) -> "np.ndarray | None":
        """Values over offsets [lo, hi] per axis, or None if out of range."""
        r = self.radius
        alo = (max(lo[0], -r), max(lo[1], -r))
        ahi = (min(hi[0], r), min(hi[1], r))
        if alo[0] > ahi[0] or alo[1] > ahi[1]:
            return None
        return (
            self.values[alo[0] + r : ahi[0] + r + 1, alo[1] + r : ahi[1] + r + 1],
            alo,
        )

    def discrete_integral(self, h: float) -> float:
        return h * h * math.fsum(self.values.ravel())

    def l1_norm(self, h: float) -> float:
        return h * h * math.fsum(np.abs(self.values).ravel())


def _offset_radii(radius: int, h: float) -> np.ndarray:
    o = np.arange(-radius, radius + 1)
    return np.hypot(o[:, None], o[None, :]) * h


def _offset_angles(radius: int) -> np.ndarray:
    o = np.arange(-radius, radius + 1).astype(np.float64)
    theta = np.arctan2(o[None, :], o[:, None])
    return np.mod(theta, 2.0 * math.pi)


def full_kernel_table(kernel: RoughKernel, domain: Domain) -> KernelTable:
    """Omega(z')/|z|^2 at every nonzero grid offset (singular cell zeroed)."""
    radius = domain.resolution - 1
    h = domain.cell_size
    rr = _offset_radii(radius, h)
    rr[radius, radius] = 1.0
    vals = kernel.at_angle(_offset_angles(radius)) / (rr * rr)
    vals[radius, radius] = 0.0
    return KernelTable(vals, radius)


@dataclass(frozen=True)
class KernelPiece:
    """One annular piece: Omega(z')/|z|^2 * eta(2^-j z), tabulated."""

    scale_index: int
    table: KernelTable

    @property
    def scale(self) -> float:
        return 2.0 ** self.scale_index


def resolvable_scales(domain: Domain) -> list[int]:
    """Scale indices j whose annulus {2^(j-1) <= |z| <= 2^(j+1)} is on-grid."""
    h = domain.cell_size
    max_r = math.sqrt(2.0) * (domain.resolution - 1) * h
    j_min = math.ceil(math.log2(2.0 * h))
    out = []
    j = j_min
    while 2.0 ** (j - 1) <= max_r:
        out.append(j)
        j += 1
    return out


def build_kernel_piece(
    kernel: RoughKernel, bump: PartitionBump, j: int, domain: Domain
) -> KernelPiece:
    h = domain.cell_size
    if 2.0 ** (j - 1) < h:
        raise ScaleRangeError(
            f"annulus scale 2^{j - 1} = {2.0 ** (j - 1):.3g} below cell size {h:.3g}"
        )
    max_r = math.sqrt(2.0) * (domain.resolution - 1) * h
    if 2.0 ** (j - 1) > max_r:
        raise ScaleRangeError(f"annulus scale 2^{j - 1} beyond the difference grid")
    radius = min(int(math.floor(2.0 ** (j + 1) / h)) + 1, domain.resolution - 1)
    rr = _offset_radii(radius, h)
    safe = rr.copy()
    c = radius
    safe[c, c] = 1.0
    vals = kernel.at_angle(_offset_angles(radius)) / (safe * safe)
    vals *= bump.eta_scaled(rr, j)
    vals[c, c] = 0.0
    return KernelPiece(scale_index=j, table=KernelTable(vals, radius))


def build_all_pieces(
    kernel: RoughKernel, bump: PartitionBump, domain: Domain, scales=None
) -> list[KernelPiece]:
    if scales is None:
        scales = resolvable_scales(domain)
    return [build_kernel_piece(kernel, bump, j, domain) for j in scales]


def mollified_piece_table(
    piece: KernelPiece, moll: Mollifier, l: int, domain: Domain
) -> KernelTable:
    """K_j convolved with the mollifier at scale 2^(j-l), as a table."""
    h = domain.cell_size
    scale = 2.0 ** (piece.scale_index - l)
    if not moll.delta and scale < h:
        raise ScaleRangeError(
            f"mollification scale 2^{piece.scale_index - l} below cell size"
        )
    w = moll.stencil(scale, h) if not moll.delta else np.ones((1, 1))
    if w.shape == (1, 1):
        return KernelTable(piece.table.values * w[0, 0], piece.table.radius)
    vals = convolve2d(piece.table.values, w, mode="full")
    return KernelTable(vals, piece.table.radius + (w.shape[0] - 1) // 2)


def _sum_tables(tables: list[KernelTable]) -> KernelTable:
    radius = max(t.radius for t in tables)
    vals = np.zeros((2 * radius + 1, 2 * radius + 1))
    for t in tables:
        d = radius - t.radius
        vals[d : d + 2 * t.radius + 1, d : d + 2 * t.radius + 1] += t.values
    return KernelTable(vals, radius)


def mollified_kernel(
    pieces: list[KernelPiece], moll: Mollifier, l: int, domain: Domain
) -> KernelTable:
    """The mollified kernel: sum over pieces of K_j * psi_(j-l)."""
    if l < 0:
        raise ValueError("mollification level l must be >= 0")
    if not pieces:
        raise ValueError("need at least one kernel piece")
    return _sum_tables([mollified_piece_table(p, moll, l, domain) for p in pieces])


def difference_kernel(
    pieces: list[KernelPiece], moll: Mollifier, m: int, domain: Domain
) -> list[KernelTable]:
    """Per-piece difference of consecutive doubly-exponential mollifications.

    Returns K_j * psi_(j - 2^m) - K_j * psi_(j - 2^(m-1)) for each piece.
    """
    if m < 1:
        raise ValueError("difference level m must be >= 1")
    out = []
    for p in pieces:
        fine = mollified_piece_table(p, moll, 2 ** m, domain)
        coarse = mollified_piece_table(p, moll, 2 ** (m - 1), domain)
        radius = max(fine.radius, coarse.radius)
        vals = np.zeros((2 * radius + 1, 2 * radius + 1))
        df = radius - fine.radius
        vals[df : df + 2 * fine.radius + 1, df : df + 2 * fine.radius + 1] += fine.values
        dc = radius - coarse.radius
        vals[dc : dc + 2 * coarse.radius + 1, dc : dc + 2 * coarse.radius + 1] -= coarse.values
        out.append(KernelTable(vals, radius))
    return out
