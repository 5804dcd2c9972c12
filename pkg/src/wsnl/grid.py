"""Periodic-box spectral substrate: grids, transforms, multipliers, norms, cutoffs.

Conventions used by every module and every oracle in this package:

  forward transform    F f(xi_k) = dx^d * fftn(f)        (~ integral of f e^{-i<x,xi>} dx)
  inverse transform    f(x_j)    = (N/L)^d * ifftn(Ff)   (~ (2pi)^{-d} integral Ff e^{i<x,xi>} dxi)
  lattice dictionary   (2pi)^{-d} * integral dxi   ->   L^{-d} * sum over modes

Frequencies are xi_k = 2*pi*k/L for integer k in [-N/2, N/2) per axis, stored in
numpy fft order.  Physical coordinates are x_j = j*L/N on [0, L).  With these
choices the round trip inverse(forward(f)) == f holds exactly, and Parseval reads
||f||_{L2}^2 = dx^d * sum|f|^2 = L^{-d} * sum|Ff|^2.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np

# Guard against accidental huge allocations (N^d complex points per field).
MAX_POINTS_DEFAULT = 2**26

SpaceTag = Literal["physical", "frequency"]


class GridError(ValueError):
    """Contract violation on grids, tags, or multiplier shapes."""


@dataclass(frozen=True)
class SpectralGrid:
    """Periodic box [0, L)^d sampled on N points per axis.

    Parameters
    ----------
    d : int
        Space dimension (1, 2 or 3).
    L : float
        Box side length.
    N : int
        Points per dimension; must be even and >= 4.
    """

    d: int
    L: float
    N: int
    max_points: int = MAX_POINTS_DEFAULT

    # derived arrays, filled in __post_init__
    x: np.ndarray = field(init=False, repr=False, compare=False)
    xi_axis: np.ndarray = field(init=False, repr=False, compare=False)
    xi2: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.d not in (1, 2, 3):
            raise GridError(f"dimension must be 1, 2 or 3, got {self.d}")
        if self.N % 2 != 0 or self.N < 4:
            raise GridError(f"N must be even and >= 4, got {self.N}")
        if not (self.L > 0 and np.isfinite(self.L)):
            raise GridError(f"L must be positive and finite, got {self.L}")
        if self.N**self.d > self.max_points:
            raise GridError(
                f"N^d = {self.N**self.d} exceeds the point budget {self.max_points}"
            )
        object.__setattr__(self, "x", np.arange(self.N) * (self.L / self.N))
        xi = 2.0 * np.pi * np.fft.fftfreq(self.N, d=self.L / self.N)
        object.__setattr__(self, "xi_axis", xi)
        grids = np.meshgrid(*([xi] * self.d), indexing="ij")
        object.__setattr__(self, "xi2", sum(g**2 for g in grids))

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.d

    @property
    def dx(self) -> float:
        return self.L / self.N

    @property
    def cell_volume(self) -> float:
        return (self.L / self.N) ** self.d

    @property
    def nyquist(self) -> float:
        """Largest usable truncation radius, pi*N/L."""
        return np.pi * self.N / self.L

    def check_radius(self, n: float) -> None:
        if n > self.nyquist + 1e-12:
            raise GridError(
                f"truncation radius {n} exceeds the Nyquist bound pi*N/L = {self.nyquist:.6g}"
            )

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape, dtype=np.complex128)

    # The transforms act on the trailing d axes so batched (B, N, ..., N)
    # arrays work unchanged.
    def forward_values(self, values: np.ndarray) -> np.ndarray:
        axes = tuple(range(-self.d, 0))
        return self.cell_volume * np.fft.fftn(values, axes=axes)

    def inverse_values(self, values: np.ndarray) -> np.ndarray:
        axes = tuple(range(-self.d, 0))
        return (self.N / self.L) ** self.d * np.fft.ifftn(values, axes=axes)


@dataclass(frozen=True)
class Field:
    """One complex scalar field on a grid, tagged physical- or frequency-space."""

    grid: SpectralGrid
    values: np.ndarray
    space: SpaceTag

    def __post_init__(self) -> None:
        if self.space not in ("physical", "frequency"):
            raise GridError(f"unknown space tag {self.space!r}")
        values = np.asarray(self.values, dtype=np.complex128)
        if values.shape != self.grid.shape:
            raise GridError(
                f"values shape {values.shape} does not match grid shape {self.grid.shape}"
            )
        object.__setattr__(self, "values", values)

    @property
    def is_frequency(self) -> bool:
        return self.space == "frequency"

    def with_values(self, values: np.ndarray) -> "Field":
        return Field(self.grid, values, self.space)


def forward(f: Field) -> Field:
    if f.space != "physical":
        raise GridError("forward transform expects a physical-space field")
    return Field(f.grid, f.grid.forward_values(f.values), "frequency")


def inverse(f: Field) -> Field:
    if f.space != "frequency":
        raise GridError("inverse transform expects a frequency-space field")
    return Field(f.grid, f.grid.inverse_values(f.values), "physical")


def to_frequency(f: Field) -> Field:
    return f if f.space == "frequency" else forward(f)


def to_physical(f: Field) -> Field:
    return f if f.space == "physical" else inverse(f)


# ---------------------------------------------------------------------------
# Fourier multipliers
# ---------------------------------------------------------------------------

def bessel_weight(grid: SpectralGrid, order: float) -> np.ndarray:
    """(1 + |xi|^2)^(order/2); order = -alpha smooths, order = +s weights Sobolev norms."""
    return (1.0 + grid.xi2) ** (0.5 * order)


def truncation_mask(grid: SpectralGrid, radius: float) -> np.ndarray:
    """Indicator of the closed ball |xi| <= radius on the frequency lattice."""
    if radius < 0:
        raise GridError(f"truncation radius must be >= 0, got {radius}")
    grid.check_radius(radius)
    return (grid.xi2 <= radius * radius).astype(np.float64)


def propagator_phase(grid: SpectralGrid, dt: float) -> np.ndarray:
    """Free Schrodinger group e^{-i dt Laplacian} as the multiplier e^{i dt |xi|^2}."""
    return np.exp(1j * dt * grid.xi2)


def apply_multiplier(f: Field, multiplier: np.ndarray) -> Field:
    if f.space != "frequency":
        raise GridError("multipliers act on frequency-space fields")
    if np.shape(multiplier) != f.grid.shape:
        raise GridError(
            f"multiplier shape {np.shape(multiplier)} does not match grid {f.grid.shape}"
        )
    return Field(f.grid, f.values * multiplier, "frequency")


def apply_bessel(f: Field, order: float) -> Field:
    return apply_multiplier(f, bessel_weight(f.grid, order))


def apply_truncation(f: Field, radius: float) -> Field:
    return apply_multiplier(f, truncation_mask(f.grid, radius))


def apply_propagator(f: Field, dt: float) -> Field:
    if dt < 0:
        raise GridError(f"propagator time step must be >= 0, got {dt}")
    return apply_multiplier(f, propagator_phase(f.grid, dt))


def two_thirds_mask(grid: SpectralGrid) -> np.ndarray:
    """2/3-rule dealiasing mask: keep |k| <= N/3 per axis."""
    keep = np.abs(np.fft.fftfreq(grid.N) * grid.N) <= grid.N / 3.0
    out = keep
    for _ in range(grid.d - 1):
        out = np.multiply.outer(out, keep)
    return out.astype(np.float64)


# ---------------------------------------------------------------------------
# Norms and products
# ---------------------------------------------------------------------------

def sobolev_norm(f: Field, s: float, p: float = 2.0) -> float:
    """Discrete W^{s,p} norm: L^p norm (cell-volume weighted) of the Bessel-weighted field."""
    if not np.isfinite(p) or p < 2:
        raise GridError(f"integrability exponent p must be in [2, inf), got {p}")
    if not np.all(np.isfinite(f.values)):
        raise GridError("sobolev_norm given non-finite values")
    fhat = to_frequency(f).values
    g = f.grid.inverse_values(bessel_weight(f.grid, s) * fhat)
    return float((f.grid.cell_volume * np.sum(np.abs(g) ** p)) ** (1.0 / p))


def hs_norm_sq(grid: SpectralGrid, phys_values: np.ndarray, s: float) -> np.ndarray:
    """Squared H^s norm computed in frequency space; supports leading batch axes.

    Equals sobolev_norm(f, s, 2)**2 by Parseval: L^{-d} sum (1+|xi|^2)^s |Ff|^2.
    """
    fhat = grid.forward_values(phys_values)
    w = (1.0 + grid.xi2) ** s
    axes = tuple(range(-grid.d, 0))
    return np.sum(w * np.abs(fhat) ** 2, axis=axes) / grid.L**grid.d


def pointwise_product(f: Field, g: Field) -> Field:
    if f.space != "physical" or g.space != "physical":
        raise GridError("pointwise_product expects physical-space fields")
    if f.grid != g.grid:
        raise GridError("pointwise_product requires a shared grid")
    return Field(f.grid, f.values * g.values, "physical")


def l2_norm(grid: SpectralGrid, phys_values: np.ndarray) -> float:
    return float(np.sqrt(grid.cell_volume * np.sum(np.abs(phys_values) ** 2)))


# ---------------------------------------------------------------------------
# Compactly supported cutoff in product form
# ---------------------------------------------------------------------------

def bump_profile(u: np.ndarray) -> np.ndarray:
    """Smooth bump exp(1 - 1/(1 - u^2)) on |u| < 1, zero outside."""
    u = np.asarray(u, dtype=np.float64)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1.0
    ui = u[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - ui * ui))
    return out


@dataclass(frozen=True)
class CutoffRho:
    """Product-form cutoff rho(x) = rho_1(x_1) ... rho_d(x_d).

    Each axis profile is a function of the scaled coordinate u = (x - center)/radius,
    supported on |u| < 1.  Support must sit strictly inside the box with a margin of
    at least L/8 per axis so the periodization sees no wrap-around.
    """

    radii: tuple[float, ...]
    centers: tuple[float, ...]
    profiles: tuple[Callable[[np.ndarray], np.ndarray], ...]

    @classmethod
    def for_grid(
        cls,
        grid: SpectralGrid,
        radius: float | None = None,
        profile: Callable[[np.ndarray], np.ndarray] = bump_profile,
    ) -> "CutoffRho":
        """Default cutoff: centered bumps of radius L/4 on every axis."""
        r = grid.L / 4.0 if radius is None else radius
        return cls(
            radii=(r,) * grid.d,
            centers=(grid.L / 2.0,) * grid.d,
            profiles=(profile,) * grid.d,
        )

    def axis_values(self, grid: SpectralGrid, axis: int) -> np.ndarray:
        u = (grid.x - self.centers[axis]) / self.radii[axis]
        vals = np.asarray(self.profiles[axis](u), dtype=np.float64)
        vals[np.abs(u) >= 1.0] = 0.0
        return vals

    def check_margin(self, grid: SpectralGrid) -> None:
        margin = grid.L / 8.0
        for axis in range(grid.d):
            lo = self.centers[axis] - self.radii[axis]
            hi = self.centers[axis] + self.radii[axis]
            if lo < margin or hi > grid.L - margin:
                raise GridError(
                    f"cutoff support [{lo:.4g}, {hi:.4g}] on axis {axis} violates the "
                    f"L/8 periodization margin of box [0, {grid.L:.4g})"
                )

    def evaluate(self, grid: SpectralGrid) -> np.ndarray:
        """rho on the grid, exactly the product of the per-axis samples."""
        if len(self.radii) != grid.d:
            raise GridError(f"cutoff has {len(self.radii)} axes, grid has {grid.d}")
        self.check_margin(grid)
        out = self.axis_values(grid, 0)
        for axis in range(1, grid.d):
            out = np.multiply.outer(out, self.axis_values(grid, axis))
        return out

    def spectral_tail_ratio(self, grid: SpectralGrid, band: float = 0.85) -> float:
        """Max |rho_hat| in the top frequency band relative to the overall max,
        on this specific grid (a resolution diagnostic)."""
        rho_hat = grid.forward_values(self.evaluate(grid).astype(np.complex128))
        mags = np.abs(rho_hat)
        xi_inf = np.abs(grid.xi_axis)
        high = xi_inf >= band * grid.nyquist
        for _ in range(grid.d - 1):
            high = np.logical_or.outer(high, np.abs(grid.xi_axis) >= band * grid.nyquist)
        return float(mags[high].max() / mags.max())

    def axis_tail_ratio(self, axis: int, probe_n: int = 1024, band: float = 0.85) -> float:
        """Smoothness proxy for one axis profile, independent of any box.

        Samples the profile on a fine 1-D probe covering two support widths and
        returns the max relative Fourier coefficient in the top band; the default
        bump decays below 1e-10 before the probe's Nyquist frequency.
        """
        u = (np.arange(probe_n) / probe_n) * 4.0 - 2.0
        vals = np.asarray(self.profiles[axis](u), dtype=np.float64)
        vals[np.abs(u) >= 1.0] = 0.0
        mags = np.abs(np.fft.fft(vals))
        k = np.abs(np.fft.fftfreq(probe_n) * probe_n)
        return float(mags[k >= band * (probe_n / 2)].max() / mags.max())


def localized_norm(f: Field, rho: CutoffRho, s: float) -> float:
    """||rho * (Id - Laplacian)^{s/2} f||_{L2}: weight first, localize after."""
    if not np.isfinite(s):
        raise GridError("regularity exponent must be finite")
    if not np.all(np.isfinite(f.values)):
        raise GridError("localized_norm given non-finite values")
    fhat = to_frequency(f).values
    g = f.grid.inverse_values(bessel_weight(f.grid, s) * fhat)
    return l2_norm(f.grid, rho.evaluate(f.grid) * g)
