"""Periodic grid, Fourier transforms, and the multiplier operators.

The computational domain is a periodic square box of side ``box_length``
centered at the origin, sampled on an ``n`` x ``n`` lattice. All fields are
real in physical space; spectral coefficients are intermediate storage.

The central operator multiplies Fourier coefficients by

    m(lam) = lam1^2 / (lam1^2 + lam2^2),    m(0) = 0,

i.e. the symbol of d_11 applied to the inverse Laplacian. The zero-mode
convention m(0) = 0 makes the operator kill constants and keeps it symmetric
positive-semidefinite; it is the one place where the periodic operator and
its whole-plane counterpart differ.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Grid",
    "RealField",
    "SpectralField",
    "make_grid",
    "fft_forward",
    "fft_inverse",
    "apply_z11",
    "apply_z22",
    "quadratic_form",
    "cone_mass_ratio",
    "inner",
    "l2_norm",
    "sup_norm",
    "field_integral",
]


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid:
    """Sample lattice and frequency lattice of the periodic box.

    Parameters
    ----------
    n : int
        Points per axis. Must be a power of two, at least 16.
    box_length : float
        Physical side length of the periodic box.

    Derived attributes (set at construction): ``h`` sample spacing, ``x``
    1-d sample coordinates in ``[-L/2, L/2)``, ``k1``/``k2`` integer
    wavenumber meshes in FFT layout, ``lam1``/``lam2`` physical frequencies
    ``2*pi*k/L``, ``m11``/``m22`` the multiplier meshes, and
    ``dealias_keep`` the 2/3-rule retention mask.

    The multipliers are computed from the integer wavenumbers, so they are
    bitwise independent of ``box_length`` (the symbol is 0-homogeneous).
    """

    n: int
    box_length: float

    def __post_init__(self) -> None:
        if not isinstance(self.n, (int, np.integer)):
            raise TypeError(f"n must be an integer, got {type(self.n).__name__}")
        if not _is_power_of_two(self.n) or self.n < 16:
            raise ValueError(f"n must be a power of two >= 16, got {self.n}")
        if not (np.isfinite(self.box_length) and self.box_length > 0):
            raise ValueError(f"box_length must be positive and finite, got {self.box_length}")

        n = self.n
        length = float(self.box_length)
        object.__setattr__(self, "box_length", length)
        h = length / n
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "x", -0.5 * length + h * np.arange(n))

        # Integer wavenumbers in FFT ordering: 0..n/2-1, -n/2..-1.
        kint = np.arange(n)
        kint = np.where(kint < n // 2, kint, kint - n)
        k1 = kint[:, None] * np.ones(n, dtype=int)[None, :]
        k2 = np.ones(n, dtype=int)[:, None] * kint[None, :]
        object.__setattr__(self, "k1", k1)
        object.__setattr__(self, "k2", k2)
        object.__setattr__(self, "lam1", (2.0 * np.pi / length) * k1)
        object.__setattr__(self, "lam2", (2.0 * np.pi / length) * k2)

        ksq = k1.astype(float) ** 2 + k2.astype(float) ** 2
        with np.errstate(invalid="ignore", divide="ignore"):
            m11 = np.where(ksq > 0, k1.astype(float) ** 2 / ksq, 0.0)
            m22 = np.where(ksq > 0, k2.astype(float) ** 2 / ksq, 0.0)
        object.__setattr__(self, "m11", m11)
        object.__setattr__(self, "m22", m22)

        kcut = n // 3
        keep = (np.abs(k1) <= kcut) & (np.abs(k2) <= kcut)
        object.__setattr__(self, "dealias_keep", keep)

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Meshgrid of sample coordinates, axis 0 along x1, axis 1 along x2."""
        return np.meshgrid(self.x, self.x, indexing="ij")

    def zeros(self) -> np.ndarray:
        return np.zeros((self.n, self.n))


def make_grid(n: int, box_length: float) -> Grid:
    """Construct a :class:`Grid`, validating ``n`` and ``box_length``."""
    return Grid(n, box_length)


@dataclass(frozen=True, eq=False)
class RealField:
    """Real samples of a scalar field on a :class:`Grid`.

    ``values`` must be finite everywhere unless ``post_blowup`` marks the
    field as the product of a diverged evolution.
    """

    grid: Grid
    values: np.ndarray
    post_blowup: bool = False

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (self.grid.n, self.grid.n):
            raise ValueError(f"values shape {v.shape} does not match grid ({self.grid.n}, {self.grid.n})")
        if not self.post_blowup and not np.all(np.isfinite(v)):
            raise ValueError("field contains NaN/Inf and is not flagged post_blowup")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Complex Fourier coefficients of a field, indexed by lattice frequency."""

    grid: Grid
    coefficients: np.ndarray

    def __post_init__(self) -> None:
        c = np.asarray(self.coefficients, dtype=np.complex128)
        if c.shape != (self.grid.n, self.grid.n):
            raise ValueError(f"coefficients shape {c.shape} does not match grid ({self.grid.n}, {self.grid.n})")
        object.__setattr__(self, "coefficients", c)


def fft_forward(f: RealField) -> SpectralField:
    """Forward transform; the 1/n^2 factor is on this side, so the zero
    coefficient equals the field mean."""
    return SpectralField(f.grid, np.fft.fft2(f.values, norm="forward"))


def fft_inverse(F: SpectralField) -> RealField:
    """Inverse transform. The imaginary part (roundoff for Hermitian input)
    is discarded."""
    w = np.fft.ifft2(F.coefficients, norm="forward")
    return RealField(F.grid, w.real)


def _multiply_symbol(f: RealField, symbol: np.ndarray) -> RealField:
    c = np.fft.fft2(f.values)
    return RealField(f.grid, np.fft.ifft2(symbol * c).real, post_blowup=f.post_blowup)


def apply_z11(f: RealField) -> RealField:
    """Apply the multiplier lam1^2/|lam|^2 (zero on the zero mode).

    The operator is the identity on pure x1-waves, annihilates pure
    x2-waves, and is idempotent only on fields spectrally supported where
    the multiplier is 0 or 1.
    """
    return _multiply_symbol(f, f.grid.m11)


def apply_z22(f: RealField) -> RealField:
    """Companion multiplier lam2^2/|lam|^2; together with
    :func:`apply_z11` it sums to the identity on mean-zero fields."""
    return _multiply_symbol(f, f.grid.m22)


def inner(f: RealField, g: RealField) -> float:
    """L2 inner product h^2 * sum(f * g) on the box."""
    return float(f.grid.h**2 * np.sum(f.values * g.values))


def l2_norm(f: RealField) -> float:
    return float(np.sqrt(f.grid.h**2 * np.sum(f.values**2)))


def sup_norm(f: RealField) -> float:
    return float(np.max(np.abs(f.values)))


def field_integral(f: RealField) -> float:
    """Integral of the field over the box, h^2 * sum (spectrally accurate
    for periodic fields)."""
    return float(f.grid.h**2 * np.sum(f.values))


def quadratic_form(f: RealField) -> float:
    """Spectral-side quadratic form sum m(lam) |f_hat(lam)|^2.

    Scaled so it equals the physical inner product of ``apply_z11(f)`` with
    ``f``. Nonnegative termwise; it vanishes exactly when the spectrum is
    supported on the lam1 = 0 axis (zero mode included).
    """
    c = np.fft.fft2(f.values, norm="forward")
    power = c.real**2 + c.imag**2
    return float(f.grid.box_length**2 * np.sum(f.grid.m11 * power))


def cone_mass_ratio(f: RealField, k: float) -> float:
    """Fraction of spectral mass on the frequency cone 1/k < lam1/lam2 < k.

    Lattice points with lam2 = 0 lie outside the cone. The ratio is taken
    against the total spectral mass and lies in [0, 1].
    """
    if not k > 1:
        raise ValueError(f"cone parameter k must exceed 1, got {k}")
    c = np.fft.fft2(f.values)
    power = c.real**2 + c.imag**2
    total = power.sum()
    if total == 0.0:
        raise ValueError("cone_mass_ratio is undefined for the zero field")
    k1 = f.grid.k1
    k2 = f.grid.k2
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(k2 != 0, k1 / np.where(k2 != 0, k2, 1), 0.0)
    in_cone = (k2 != 0) & (ratio > 1.0 / k) & (ratio < k)
    return float(power[in_cone].sum() / total)
