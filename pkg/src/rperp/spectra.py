"""Source models and conversions between spectral and covariance descriptions.

Spectra live on a uniform, endpoint-exclusive grid over [-pi, pi) with an even
number of points. Values are power per radian normalised so that the mean over
the grid (the periodic trapezoid rule for (1/2pi) * integral) is the variance.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import toeplitz


def frequency_grid(grid_size: int) -> np.ndarray:
    """Return the uniform grid ``-pi + 2*pi*k/G`` for ``k = 0..G-1``."""
    if grid_size < 2 or grid_size % 2:
        raise ValueError(f"grid size must be even and >= 2, got {grid_size}")
    return -np.pi + 2.0 * np.pi * np.arange(grid_size) / grid_size


def grid_mean(values: np.ndarray) -> float:
    """(1/2pi) * integral over [-pi, pi) by the trapezoid rule on a periodic grid.

    For an endpoint-exclusive periodic grid the trapezoid rule reduces to the
    plain arithmetic mean.
    """
    return float(np.mean(values))


@dataclass(frozen=True)
class PsdGrid:
    """A sampled power spectral density of a real process."""

    omegas: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        omegas = np.asarray(self.omegas, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if omegas.shape != values.shape or omegas.ndim != 1:
            raise ValueError("omegas and values must be 1-D arrays of equal length")
        G = len(omegas)
        if not np.allclose(omegas, frequency_grid(G), atol=1e-9):
            raise ValueError("omegas must be the uniform grid over [-pi, pi) of even size")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ValueError("PSD values must be finite and nonnegative")
        # value at omega_k pairs with omega_{G-k}; index 0 (-pi) pairs with itself
        mirrored = np.concatenate(([values[0]], values[:0:-1]))
        if not np.allclose(values, mirrored, rtol=1e-8, atol=1e-12 * max(values.max(), 1e-300)):
            raise ValueError("PSD values must be symmetric under omega -> -omega")
        values = 0.5 * (values + mirrored)
        omegas.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "omegas", omegas)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_values(cls, values) -> "PsdGrid":
        values = np.asarray(values, dtype=float)
        return cls(frequency_grid(len(values)), values)

    @classmethod
    def constant(cls, level: float, grid_size: int) -> "PsdGrid":
        return cls.from_values(np.full(grid_size, float(level)))

    @property
    def grid_size(self) -> int:
        return len(self.values)

    @property
    def variance(self) -> float:
        return grid_mean(self.values)

    def to_csv(self, path) -> None:
        np.savetxt(path, np.column_stack([self.omegas, self.values]),
                   delimiter=",", header="omega,value", comments="", fmt="%.17g")

    @classmethod
    def from_csv(cls, path) -> "PsdGrid":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0], data[:, 1])


class UnstableModelError(ValueError):
    """Raised for AR models whose characteristic roots are not inside the unit circle."""


@dataclass(frozen=True)
class ArModel:
    """Stationary Gaussian AR(p): x_k = sum_m a_m x_{k-m} + e_k, Var(e_k) = innovation_variance."""

    coeffs: tuple = ()
    innovation_variance: float = 1.0

    def __post_init__(self):
        coeffs = tuple(float(c) for c in np.atleast_1d(np.asarray(self.coeffs, dtype=float)))
        object.__setattr__(self, "coeffs", coeffs)
        if not self.innovation_variance > 0:
            raise ValueError("innovation variance must be positive")
        roots = np.roots(np.concatenate(([1.0], -np.asarray(coeffs)))) if coeffs else np.empty(0)
        mags = np.abs(roots)
        if np.any(mags >= 1.0):
            bad = ", ".join(f"{m:.6g}" for m in mags[mags >= 1.0])
            raise UnstableModelError(f"AR model is not stationary: root magnitudes {bad} >= 1")

    @property
    def order(self) -> int:
        return len(self.coeffs)

    def denominator(self) -> np.ndarray:
        """Polynomial 1 - sum a_m z^{-m} as a filter denominator."""
        return np.concatenate(([1.0], -np.asarray(self.coeffs)))

    def variance(self) -> float:
        """Exact process variance from the Yule-Walker system."""
        return float(ar_autocovariance(self, 1)[0])


def ar_autocovariance(model: ArModel, n_lags: int) -> np.ndarray:
    """Exact autocovariances r[0..n_lags-1] of a stable AR model (Yule-Walker)."""
    p = model.order
    if p == 0:
        r = np.zeros(n_lags)
        r[0] = model.innovation_variance
        return r
    a = np.asarray(model.coeffs)
    # r[k] - sum_m a_m r[|k-m|] = s2 * delta_k for k = 0..p
    M = np.zeros((p + 1, p + 1))
    for k in range(p + 1):
        M[k, k] += 1.0
        for m in range(1, p + 1):
            M[k, abs(k - m)] -= a[m - 1]
    rhs = np.zeros(p + 1)
    rhs[0] = model.innovation_variance
    r0 = np.linalg.solve(M, rhs)
    r = np.zeros(max(n_lags, p + 1))
    r[: p + 1] = r0
    for k in range(p + 1, len(r)):
        r[k] = a @ r[k - p:k][::-1]
    return r[:n_lags]


def ar_to_psd(model: ArModel, grid_size: int) -> PsdGrid:
    """Evaluate ``s2 / |1 - sum a_m exp(-j w m)|^2`` on the frequency grid."""
    if grid_size < 64 or grid_size % 2:
        raise ValueError(f"grid size must be even and >= 64, got {grid_size}")
    w = frequency_grid(grid_size)
    m = np.arange(1, model.order + 1)
    denom = 1.0 - np.exp(-1j * np.outer(w, m)) @ np.asarray(model.coeffs, dtype=float) \
        if model.order else np.ones_like(w, dtype=complex)
    return PsdGrid(w, model.innovation_variance / np.abs(denom) ** 2)


def psd_autocovariance(psd: PsdGrid) -> np.ndarray:
    """Autocovariance r[k] = (1/G) sum_j S(w_j) exp(j w_j k), k = 0..G-1 (circular)."""
    return np.real(np.fft.ifft(np.fft.ifftshift(psd.values)))


def check_covariance(K, tol_rel: float = 1e-10, name: str = "covariance") -> np.ndarray:
    """Validate symmetry and numerical positive semi-definiteness; return K as float array."""
    K = np.asarray(K, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {K.shape}")
    scale = max(np.abs(K).max(), 1e-300)
    if not np.allclose(K, K.T, rtol=0, atol=1e-12 * scale):
        raise ValueError(f"{name} is not symmetric")
    eig = np.linalg.eigvalsh(0.5 * (K + K.T))
    if eig[0] < -tol_rel * max(eig[-1], 0.0):
        raise ValueError(f"{name} is indefinite (min eigenvalue {eig[0]:.3g})")
    return 0.5 * (K + K.T)


def psd_to_covariance(psd: PsdGrid, N: int) -> np.ndarray:
    """Toeplitz covariance of N consecutive samples of the process."""
    if N < 1:
        raise ValueError("N must be positive")
    if N > psd.grid_size // 4:
        raise ValueError(
            f"N={N} exceeds G/4={psd.grid_size // 4}; autocovariances would alias")
    r = psd_autocovariance(psd)[:N]
    return check_covariance(toeplitz(r))


def spd_matrix_sqrt(K) -> np.ndarray:
    """Symmetric square root via eigendecomposition."""
    K = check_covariance(K)
    lam, V = np.linalg.eigh(K)
    S = (V * np.sqrt(np.clip(lam, 0.0, None))) @ V.T
    return 0.5 * (S + S.T)
