"""Synthesis of coders that realise R_perp(D) over an additive white noise channel.

Three structures are built here:

* a causal (lower-triangular) transform ``T`` with ``T^-1 T^-T sigma_w2 = K_Z``;
* a causal transform coder with error feedback ``(A, F)`` whose channel
  outputs are uncorrelated, so scalar rates add up to R_perp(D);
* FIR noise-shaping filters ``a`` (for A(z)) and ``f`` (for F(z)) for
  stationary sources, obtained by minimum-phase spectral factorisation.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .rdf import RdfPoint, uncorr_at_distortion, vector_uncorr_rdf
from .spectra import PsdGrid, check_covariance

TOL_FACT = 1e-9
TOL_BODE = 1e-3
ROOT_RADIUS_TOL = 1.0 - 1e-6


class FactorizationError(np.linalg.LinAlgError):
    """A triangular factorisation hit a nonpositive pivot."""

    def __init__(self, pivot: int, value: float, name: str = "matrix"):
        self.pivot = pivot
        self.value = value
        super().__init__(f"{name} is not positive definite: pivot {pivot} = {value:.3g}")


class DesignError(ValueError):
    """A design could not meet its invariants."""


# -- triangular factorisations ---------------------------------------------

def unit_ldl(M, name: str = "matrix") -> tuple[np.ndarray, np.ndarray]:
    """Factor a symmetric positive definite M as L diag(d) L^T with unit-diagonal L.

    Row-wise elimination; raises FactorizationError naming the first
    nonpositive pivot.
    """
    M = np.asarray(M, dtype=float)
    n = len(M)
    L = np.eye(n)
    d = np.zeros(n)
    for j in range(n):
        Lj = L[j, :j]
        d[j] = M[j, j] - np.dot(Lj * Lj, d[:j])
        if not d[j] > 0:
            raise FactorizationError(j, d[j], name)
        if j + 1 < n:
            L[j + 1:, j] = (M[j + 1:, j] - (L[j + 1:, :j] * d[:j]) @ Lj) / d[j]
    return L, d


def cholesky_lower(M, name: str = "matrix") -> np.ndarray:
    """Lower Cholesky factor with positive diagonal, via unit_ldl."""
    L, d = unit_ldl(M, name)
    return L * np.sqrt(d)


def _relres(X, Y) -> float:
    return float(np.linalg.norm(X - Y) / np.linalg.norm(Y))


# -- causal transform -------------------------------------------------------

@dataclass(frozen=True)
class TransformDesign:
    T: np.ndarray
    sigma_w2: float
    Kz: np.ndarray
    K_X: np.ndarray
    point: RdfPoint

    @property
    def size(self) -> int:
        return len(self.T)

    def analysis(self) -> np.ndarray:
        return self.T

    def feedback(self) -> np.ndarray:
        return np.zeros_like(self.T)

    def factorization_residual(self) -> float:
        Tinv = solve_triangular(self.T, np.eye(self.size), lower=True)
        return _relres(self.sigma_w2 * Tinv @ Tinv.T, self.Kz)

    def channel_covariance(self) -> np.ndarray:
        """Covariance of the channel output T X + W."""
        return self.T @ self.K_X @ self.T.T + self.sigma_w2 * np.eye(self.size)


def design_causal_transform(K_X, D: float, sigma_w2: float = 1.0) -> TransformDesign:
    """Lower-triangular T realising R_perp(D) for the source covariance K_X."""
    if not sigma_w2 > 0:
        raise ValueError("sigma_w2 must be positive")
    K_X = check_covariance(K_X, name="K_X")
    point, Kz = vector_uncorr_rdf(K_X, D)
    C = cholesky_lower(Kz / sigma_w2, name="K_Z/sigma_w2")
    T = solve_triangular(C, np.eye(len(C)), lower=True)
    T = np.tril(T)
    design = TransformDesign(T, float(sigma_w2), Kz, K_X, point)
    res = design.factorization_residual()
    if res > TOL_FACT:
        raise DesignError(f"transform factorisation residual {res:.3g} exceeds {TOL_FACT}")
    return design


# -- error-feedback transform coder ----------------------------------------

@dataclass(frozen=True)
class FeedbackTransformDesign:
    A: np.ndarray
    F: np.ndarray
    Ddiag: np.ndarray
    sigma_w2: float
    Kz: np.ndarray
    K_X: np.ndarray
    point: RdfPoint

    @property
    def size(self) -> int:
        return len(self.A)

    def analysis(self) -> np.ndarray:
        return self.A

    def feedback(self) -> np.ndarray:
        return self.F

    def factorization_residual(self) -> float:
        """Relative residual of sigma_w2 A^-1 (I-F) [A^-1 (I-F)]^T = K_Z."""
        G = np.linalg.solve(self.A, np.eye(self.size) - self.F)
        return _relres(self.sigma_w2 * G @ G.T, self.Kz)

    def channel_covariance(self) -> np.ndarray:
        """K_U = A K_X A^T + sigma_w2 (I-F)(I-F)^T."""
        IF = np.eye(self.size) - self.F
        return self.A @ self.K_X @ self.A.T + self.sigma_w2 * IF @ IF.T

    def offdiag_residual(self) -> float:
        K = self.channel_covariance()
        off = K - np.diag(np.diag(K))
        return float(np.linalg.norm(off) / np.linalg.norm(K))

    def channel_rate(self) -> float:
        """(1/2N) sum_k log2(sigma_Uk^2 / sigma_w2), bits per dimension."""
        return float(0.5 * np.mean(np.log2(self.Ddiag / self.sigma_w2)))


def design_feedback_transform(K_X, D: float, sigma_w2: float = 1.0) -> FeedbackTransformDesign:
    if not sigma_w2 > 0:
        raise ValueError("sigma_w2 must be positive")
    K_X = check_covariance(K_X, name="K_X")
    point, Kz = vector_uncorr_rdf(K_X, D)
    n = len(K_X)
    L = cholesky_lower(Kz, name="K_Z")
    Linv = solve_triangular(L, np.eye(n), lower=True)
    M = Linv @ K_X @ Linv.T + np.eye(n)
    M = 0.5 * (M + M.T)
    Lp, delta = unit_ldl(M, name="L^-1 K_X L^-T + I")
    IF = np.tril(solve_triangular(Lp, np.eye(n), lower=True, unit_diagonal=True))
    F = np.tril(np.eye(n) - IF, -1)
    A = np.tril(np.sqrt(sigma_w2) * (np.eye(n) - F) @ Linv)
    design = FeedbackTransformDesign(A, F, sigma_w2 * delta, float(sigma_w2), Kz, K_X, point)
    res = design.factorization_residual()
    off = design.offdiag_residual()
    if res > TOL_FACT or off > TOL_FACT:
        raise DesignError(
            f"feedback design residuals too large: factorisation {res:.3g}, "
            f"off-diagonal {off:.3g}")
    return design


# -- spectral factorisation -------------------------------------------------

def freq_response(h, grid_size: int) -> np.ndarray:
    """H(e^{jw}) = sum_k h[k] e^{-jwk} on the [-pi, pi) grid."""
    h = np.asarray(h, dtype=float)
    if len(h) > grid_size:
        raise ValueError("filter longer than the frequency grid")
    return np.fft.fftshift(np.fft.fft(h, grid_size))


def fir_roots(h) -> np.ndarray:
    h = np.trim_zeros(np.asarray(h, dtype=float), "b")
    if len(h) < 2:
        return np.empty(0, dtype=complex)
    return np.roots(h)


def max_root_radius(h) -> float:
    r = fir_roots(h)
    return float(np.abs(r).max()) if len(r) else 0.0


def min_phase_spectral_factor(mag_sq: PsdGrid, fir_len: int) -> np.ndarray:
    """Causal minimum-phase FIR h with |H(e^{jw})|^2 ~ mag_sq, via the real cepstrum.

    The cepstrum of 0.5*log(mag_sq) is folded onto nonnegative quefrencies,
    exponentiated in the frequency domain and truncated to ``fir_len`` taps.
    """
    G = mag_sq.grid_size
    if fir_len < 1 or fir_len > G // 8:
        raise ValueError(f"fir_len must lie in [1, G/8] = [1, {G // 8}], got {fir_len}")
    values = np.asarray(mag_sq.values)
    if np.any(values <= 0):
        raise ValueError("magnitude-squared response must be strictly positive")
    c = np.real(np.fft.ifft(0.5 * np.log(np.fft.ifftshift(values))))
    fold = np.zeros(G)
    fold[0] = c[0]
    fold[1:G // 2] = 2.0 * c[1:G // 2]
    fold[G // 2] = c[G // 2]
    h = np.real(np.fft.ifft(np.exp(np.fft.fft(fold))))
    return h[:fir_len].copy()


def relative_rms(estimate, target) -> float:
    """sqrt(mean(((estimate - target)/target)^2))."""
    estimate = np.asarray(estimate, dtype=float)
    target = np.asarray(target, dtype=float)
    return float(np.sqrt(np.mean(((estimate - target) / target) ** 2)))


# -- noise shaping ----------------------------------------------------------

@dataclass(frozen=True)
class NoiseShaperDesign:
    a: np.ndarray
    a_inv: np.ndarray
    f: np.ndarray
    sigma_w2: float
    sigma_u2: float
    target_Sz: PsdGrid
    psd: PsdGrid
    point: RdfPoint
    diagnostics: dict = field(default_factory=dict, compare=False)

    @property
    def fir_len(self) -> int:
        return len(self.a)

    def one_minus_f(self) -> np.ndarray:
        g = -np.asarray(self.f, dtype=float)
        g[0] = 1.0
        return g

    def bode_residual(self) -> float:
        """(1/2pi) * integral of log|1 - F(e^{jw})| on the design grid."""
        H = freq_response(self.one_minus_f(), self.psd.grid_size)
        return float(np.mean(np.log(np.abs(H))))


def shaping_targets(S: np.ndarray, alpha: float, sigma_u2: float, sigma_w2: float):
    """Target |1-F|^2 and |A|^2 on the grid for a strictly positive S."""
    rs = np.sqrt(S)
    diff = alpha / (np.sqrt(S + alpha) + rs)           # sqrt(S+alpha) - sqrt(S)
    one_minus_f2 = sigma_u2 / sigma_w2 * diff ** 2 / alpha
    a2 = 2.0 * sigma_u2 * diff / (alpha * rs)
    return one_minus_f2, a2


def design_noise_shaper(psd: PsdGrid, D: float, sigma_w2: float = 1.0,
                        fir_len: int = 128) -> NoiseShaperDesign:
    """FIR noise-shaping filters that realise R_perp(D) with white channel output.

    The PSD grid must be at least 64*fir_len points so cepstral aliasing stays
    below the Bode tolerance.
    """
    if not sigma_w2 > 0:
        raise ValueError("sigma_w2 must be positive")
    if fir_len < 8:
        raise ValueError("fir_len must be at least 8")
    if np.any(psd.values <= 0):
        raise DesignError(
            "noise shaping needs a strictly positive source PSD; "
            f"{int(np.sum(psd.values <= 0))} grid bins are zero")
    G = psd.grid_size
    if G < 64 * fir_len:
        raise DesignError(f"PSD grid of {G} points is too coarse for fir_len={fir_len}; "
                          f"need at least {64 * fir_len}")
    point, Sz = uncorr_at_distortion(psd, D)
    alpha = point.parameter
    sigma_u2 = sigma_w2 * 2.0 ** (2.0 * point.rate)
    omf2, a2 = shaping_targets(psd.values, alpha, sigma_u2, sigma_w2)

    g = min_phase_spectral_factor(PsdGrid(psd.omegas, omf2), fir_len)
    g = g / g[0]
    f = -g
    f[0] = 0.0
    a = min_phase_spectral_factor(PsdGrid(psd.omegas, a2), fir_len)
    a_inv = min_phase_spectral_factor(PsdGrid(psd.omegas, 1.0 / a2), fir_len)

    design = NoiseShaperDesign(a, a_inv, f, float(sigma_w2), float(sigma_u2), Sz, psd, point)
    diag = noise_shaper_diagnostics(design)
    object.__setattr__(design, "diagnostics", diag)
    if abs(diag["bode_residual"]) > TOL_BODE:
        raise DesignError(
            f"fir_len={fir_len} too short: Bode residual {diag['bode_residual']:.3g} "
            f"exceeds {TOL_BODE}")
    if diag["max_root_radius_a"] > ROOT_RADIUS_TOL or diag["max_root_radius_1mf"] > ROOT_RADIUS_TOL:
        raise DesignError(
            "designed filters are not minimum phase: root radii "
            f"{diag['max_root_radius_a']:.8f} (A), {diag['max_root_radius_1mf']:.8f} (1-F)")
    return design


def noise_shaper_diagnostics(design: NoiseShaperDesign) -> dict:
    """Invariant residuals of a noise-shaper design, evaluated on its grid."""
    G = design.psd.grid_size
    S = design.psd.values
    A2 = np.abs(freq_response(design.a, G)) ** 2
    G2 = np.abs(freq_response(design.one_minus_f(), G)) ** 2
    Ainv2 = np.abs(freq_response(design.a_inv, G)) ** 2
    omf2, a2 = shaping_targets(S, design.point.parameter, design.sigma_u2, design.sigma_w2)
    inverse_error = np.convolve(design.a, design.a_inv)
    inverse_error[0] -= 1.0
    return {
        "bode_residual": design.bode_residual(),
        "max_root_radius_a": max_root_radius(design.a),
        "max_root_radius_1mf": max_root_radius(design.one_minus_f()),
        "a_magnitude_rms": relative_rms(A2, a2),
        "one_minus_f_magnitude_rms": relative_rms(G2, omf2),
        "a_inverse_rms": relative_rms(A2 * Ainv2, np.ones(G)),
        "a_inverse_tap_error": float(np.abs(inverse_error).max()),
        "whiteness_rms": relative_rms(A2 * S + G2 * design.sigma_w2,
                                      np.full(G, design.sigma_u2)),
        "shaping_rms": relative_rms(G2 / A2 * design.sigma_w2, design.target_Sz.values),
    }
