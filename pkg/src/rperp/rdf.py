"""Rate-distortion solvers for Gaussian sources under MSE.

Two functions are covered, each in process form (a PSD grid) and vector form
(a covariance matrix):

* Shannon's R(D) by reverse water-filling with water level ``theta``;
* R_perp(D), the RDF when the reconstruction error must be uncorrelated with
  the source, parametrised by ``alpha``.

Rates are returned in bits per dimension. The process-form integrals are grid
means, so the vector form is literally the same computation applied to the
eigenvalues of the covariance matrix.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectra import PsdGrid, check_covariance

LOG2E = 1.0 / np.log(2.0)
DISTORTION_RTOL = 1e-9


@dataclass(frozen=True)
class RdfPoint:
    rate: float
    distortion: float
    parameter: float

    def __post_init__(self):
        if not self.rate >= 0:
            raise ValueError(f"rate must be >= 0, got {self.rate}")
        if not self.distortion > 0:
            raise ValueError(f"distortion must be > 0, got {self.distortion}")
        if not self.parameter > 0:
            raise ValueError(f"parameter must be > 0, got {self.parameter}")


# -- spectral-value kernels (shared by the process and vector forms) --------

def _shannon_terms(S: np.ndarray, theta: float):
    Sz = np.minimum(S, theta)
    with np.errstate(divide="ignore"):
        r = np.where(S > theta, 0.5 * np.log2(np.where(S > theta, S, 1.0) / theta), 0.0)
    return float(np.mean(r)), Sz


def uncorr_distortion_density(S: np.ndarray, alpha: float) -> np.ndarray:
    """Optimal distortion spectrum 0.5*(sqrt(S+alpha) - sqrt(S))*sqrt(S).

    Evaluated as 0.5*alpha*sqrt(S)/(sqrt(S+alpha)+sqrt(S)) to avoid
    cancellation when S >> alpha. Zero where S is zero.
    """
    rs = np.sqrt(S)
    return 0.5 * alpha * rs / (np.sqrt(S + alpha) + rs)


def uncorr_rate_density(S: np.ndarray, alpha: float) -> np.ndarray:
    """log2((sqrt(S+alpha)+sqrt(S))/sqrt(alpha)), zero where S is zero."""
    return LOG2E * np.arcsinh(np.sqrt(S / alpha))


def _uncorr_terms(S: np.ndarray, alpha: float):
    Sz = uncorr_distortion_density(S, alpha)
    return float(np.mean(uncorr_rate_density(S, alpha))), Sz


# -- parameter search -------------------------------------------------------

def _log_bisect(dist_of, target: float, lo: float, hi: float, max_iter: int = 400) -> float:
    """Bisection in log-parameter for an increasing dist_of(p) hitting target."""
    for _ in range(max_iter):
        mid = np.sqrt(lo * hi)
        if mid <= lo or mid >= hi:
            break
        if dist_of(mid) < target:
            lo = mid
        else:
            hi = mid
        if hi / lo - 1.0 < 1e-15:
            break
    d_lo, d_hi = dist_of(lo), dist_of(hi)
    return lo if abs(d_lo - target) <= abs(d_hi - target) else hi


def _solve_theta(S: np.ndarray, D: float) -> float:
    variance = float(np.mean(S))
    if not 0 < D < variance:
        raise ValueError(f"distortion must lie in (0, {variance:.6g}), got {D}")
    # D(theta) <= theta, so the water level is at least D
    lo, hi = D * (1 - 1e-12), float(S.max())
    return _log_bisect(lambda t: float(np.mean(np.minimum(S, t))), D, lo, hi)


def _solve_alpha(S: np.ndarray, D: float) -> float:
    if not D > 0:
        raise ValueError(f"distortion must be positive, got {D}")
    variance = float(np.mean(S))
    if variance <= 0:
        raise ValueError("source has zero variance")

    def dist(a):
        return float(np.mean(uncorr_distortion_density(S, a)))

    lo = hi = 1e-12 * variance
    while dist(lo) > D:
        lo /= 4.0
        if lo < 1e-300:
            raise ValueError(f"cannot bracket alpha for D={D}")
    while dist(hi) < D:
        hi *= 4.0
        if hi > 1e300:
            raise ValueError(f"cannot bracket alpha for D={D}")
    lo = min(lo, hi / 4.0)
    return _log_bisect(dist, D, lo, hi)


# -- process form -----------------------------------------------------------

def shannon_from_theta(psd: PsdGrid, theta: float) -> tuple[RdfPoint, PsdGrid]:
    """Rate and distortion spectrum min(theta, S_X) at water level theta."""
    if not theta > 0:
        raise ValueError("theta must be positive")
    rate, Sz = _shannon_terms(psd.values, theta)
    return RdfPoint(rate, float(np.mean(Sz)), theta), PsdGrid(psd.omegas, Sz)


def shannon_at_distortion(psd: PsdGrid, D: float) -> tuple[RdfPoint, PsdGrid]:
    theta = _solve_theta(psd.values, D)
    return shannon_from_theta(psd, theta)


def uncorr_from_alpha(psd: PsdGrid, alpha: float) -> tuple[RdfPoint, PsdGrid]:
    """R_perp and the optimal distortion PSD for a given alpha."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    rate, Sz = _uncorr_terms(psd.values, alpha)
    return RdfPoint(rate, float(np.mean(Sz)), alpha), PsdGrid(psd.omegas, Sz)


def uncorr_at_distortion(psd: PsdGrid, D: float) -> tuple[RdfPoint, PsdGrid]:
    """R_perp(D). Valid for every D > 0, including D above the source variance."""
    alpha = _solve_alpha(psd.values, D)
    return uncorr_from_alpha(psd, alpha)


# -- vector form ------------------------------------------------------------

def optimal_distortion_covariance(K_X, alpha: float) -> np.ndarray:
    """K_Z = 0.5*sqrt(K_X^2 + alpha*K_X) - 0.5*K_X, built in the eigenbasis of K_X."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    K = check_covariance(K_X, name="K_X")
    lam, V = np.linalg.eigh(K)
    lam = np.clip(lam, 0.0, None)
    Kz = (V * uncorr_distortion_density(lam, alpha)) @ V.T
    return 0.5 * (Kz + Kz.T)


def _positive_definite_eigs(K_X) -> np.ndarray:
    K = check_covariance(K_X, name="K_X")
    lam = np.linalg.eigvalsh(K)
    if lam[0] <= 1e-10 * lam[-1]:
        raise ValueError(
            f"K_X is singular (min eigenvalue {lam[0]:.3g}); R_perp is undefined")
    return lam


def vector_uncorr_rdf(K_X, D: float) -> tuple[RdfPoint, np.ndarray]:
    """R_perp(D) for a Gaussian vector with positive definite covariance K_X."""
    lam = _positive_definite_eigs(K_X)
    alpha = _solve_alpha(lam, D)
    rate, kz = _uncorr_terms(lam, alpha)
    Kz = optimal_distortion_covariance(K_X, alpha)
    return RdfPoint(rate, float(np.mean(kz)), alpha), Kz


def vector_shannon_rdf(K_X, D: float) -> RdfPoint:
    """Shannon R(D) of a Gaussian vector by reverse water-filling on eigenvalues."""
    lam = np.clip(np.linalg.eigvalsh(check_covariance(K_X, name="K_X")), 0.0, None)
    theta = _solve_theta(lam, D)
    rate, Sz = _shannon_terms(lam, theta)
    return RdfPoint(rate, float(np.mean(Sz)), theta)


def gaussian_mutual_information(K_X, K_Z) -> float:
    """(1/2N) log2 |K_X + K_Z| / |K_Z| in bits per dimension."""
    N = len(K_X)
    s1, ld1 = np.linalg.slogdet(np.asarray(K_X) + np.asarray(K_Z))
    s2, ld2 = np.linalg.slogdet(np.asarray(K_Z))
    if s1 <= 0 or s2 <= 0:
        raise ValueError("covariances must be positive definite")
    return 0.5 * LOG2E * (ld1 - ld2) / N
