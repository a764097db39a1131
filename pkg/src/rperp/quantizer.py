"""Subtractively dithered lattice quantisers with a linearly shaped cell.

A lattice ``scale * L`` (L one of Z^n, D4, E8 at unit scale, or a custom
generator) has a Voronoi cell V0 whose uniform distribution has per-dimension
second moment ``eps``. Shaping by an invertible M moves the cell to M V0 and
the error covariance to ``eps * M M^T``.
"""
from __future__ import annotations

import itertools
import re
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .design import cholesky_lower
from .spectra import check_covariance

# per-dimension second moment of the Voronoi cell at unit scale
_UNIT_SECOND_MOMENT = {
    "Z": 1.0 / 12.0,
    "D4": 13.0 / 120.0,
    "E8": 929.0 / 12960.0,
}

_D4_BASIS = np.array([[-1, -1, 0, 0],
                      [1, -1, 0, 0],
                      [0, 1, -1, 0],
                      [0, 0, 1, -1]], dtype=float).T

_E8_BASIS = np.array([[2, 0, 0, 0, 0, 0, 0, 0],
                      [-1, 1, 0, 0, 0, 0, 0, 0],
                      [0, -1, 1, 0, 0, 0, 0, 0],
                      [0, 0, -1, 1, 0, 0, 0, 0],
                      [0, 0, 0, -1, 1, 0, 0, 0],
                      [0, 0, 0, 0, -1, 1, 0, 0],
                      [0, 0, 0, 0, 0, -1, 1, 0],
                      [0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5]]).T


@dataclass(frozen=True)
class LatticeSpec:
    """A lattice with generator columns as basis vectors.

    ``kind``/``scale`` select a compiled closest-point routine for the named
    lattices; custom lattices (kind None) use Babai rounding plus a local search.
    """

    name: str
    generator: np.ndarray
    second_moment: float
    kind: int | None = None
    scale: float = 1.0

    def __post_init__(self):
        G = np.atleast_2d(np.asarray(self.generator, dtype=float))
        if G.shape[0] != G.shape[1] or abs(np.linalg.det(G)) < 1e-300:
            raise ValueError("lattice generator must be square and invertible")
        if not self.second_moment > 0:
            raise ValueError("second moment must be positive")
        G.setflags(write=False)
        object.__setattr__(self, "generator", G)

    @property
    def dim(self) -> int:
        return self.generator.shape[0]

    @property
    def cell_volume(self) -> float:
        return float(abs(np.linalg.det(self.generator)))

    @property
    def normalized_second_moment(self) -> float:
        return self.second_moment / self.cell_volume ** (2.0 / self.dim)

    def scaled_to(self, second_moment: float) -> "LatticeSpec":
        """Same lattice rescaled so its cell has the given per-dimension second moment."""
        c = np.sqrt(second_moment / self.second_moment)
        return LatticeSpec(self.name, self.generator * c, float(second_moment),
                           self.kind, self.scale * c)


def make_lattice(name: str, second_moment: float | None = None, step: float | None = None) -> LatticeSpec:
    """Named lattice ``Z<n>``, ``D4`` or ``E8``.

    Give either the target per-dimension second moment or, for Z<n>, the step.
    Defaults to unit scale.
    """
    m = re.fullmatch(r"Z(\d+)", name)
    if m:
        n = int(m.group(1))
        if not 1 <= n <= 8:
            raise ValueError("Z^n supported for 1 <= n <= 8")
        lat = LatticeSpec(name, np.eye(n), _UNIT_SECOND_MOMENT["Z"], _kernels.ZN, 1.0)
    elif name == "D4":
        lat = LatticeSpec(name, _D4_BASIS, _UNIT_SECOND_MOMENT["D4"], _kernels.DN, 1.0)
    elif name == "E8":
        lat = LatticeSpec(name, _E8_BASIS, _UNIT_SECOND_MOMENT["E8"], _kernels.E8, 1.0)
    else:
        raise ValueError(f"unknown lattice {name!r}; expected Z<n>, D4 or E8")
    if step is not None:
        if lat.kind != _kernels.ZN:
            raise ValueError("step is only meaningful for Z^n")
        second_moment = step ** 2 / 12.0
    if second_moment is not None:
        lat = lat.scaled_to(second_moment)
    return lat


def custom_lattice(generator, rng=None, n_mc: int = 200_000) -> LatticeSpec:
    """Lattice from an arbitrary generator; its second moment is estimated by Monte Carlo."""
    G = np.atleast_2d(np.asarray(generator, dtype=float))
    provisional = LatticeSpec("custom", G, 1.0)
    rng = np.random.default_rng(0) if rng is None else rng
    u = _fold(provisional, rng.random((n_mc, provisional.dim)) @ G.T)
    return LatticeSpec("custom", G, float(np.mean(u ** 2)))


def nearest_point(lattice: LatticeSpec, x) -> np.ndarray:
    """Closest lattice point(s) to x (one vector or a batch of row vectors)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim <= 1
    X = np.atleast_2d(x.reshape(-1, lattice.dim) if single else x)
    if X.shape[-1] != lattice.dim:
        raise ValueError(f"expected vectors of dimension {lattice.dim}")
    if lattice.kind is not None:
        P = _kernels.nearest_batch(lattice.kind, lattice.scale, np.ascontiguousarray(X))
    else:
        P = _nearest_custom(lattice, X)
    return P[0] if single else P


def _nearest_custom(lattice: LatticeSpec, X: np.ndarray) -> np.ndarray:
    G = lattice.generator
    base = np.floor(np.linalg.solve(G, X.T).T + 0.5)
    offsets = np.array(list(itertools.product((-1, 0, 1), repeat=lattice.dim)), dtype=float)
    best = np.empty_like(X)
    for start in range(0, len(X), 4096):
        xb = X[start:start + 4096]
        cand = (base[start:start + 4096, None, :] + offsets[None]) @ G.T
        d = np.sum((cand - xb[:, None, :]) ** 2, axis=-1)
        best[start:start + 4096] = cand[np.arange(len(xb)), np.argmin(d, axis=1)]
    return best


def lattice_index(lattice: LatticeSpec, points) -> np.ndarray:
    """Integer coordinates of lattice points in the generator basis."""
    coeffs = np.linalg.solve(lattice.generator, np.atleast_2d(points).T).T
    return np.rint(coeffs).astype(np.int64)


def _fold(lattice: LatticeSpec, u: np.ndarray) -> np.ndarray:
    return u - nearest_point(lattice, u)


@dataclass(frozen=True)
class ShapedDitheredQuantizer:
    lattice: LatticeSpec
    M: np.ndarray

    def __post_init__(self):
        M = np.atleast_2d(np.asarray(self.M, dtype=float))
        if M.shape != (self.lattice.dim, self.lattice.dim):
            raise ValueError("shaping matrix dimension does not match the lattice")
        if abs(np.linalg.det(M)) < 1e-300:
            raise ValueError("shaping matrix must be invertible")
        M.setflags(write=False)
        object.__setattr__(self, "M", M)

    @classmethod
    def unshaped(cls, lattice: LatticeSpec) -> "ShapedDitheredQuantizer":
        return cls(lattice, np.eye(lattice.dim))

    @property
    def dim(self) -> int:
        return self.lattice.dim

    def error_covariance(self) -> np.ndarray:
        return self.lattice.second_moment * self.M @ self.M.T


def sample_dither(q: ShapedDitheredQuantizer, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Uniform samples over the shaped Voronoi cell M V0.

    Draws uniformly on the fundamental parallelepiped, folds into V0 by
    subtracting the nearest lattice point, then applies M.
    """
    m = 1 if size is None else int(size)
    u = rng.random((m, q.dim)) @ q.lattice.generator.T
    d = _fold(q.lattice, u) @ q.M.T
    return d[0] if size is None else d


def quantize_subtractive(q: ShapedDitheredQuantizer, x, dither):
    """Quantise x with subtractive dither.

    Returns ``(index, reconstruction, error)``; ``index`` holds integer
    lattice coordinates of the selected point in shaped coordinates, and
    ``error = reconstruction - x = -(fold of M^-1 (x + dither)) mapped by M``.
    """
    x = np.asarray(x, dtype=float)
    dither = np.asarray(dither, dtype=float)
    single = x.ndim <= 1
    X = np.atleast_2d(x.reshape(-1, q.dim) if single else x)
    Nu = np.atleast_2d(dither.reshape(-1, q.dim) if dither.ndim <= 1 else dither)
    Minv = np.linalg.inv(q.M)
    xs = X @ Minv.T
    nus = Nu @ Minv.T
    p = nearest_point(q.lattice, xs + nus)
    recon = (p - nus) @ q.M.T
    err = recon - X
    idx = lattice_index(q.lattice, p)
    if single:
        return idx[0], recon[0], err[0]
    return idx, recon, err


def shaping_from_covariance(K_target, lattice: LatticeSpec) -> np.ndarray:
    """Shaping matrix M = chol(K_target/eps) so the error covariance equals K_target."""
    K = check_covariance(K_target, name="K_target")
    if K.shape != (lattice.dim, lattice.dim):
        raise ValueError(f"K_target is {K.shape}, lattice dimension is {lattice.dim}")
    return cholesky_lower(K / lattice.second_moment, name="K_target")


def estimate_second_moment(lattice: LatticeSpec, rng: np.random.Generator, n: int = 200_000):
    """Monte-Carlo normalised second moment G and its standard error."""
    q = ShapedDitheredQuantizer.unshaped(lattice)
    u = sample_dither(q, rng, n)
    per = np.sum(u ** 2, axis=1) / lattice.dim
    norm = lattice.cell_volume ** (2.0 / lattice.dim)
    return float(per.mean() / norm), float(per.std(ddof=1) / np.sqrt(n) / norm)
