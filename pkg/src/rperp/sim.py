"""Monte-Carlo harness for the designed coders.

Each run pushes a Gaussian source through a designed coder whose channel is
either exact AWGN, a wire (no noise), or a subtractively dithered lattice
quantiser, and reports distortion, source/error correlation, channel-output
whiteness and the coding rate against R_perp at the measured distortion.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import signal, stats

from . import _kernels
from .design import (FeedbackTransformDesign, NoiseShaperDesign, TransformDesign,
                     cholesky_lower, min_phase_spectral_factor, relative_rms)
from .quantizer import (LatticeSpec, ShapedDitheredQuantizer, lattice_index, make_lattice,
                        nearest_point, sample_dither, shaping_from_covariance)
from .rdf import LOG2E, uncorr_at_distortion, vector_uncorr_rdf
from .spectra import ArModel, PsdGrid, check_covariance

RATE_LOSS_BOUND = 0.254


class SimulationDivergence(RuntimeError):
    """The reconstruction filter blew up."""


@dataclass(frozen=True)
class SimConfig:
    """Monte-Carlo settings.

    ``source`` is an ArModel or PsdGrid for stationary runs, or a covariance
    matrix for block transform coders; None means "the design's own source".
    ``channel`` is ``"awgn"``, ``"wire"``, a lattice name or a LatticeSpec.
    ``n_samples`` counts scalar samples per source.
    """

    source: object = None
    channel: object = "awgn"
    n_samples: int = 1_000_000
    n_parallel: int = 1
    seed: int = 0
    burn_in: int | None = None
    n_bins: int = 64
    n_batches: int = 20
    psd_grid: int = 256
    inverse: str = "recursive"
    rate_estimator: str = "auto"

    def __post_init__(self):
        if self.n_samples < 10_000:
            raise ValueError("n_samples must be at least 1e4")
        if self.inverse not in ("recursive", "fir"):
            raise ValueError("inverse must be 'recursive' or 'fir'")
        if self.rate_estimator not in ("auto", "binned", "requantize"):
            raise ValueError("rate_estimator must be auto, binned or requantize")


@dataclass
class SimReport:
    empirical_D: float
    empirical_D_se: float
    design_D: float
    crosscorr_max: float
    crosscorr_bound: float
    empirical_rate: float
    rate_se: float
    rate_perp: float
    rate_loss: float
    rate_loss_se: float
    psd_estimates: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @property
    def bound_ok(self) -> bool:
        return self.rate_loss <= RATE_LOSS_BOUND + 2.0 * self.rate_loss_se

    def to_dict(self) -> dict:
        out = {k: _jsonable(v) for k, v in self.__dict__.items() if k != "psd_estimates"}
        out["bound_ok"] = self.bound_ok
        out["psd_estimates"] = {k: {"omega": p.omegas.tolist(), "value": p.values.tolist()}
                                for k, p in self.psd_estimates.items()}
        return out


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        v = v.item()
    if isinstance(v, float) and not np.isfinite(v):
        return None
    return v


# -- estimators -------------------------------------------------------------

def estimate_psd(samples, grid_size: int = 256) -> PsdGrid:
    """Welch PSD (Hann window, 50% overlap) on the [-pi, pi) grid; mean equals power."""
    x = np.asarray(samples, dtype=float)
    if len(x) < 100 * grid_size:
        raise ValueError(f"need at least {100 * grid_size} samples, got {len(x)}")
    _, P = signal.welch(x, fs=2 * np.pi, window="hann", nperseg=grid_size,
                        noverlap=grid_size // 2, return_onesided=False, detrend=False,
                        scaling="density")
    return PsdGrid.from_values(2 * np.pi * np.fft.fftshift(P))


def _entropy_mm(counts: np.ndarray) -> float:
    """Plug-in entropy with the Miller-Madow correction, in nats."""
    counts = counts[counts > 0]
    n = counts.sum()
    p = counts / n
    return float(-np.sum(p * np.log(p)) + (len(counts) - 1) / (2.0 * n))


def _binned_conditional_entropy(idx: np.ndarray, bins: np.ndarray, n_bins: int) -> float:
    _, inv = np.unique(idx, return_inverse=True)
    key = bins.astype(np.int64) * (inv.max() + 1) + inv
    keys, counts = np.unique(key, return_counts=True)
    bin_of = keys // (inv.max() + 1)
    total = 0.0
    n = len(idx)
    for b in range(n_bins):
        c = counts[bin_of == b]
        if c.size:
            total += c.sum() / n * _entropy_mm(c)
    return total


def estimate_rate(indices, dithers, scheme: str = "binned", n_bins: int = 64,
                  n_batches: int = 20) -> tuple[float, float]:
    """Conditional index entropy H(index | dither) in bits, with a batch standard error.

    The scalar dither is binned into ``n_bins`` quantile bins; within each bin
    the Miller-Madow plug-in entropy of the indices is computed and the bins
    are averaged. Bins are halved (with a warning) while there are fewer than
    five samples per (bin, index) cell on average.
    """
    if scheme != "binned":
        raise ValueError("estimate_rate handles the 'binned' scheme; "
                         "use estimate_rate_requantized for vector quantisers")
    idx = np.asarray(indices)
    nu = np.asarray(dithers, dtype=float)
    if idx.ndim != 1 or nu.shape != idx.shape:
        raise ValueError("binned rate estimation expects 1-D indices and dithers of equal length")
    n = len(idx)
    if n < 100_000:
        raise ValueError(f"need at least 1e5 symbols, got {n}")
    n_distinct = len(np.unique(idx))
    while n_bins > 1 and n / (n_bins * n_distinct) < 5:
        warnings.warn(f"too few samples per (bin, index) cell; widening to {n_bins // 2} bins")
        n_bins //= 2
    edges = np.quantile(nu, np.linspace(0, 1, n_bins + 1)[1:-1])
    bins = np.searchsorted(edges, nu, side="right")
    h = _binned_conditional_entropy(idx, bins, n_bins)
    batch = [_binned_conditional_entropy(i, b, n_bins)
             for i, b in zip(np.array_split(idx, n_batches), np.array_split(bins, n_batches))]
    se = np.std(batch, ddof=1) / np.sqrt(n_batches)
    return h * LOG2E, float(se * LOG2E)


def _vector_entropy(points: np.ndarray, scale: float) -> float:
    # lattice points of Z^n, D4, E8 are half-integer multiples of the scale
    keys = np.rint(2.0 * points / scale).astype(np.int64)
    _, counts = np.unique(keys, axis=0, return_counts=True)
    return _entropy_mm(counts)


def estimate_rate_requantized(inputs, q: ShapedDitheredQuantizer, rng: np.random.Generator,
                              n_dithers: int = 32, n_batches: int = 10) -> tuple[float, float]:
    """(1/n) H(Q(V + nu) | nu) in bits per dimension for a lattice quantiser.

    The quantiser input V is independent of the current dither, so the
    conditional entropy is the average over fresh dither draws of the
    Miller-Madow entropy of the index distribution of the recorded V samples
    quantised with that one fixed dither.
    """
    V = np.atleast_2d(np.asarray(inputs, dtype=float))
    if V.shape[0] == 1 and q.dim == 1:
        V = V.T
    if q.lattice.kind is None:
        raise ValueError("requantisation needs a named lattice")
    Minv = np.linalg.inv(q.M)
    Vs = V @ Minv.T
    per_batch = []
    for chunk in np.array_split(Vs, n_batches):
        hs = []
        for _ in range(n_dithers):
            nu = sample_dither(q, rng) @ Minv.T
            p = nearest_point(q.lattice, chunk + nu)
            hs.append(_vector_entropy(p, q.lattice.scale))
        per_batch.append(np.mean(hs))
    per_batch = np.asarray(per_batch) * LOG2E / q.dim
    return float(per_batch.mean()), float(per_batch.std(ddof=1) / np.sqrt(n_batches))


def _autocorr(x: np.ndarray, max_lag: int) -> np.ndarray:
    x = x - x.mean()
    n = len(x)
    F = np.fft.rfft(x, 2 * n)
    r = np.fft.irfft(F * np.conj(F))[:max_lag + 1]
    return r / r[0]


def crosscorr_with_neff(x: np.ndarray, z: np.ndarray, max_lag: int = 256):
    """Lag-0 correlation of two stationary series and the effective sample size.

    Under zero cross-correlation the estimator variance is
    (1/n) * sum_k rho_x(k) rho_z(k) (Bartlett), which defines n_eff.
    """
    n = len(x)
    rho = float(np.corrcoef(x, z)[0, 1])
    rx = _autocorr(x, max_lag)
    rz = _autocorr(z, max_lag)
    tau = max(1.0 + 2.0 * float(np.sum(rx[1:] * rz[1:])), 1e-3)
    return rho, n / tau


def family_bound(n_tests: int, n_eff: float, sigmas: float = 3.0) -> float:
    """Correlation threshold with the family-wise false-alarm rate of one ``sigmas`` test.

    Sidak correction over ``n_tests`` correlations; equals sigmas/sqrt(n_eff)
    for a single test.
    """
    alpha = 2.0 * stats.norm.sf(sigmas)
    per_test = -np.expm1(np.log1p(-alpha) / n_tests)
    return float(stats.norm.isf(per_test / 2.0) / np.sqrt(n_eff))


def _batch_means_se(x: np.ndarray, n_batches: int) -> float:
    means = np.array([b.mean() for b in np.array_split(x, n_batches)])
    return float(means.std(ddof=1) / np.sqrt(n_batches))


def _excess_kurtosis(w: np.ndarray) -> float:
    w = w - w.mean()
    return float(np.mean(w ** 4) / np.mean(w ** 2) ** 2 - 3.0)


# -- sources ----------------------------------------------------------------

def generate_stationary(source, n: int, rng: np.random.Generator, warmup: int = 2000) -> np.ndarray:
    """n samples of a stationary Gaussian process given as ArModel or PsdGrid."""
    if isinstance(source, ArModel):
        if source.order:
            rmax = float(np.abs(np.roots(source.denominator())).max())
            warmup = max(warmup, int(40.0 / max(1.0 - rmax, 1e-3)))
        e = rng.standard_normal(n + warmup) * np.sqrt(source.innovation_variance)
        return signal.lfilter([1.0], source.denominator(), e)[warmup:]
    if isinstance(source, PsdGrid):
        h = min_phase_spectral_factor(source, source.grid_size // 8)
        e = rng.standard_normal(n + len(h))
        return signal.lfilter(h, [1.0], e)[len(h):]
    raise TypeError(f"unsupported stationary source {type(source).__name__}")


def generate_blocks(K_X, n_blocks: int, rng: np.random.Generator) -> np.ndarray:
    C = cholesky_lower(check_covariance(K_X, name="K_X"), name="K_X")
    return rng.standard_normal((n_blocks, len(C))) @ C.T


def _resolve_lattice(channel, sigma_w2: float) -> LatticeSpec:
    lat = make_lattice(channel) if isinstance(channel, str) else channel
    if not isinstance(lat, LatticeSpec):
        raise TypeError(f"unsupported channel {channel!r}")
    if lat.kind is None:
        raise ValueError("simulation needs a named lattice (Z<n>, D4, E8)")
    # scale so the unshaped cell second moment matches the AWGN variance
    return lat.scaled_to(sigma_w2)


# -- block transform coders -------------------------------------------------

def run_transform_coder(design: TransformDesign | FeedbackTransformDesign, cfg: SimConfig) -> SimReport:
    """Simulate U = A X, V = U - F W, U_hat = V + W, Y = A^-1 U_hat over i.i.d. blocks.

    For a plain TransformDesign, A = T and F = 0. Quantised channels use a
    scalar dithered uniform quantiser per coordinate, in causal order.
    """
    N = design.size
    K_X = design.K_X if cfg.source is None else check_covariance(cfg.source, name="source")
    if K_X.shape != (N, N):
        raise ValueError(f"design is {N}-dimensional, source covariance is {K_X.shape}")
    rng = np.random.default_rng(cfg.seed)
    nb = cfg.n_samples // N
    A = design.analysis()
    F = design.feedback()
    sw2 = design.sigma_w2
    X = generate_blocks(K_X, nb, rng)
    U = X @ A.T
    index = dith = None
    if cfg.channel == "awgn":
        W = rng.standard_normal((nb, N)) * np.sqrt(sw2)
        V = U - W @ F.T
    elif cfg.channel == "wire":
        W = np.zeros((nb, N))
        V = U
    else:
        lat = _resolve_lattice(cfg.channel, sw2)
        if lat.dim != 1:
            raise ValueError("transform coders quantise scalar coordinates; use a 1-D lattice")
        q = ShapedDitheredQuantizer.unshaped(lat)
        dith = sample_dither(q, rng, nb * N).reshape(nb, N)
        V, W, P = _kernels.feedback_transform_loop(lat.scale, np.ascontiguousarray(U),
                                                   np.ascontiguousarray(F), dith)
        index = np.rint(P / lat.scale).astype(np.int64)
    Uhat = V + W
    Y = np.linalg.solve(A, Uhat.T).T
    Z = Y - X

    per_block = np.mean(Z ** 2, axis=1)
    D = float(per_block.mean())
    D_se = float(per_block.std(ddof=1) / np.sqrt(nb))
    Xc = (X - X.mean(0)) / X.std(0)
    Zs = Z.std(0)
    Zc = (Z - Z.mean(0)) / np.where(Zs > 0, Zs, 1.0)
    cross = np.abs(Xc.T @ Zc / nb)
    cross_max = 0.0 if cfg.channel == "wire" else float(cross.max())
    K_U = np.cov(Uhat.T, bias=True).reshape(N, N)
    off = K_U - np.diag(np.diag(K_U))

    def gaussian_rate(uh):
        return float(0.5 * np.mean(np.log2(np.mean(uh ** 2, axis=0) / sw2)))

    def rperp(d):
        return vector_uncorr_rdf(K_X, d)[0].rate if d > 0 else float("nan")

    batches = np.array_split(np.arange(nb), cfg.n_batches)
    if index is not None:
        rates = [estimate_rate(index[:, k], dith[:, k], n_bins=cfg.n_bins,
                               n_batches=cfg.n_batches) for k in range(N)]
        rate = float(np.mean([r for r, _ in rates]))
        rate_se = float(np.sqrt(np.sum([s ** 2 for _, s in rates])) / N)
        batch_rates = [np.mean([_binned_rate_fixed(index[b, k], dith[b, k], cfg.n_bins)
                                for k in range(N)]) for b in batches]
    elif cfg.channel == "wire":
        rate, rate_se, batch_rates = float("inf"), 0.0, None
    else:
        rate = gaussian_rate(Uhat)
        batch_rates = [gaussian_rate(Uhat[b]) for b in batches]
        rate_se = float(np.std(batch_rates, ddof=1) / np.sqrt(cfg.n_batches))

    if cfg.channel == "wire":
        rp, loss, loss_se = float("nan"), float("nan"), 0.0
    else:
        rp = rperp(D)
        loss = rate - rp
        losses = [br - rperp(float(per_block[b].mean())) for br, b in zip(batch_rates, batches)]
        loss_se = float(np.std(losses, ddof=1) / np.sqrt(cfg.n_batches))

    diagnostics = {
        "architecture": "feedback-transform" if isinstance(design, FeedbackTransformDesign)
        else "transform",
        "channel": _channel_name(cfg.channel),
        "n_blocks": nb,
        "block_size": N,
        "max_abs_reconstruction_error": float(np.abs(Z).max()) if cfg.channel == "wire" else None,
        "K_U_offdiag_rel": float(np.linalg.norm(off) / np.linalg.norm(K_U)),
        "K_U_offdiag_max_corr": float(np.max(np.abs(off) / np.sqrt(np.outer(np.diag(K_U), np.diag(K_U))))),
        "K_U_offdiag_bound": family_bound(max(N * (N - 1) // 2, 1), nb),
        "gaussian_channel_rate": gaussian_rate(Uhat) if cfg.channel != "wire" else None,
        "channel_error_excess_kurtosis": _excess_kurtosis(W.ravel()) if cfg.channel != "wire" else None,
    }
    return SimReport(D, D_se, design.point.distortion, cross_max, family_bound(N * N, nb),
                     rate, rate_se, rp, loss, loss_se, {}, diagnostics)


def _binned_rate_fixed(idx, nu, n_bins):
    edges = np.quantile(nu, np.linspace(0, 1, n_bins + 1)[1:-1])
    return LOG2E * _binned_conditional_entropy(idx, np.searchsorted(edges, nu, side="right"), n_bins)


def _channel_name(channel) -> str:
    return channel if isinstance(channel, str) else channel.name


# -- noise-shaping feedback quantisers --------------------------------------

def _default_burn_in(design: NoiseShaperDesign, cfg: SimConfig) -> int:
    burn = 10 * design.fir_len if cfg.burn_in is None else cfg.burn_in
    if burn < 10 * design.fir_len:
        raise ValueError(f"burn_in must be at least 10*fir_len = {10 * design.fir_len}")
    return burn


def _reconstruct(design: NoiseShaperDesign, uhat: np.ndarray, inverse: str) -> np.ndarray:
    if inverse == "recursive":
        y = signal.lfilter([1.0], design.a, uhat, axis=0)
    else:
        y = signal.lfilter(design.a_inv, [1.0], uhat, axis=0)
    return y


def _run_loops(design: NoiseShaperDesign, cfg: SimConfig, n_loops: int, lattice):
    """Shared engine: n_loops independent sources, channel per cfg/lattice."""
    rng = np.random.default_rng(cfg.seed)
    burn = _default_burn_in(design, cfg)
    T = cfg.n_samples + burn
    source = design.psd if cfg.source is None else cfg.source
    X = np.column_stack([generate_stationary(source, T, rng) for _ in range(n_loops)])
    AX = signal.lfilter(design.a, [1.0], X, axis=0)
    f = np.asarray(design.f, dtype=float)
    sw2 = design.sigma_w2
    points = dith = None
    if lattice is None and cfg.channel == "awgn":
        W = rng.standard_normal((T, n_loops)) * np.sqrt(sw2)
        V = AX - signal.lfilter(f, [1.0], W, axis=0)
    elif lattice is None and cfg.channel == "wire":
        W = np.zeros_like(AX)
        V = AX
    else:
        q = ShapedDitheredQuantizer(lattice, shaping_from_covariance(sw2 * np.eye(n_loops), lattice))
        dith = sample_dither(q, rng, T)
        V, W, points = _kernels.feedback_bank_loop(lattice.kind, lattice.scale,
                                                   np.ascontiguousarray(AX), f, dith)
    Uhat = V + W
    Y = _reconstruct(design, Uhat, cfg.inverse)
    if not np.all(np.isfinite(Y)) or np.abs(Y).max() > 1e8 * (X.std() + 1.0):
        raise SimulationDivergence("reconstruction diverged; A(z)^-1 realisation is unstable")
    keep = slice(burn, None)
    return dict(X=X[keep], Z=(Y - X)[keep], U=Uhat[keep], V=V[keep], W=W[keep],
                points=None if points is None else points[keep],
                dither=None if dith is None else dith[keep], rng=rng)


def _stationary_report(design: NoiseShaperDesign, cfg: SimConfig, run: dict,
                       lattice: LatticeSpec | None) -> SimReport:
    X, Z, U, V, W = run["X"], run["Z"], run["U"], run["V"], run["W"]
    P = X.shape[1]
    n = X.shape[0]
    sw2 = design.sigma_w2
    zz = np.mean(Z ** 2, axis=1)
    D = float(zz.mean())
    D_se = _batch_means_se(zz, cfg.n_batches)
    wire = lattice is None and cfg.channel == "wire"

    cc = [crosscorr_with_neff(X[:, i], Z[:, i]) if not wire else (0.0, float(n)) for i in range(P)]
    cross = max(abs(c[0]) for c in cc)
    n_eff = min(c[1] for c in cc)

    def rperp(d):
        return uncorr_at_distortion(design.psd, d)[0].rate

    def gaussian_rate(u):
        return float(0.5 * np.log2(np.mean(u ** 2) / sw2))

    batches = np.array_split(np.arange(n), cfg.n_batches)
    estimator = cfg.rate_estimator
    if lattice is not None and estimator == "auto":
        estimator = "binned" if lattice.dim == 1 else "requantize"
    if wire:
        rate, rate_se, batch_rates = float("inf"), 0.0, None
    elif lattice is None:
        rate = gaussian_rate(U)
        batch_rates = [gaussian_rate(U[b]) for b in batches]
        rate_se = float(np.std(batch_rates, ddof=1) / np.sqrt(cfg.n_batches))
    elif estimator == "binned":
        if lattice.dim != 1:
            raise ValueError("binned rate estimation needs a scalar quantiser")
        idx = np.rint(run["points"][:, 0] / lattice.scale).astype(np.int64)
        nu = run["dither"][:, 0]
        rate, rate_se = estimate_rate(idx, nu, n_bins=cfg.n_bins, n_batches=cfg.n_batches)
        batch_rates = [_binned_rate_fixed(idx[b], nu[b], cfg.n_bins) for b in batches]
    else:
        q = ShapedDitheredQuantizer.unshaped(lattice)
        rate, rate_se = estimate_rate_requantized(V, q, run["rng"], n_batches=cfg.n_batches)
        batch_rates = None

    if wire:
        rp, loss, loss_se = float("nan"), float("nan"), 0.0
    else:
        rp = rperp(D)
        loss = rate - rp
        if batch_rates is not None:
            losses = [br - rperp(float(zz[b].mean())) for br, b in zip(batch_rates, batches)]
            loss_se = float(np.std(losses, ddof=1) / np.sqrt(cfg.n_batches))
        else:
            slope = (rperp(D * 1.001) - rperp(D * 0.999)) / (0.002 * D)
            loss_se = float(np.hypot(rate_se, slope * D_se))

    psds = {}
    diagnostics = {
        "architecture": "noise-shaper",
        "channel": lattice.name if lattice is not None else cfg.channel,
        "n_parallel": P,
        "n_samples": n,
        "n_eff": n_eff,
        "fir_len": design.fir_len,
        "inverse": cfg.inverse,
    }
    if wire:
        diagnostics["max_abs_reconstruction_error"] = float(np.abs(Z).max())
    else:
        G = cfg.psd_grid
        Sz = _average_psd(Z, G)
        Su = _average_psd(U, G)
        target = _resample(design.target_Sz, G)
        psds = {"S_U": Su, "S_Z": Sz, "S_Z_target": target}
        diagnostics.update({
            "S_Z_rms": relative_rms(Sz.values, target.values),
            "S_U_flatness_rms": relative_rms(Su.values, np.full(G, Su.variance)),
            "distortion_psd_ratio": Sz.variance / D,
            "sigma_u2_hat": float(np.mean(U ** 2)),
            "sigma_u2_design": design.sigma_u2,
            "gaussian_channel_rate": gaussian_rate(U),
            "channel_error_excess_kurtosis": _excess_kurtosis(W.ravel()),
        })
    return SimReport(D, D_se, design.point.distortion, cross, family_bound(P, n_eff),
                     rate, rate_se, rp, loss, loss_se, psds, diagnostics)


def _average_psd(S: np.ndarray, G: int) -> PsdGrid:
    vals = np.mean([estimate_psd(S[:, i], G).values for i in range(S.shape[1])], axis=0)
    return PsdGrid.from_values(vals)


def _resample(psd: PsdGrid, G: int) -> PsdGrid:
    if psd.grid_size % G == 0:
        return PsdGrid.from_values(psd.values[::psd.grid_size // G])
    from .spectra import frequency_grid
    w = frequency_grid(G)
    vals = np.interp(w, psd.omegas, psd.values, period=2 * np.pi)
    return PsdGrid(w, vals)


def run_feedback_quantizer(design: NoiseShaperDesign, cfg: SimConfig) -> SimReport:
    """Noise-feedback loop V_k = (a*x)_k - (f*w)_k, U_hat = V + W, Y = A^-1 U_hat.

    With a quantised channel the loop uses a scalar dithered quantiser; this
    is the one-loop case of run_parallel_bank.
    """
    if cfg.channel in ("awgn", "wire"):
        run = _run_loops(design, cfg, 1, None)
        return _stationary_report(design, cfg, run, None)
    lattice = _resolve_lattice(cfg.channel, design.sigma_w2)
    if lattice.dim != 1:
        raise ValueError("run_feedback_quantizer uses a scalar quantiser; "
                         "use run_parallel_bank for lattices")
    return run_parallel_bank(design, lattice, cfg)


def run_parallel_bank(design: NoiseShaperDesign, lattice, cfg: SimConfig) -> SimReport:
    """n_parallel independent feedback loops whose channel is one lattice quantiser.

    At each time step the n_parallel channel inputs form one vector that is
    quantised jointly; reports aggregate over the loops.
    """
    lattice = _resolve_lattice(lattice, design.sigma_w2)
    if cfg.n_parallel != lattice.dim:
        raise ValueError(f"n_parallel={cfg.n_parallel} does not match lattice dimension {lattice.dim}")
    run = _run_loops(design, cfg, lattice.dim, lattice)
    return _stationary_report(design, cfg, run, lattice)
