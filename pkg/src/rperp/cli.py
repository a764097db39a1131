"""Command-line front end.

    rperp rdf      --config cfg.json        R(D) and R_perp(D) curves
    rperp design   --config cfg.json        synthesise coders, write design files
    rperp simulate --config cfg.json        Monte-Carlo run of the designed coders
    rperp sweep    --config cfg.json        rate loss versus lattice dimension

Exit codes: 0 ok, 2 config error, 3 numerical failure, 4 rate-loss bound violated.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import io
from .design import (DesignError, FactorizationError, design_causal_transform,
                     design_feedback_transform, design_noise_shaper)
from .quantizer import make_lattice
from .rdf import (shannon_at_distortion, uncorr_at_distortion, vector_shannon_rdf,
                  vector_uncorr_rdf)
from .sim import (SimConfig, SimulationDivergence, run_feedback_quantizer, run_parallel_bank,
                  run_transform_coder)
from .spectra import ArModel, PsdGrid, ar_to_psd, check_covariance, psd_to_covariance

SCHEMA_VERSION = 1
ARCHITECTURES = ("test-channel", "transform", "feedback-transform", "noise-shaper")

RDF_COLUMNS = ["D", "R_shannon", "R_perp", "theta", "alpha"]
SUMMARY_COLUMNS = ["architecture", "lattice", "D", "rate", "rate_loss", "bound_ok"]
SWEEP_COLUMNS = ["lattice", "dimension", "D", "rate", "rate_se", "rate_perp",
                 "rate_loss", "rate_loss_se"]

CSV_HELP = f"""
output files (written to --out):
  rdf       rdf.csv        columns: {",".join(RDF_COLUMNS)}
                           R_shannon is 0 for D at or above the source variance
  design    design_<i>.json, design_summary.txt
  simulate  report_<i>.json, summary.csv, psd_<i>.csv
            summary.csv columns: {",".join(SUMMARY_COLUMNS)}
            psd_<i>.csv columns: omega,S_U,S_Z,S_Z_target
  sweep     sweep.csv      columns: {",".join(SWEEP_COLUMNS)}

exit codes: 0 ok, 2 config error, 3 numerical failure, 4 rate-loss bound violated
"""


class ConfigError(ValueError):
    pass


class BoundViolation(RuntimeError):
    pass


@dataclass
class ExperimentConfig:
    source: dict
    distortions: list
    architecture: str = "noise-shaper"
    channel: str = "awgn"
    sigma_w2: float = 1.0
    fir_len: int = 128
    block_size: int = 8
    grid_size: int = 8192
    n_samples: int = 1_000_000
    lattices: list = field(default_factory=lambda: ["Z1", "D4", "E8"])
    seed: int = 0
    output_dir: str = "out"

    @classmethod
    def from_dict(cls, raw: dict, base_dir: Path = Path(".")) -> "ExperimentConfig":
        raw = dict(raw)
        version = raw.pop("schema_version", None)
        if version != SCHEMA_VERSION:
            raise ConfigError(f"schema_version: expected {SCHEMA_VERSION}, got {version!r}")
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        if "source" not in raw:
            raise ConfigError("source: missing")
        if "distortions" not in raw:
            raise ConfigError("distortions: missing")
        cfg = cls(**raw)
        cfg.source = _check_source(cfg.source, base_dir)
        cfg.distortions = _expand_distortions(cfg.distortions)
        if cfg.architecture not in ARCHITECTURES:
            raise ConfigError(f"architecture: must be one of {', '.join(ARCHITECTURES)}")
        if cfg.channel != "awgn":
            try:
                make_lattice(cfg.channel)
            except ValueError as exc:
                raise ConfigError(f"channel: {exc}") from None
        for name in ("fir_len", "block_size", "grid_size", "n_samples", "seed"):
            v = getattr(cfg, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 0:
                raise ConfigError(f"{name}: must be a nonnegative integer")
        if not (isinstance(cfg.sigma_w2, (int, float)) and cfg.sigma_w2 > 0):
            raise ConfigError("sigma_w2: must be positive")
        for lat in cfg.lattices:
            try:
                make_lattice(lat)
            except ValueError as exc:
                raise ConfigError(f"lattices: {exc}") from None
        return cfg


def _check_source(src, base_dir: Path) -> dict:
    if not isinstance(src, dict) or "type" not in src:
        raise ConfigError("source: must be an object with a 'type'")
    kind = src["type"]
    allowed = {"ar": {"type", "coeffs", "innovation_variance"},
               "psd-file": {"type", "path"},
               "covariance-file": {"type", "path"}}
    if kind not in allowed:
        raise ConfigError("source.type: must be ar, psd-file or covariance-file")
    extra = sorted(set(src) - allowed[kind])
    if extra:
        raise ConfigError(f"source: unknown keys {', '.join(extra)}")
    src = dict(src)
    if kind != "ar":
        if "path" not in src:
            raise ConfigError("source.path: missing")
        p = Path(src["path"])
        src["path"] = str(p if p.is_absolute() else base_dir / p)
    return src


def _expand_distortions(d) -> list:
    if isinstance(d, dict):
        extra = sorted(set(d) - {"start", "stop", "num"})
        if extra or not {"start", "stop", "num"} <= set(d):
            raise ConfigError("distortions: log-spaced range needs exactly start, stop, num")
        if not (d["start"] > 0 and d["stop"] > 0 and int(d["num"]) >= 1):
            raise ConfigError("distortions: start and stop must be positive, num >= 1")
        values = np.geomspace(d["start"], d["stop"], int(d["num"])).tolist()
    elif isinstance(d, (list, tuple)) and d:
        values = [float(x) for x in d]
    else:
        raise ConfigError("distortions: must be a non-empty list or {start, stop, num}")
    if any(not v > 0 for v in values):
        raise ConfigError("distortions: all values must be positive")
    return sorted(values)


# -- source resolution ------------------------------------------------------

def load_source(cfg: ExperimentConfig):
    """Return (process, psd, K_X): the generating model, its PSD and block covariance."""
    src = cfg.source
    if src["type"] == "ar":
        try:
            model = ArModel(tuple(src.get("coeffs", ())), float(src.get("innovation_variance", 1.0)))
        except ValueError as exc:
            raise ConfigError(f"source: {exc}") from None
        psd = ar_to_psd(model, cfg.grid_size)
        return model, psd, None
    if src["type"] == "psd-file":
        try:
            psd = PsdGrid.from_csv(src["path"])
        except (OSError, ValueError) as exc:
            raise ConfigError(f"source.path: {exc}") from None
        return psd, psd, None
    try:
        K = check_covariance(np.loadtxt(src["path"], delimiter=",", ndmin=2), name="K_X")
    except (OSError, ValueError) as exc:
        raise ConfigError(f"source.path: {exc}") from None
    return None, None, K


def _block_covariance(cfg, psd, K):
    if K is not None:
        return K
    try:
        return psd_to_covariance(psd, cfg.block_size)
    except ValueError as exc:
        raise ConfigError(f"block_size: {exc}") from None


# -- commands ---------------------------------------------------------------

def cmd_rdf(cfg: ExperimentConfig) -> Path:
    _, psd, K = load_source(cfg)
    rows = []
    for D in cfg.distortions:
        if K is None:
            variance = psd.variance
            if D < variance:
                sp, _ = shannon_at_distortion(psd, D)
                r_sh, theta = sp.rate, sp.parameter
            else:
                r_sh, theta = 0.0, float(psd.values.max())
            up, _ = uncorr_at_distortion(psd, D)
        else:
            variance = float(np.trace(K)) / len(K)
            if D < variance:
                sp = vector_shannon_rdf(K, D)
                r_sh, theta = sp.rate, sp.parameter
            else:
                r_sh, theta = 0.0, float(np.linalg.eigvalsh(K).max())
            up, _ = vector_uncorr_rdf(K, D)
        rows.append((D, r_sh, up.rate, theta, up.parameter))
    _validate_rdf_rows(rows)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "rdf.csv"
    io.write_csv(path, RDF_COLUMNS, rows)
    return path


def _validate_rdf_rows(rows):
    prev = None
    for D, r_sh, r_perp, theta, alpha in rows:
        if not (r_sh >= 0 and r_perp > 0 and D > 0 and theta > 0 and alpha > 0):
            raise ArithmeticError(f"invalid RDF point at D={D}")
        if r_perp < r_sh - 1e-9:
            raise ArithmeticError(f"R_perp < R at D={D}")
        if prev is not None and (r_perp > prev[2] + 1e-12 or r_sh > prev[1] + 1e-12):
            raise ArithmeticError(f"rate increased with distortion at D={D}")
        prev = (D, r_sh, r_perp)


def _designs(cfg: ExperimentConfig):
    process, psd, K = load_source(cfg)
    arch = cfg.architecture
    if arch == "test-channel":
        raise ConfigError("architecture: test-channel has nothing to design or simulate")
    designs = []
    for D in cfg.distortions:
        if arch == "noise-shaper":
            if psd is None:
                raise ConfigError("source: noise-shaper needs a stationary source (ar or psd-file)")
            designs.append(design_noise_shaper(psd, D, cfg.sigma_w2, cfg.fir_len))
        else:
            KX = _block_covariance(cfg, psd, K)
            maker = design_causal_transform if arch == "transform" else design_feedback_transform
            designs.append(maker(KX, D, cfg.sigma_w2))
    return process, designs


def _design_summary(design) -> str:
    lines = [f"kind: {io.design_to_dict(design)['kind']}",
             f"D: {design.point.distortion!r}",
             f"R_perp: {design.point.rate!r}",
             f"parameter(alpha): {design.point.parameter!r}",
             f"sigma_w2: {design.sigma_w2!r}"]
    if hasattr(design, "T"):
        T = design.T
        is_scaled_identity = np.allclose(T, T[0, 0] * np.eye(len(T)), atol=1e-12)
        lines.append(f"T = c*I: {str(is_scaled_identity).lower()}"
                     + (f" (c = {T[0, 0]!r})" if is_scaled_identity else ""))
        lines.append(f"factorization_residual: {design.factorization_residual():.3e}")
    elif hasattr(design, "F"):
        lines.append(f"factorization_residual: {design.factorization_residual():.3e}")
        lines.append(f"K_U_offdiag_residual: {design.offdiag_residual():.3e}")
        lines.append(f"channel_rate_minus_R_perp: {design.channel_rate() - design.point.rate:.3e}")
    else:
        for k, v in design.diagnostics.items():
            lines.append(f"{k}: {v:.3e}")
    return "\n".join(lines)


def cmd_design(cfg: ExperimentConfig) -> list[Path]:
    _, designs = _designs(cfg)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    summary = []
    for i, d in enumerate(designs):
        p = out / f"design_{i}.json"
        io.save_design(d, p)
        paths.append(p)
        summary.append(f"[design_{i}]\n{_design_summary(d)}\n")
    (out / "design_summary.txt").write_text("\n".join(summary))
    return paths


def _sim_config(cfg: ExperimentConfig, source, **kw) -> SimConfig:
    return SimConfig(source=source, channel=cfg.channel, n_samples=cfg.n_samples,
                     seed=cfg.seed, **kw)


def _check_rate_budget(cfg: ExperimentConfig) -> None:
    # the binned rate estimator needs 1e5 symbols per scalar quantiser stream
    if cfg.channel == "awgn" or make_lattice(cfg.channel).dim > 1:
        return
    per_stream = cfg.n_samples // (1 if cfg.architecture == "noise-shaper" else cfg.block_size)
    if per_stream < 100_000:
        raise ConfigError(f"n_samples: a quantised channel needs at least 1e5 samples per "
                          f"scalar stream, this config gives {per_stream}")


def cmd_simulate(cfg: ExperimentConfig) -> list:
    _check_rate_budget(cfg)
    process, designs = _designs(cfg)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for i, d in enumerate(designs):
        if cfg.architecture == "noise-shaper":
            lattice = None if cfg.channel == "awgn" else make_lattice(cfg.channel)
            if lattice is not None and lattice.dim > 1:
                rep = run_parallel_bank(d, lattice, _sim_config(cfg, process, n_parallel=lattice.dim))
            else:
                rep = run_feedback_quantizer(d, _sim_config(cfg, process))
        else:
            rep = run_transform_coder(d, _sim_config(cfg, None))
        if not rep.empirical_D > 0:
            raise ArithmeticError("simulation produced a nonpositive distortion")
        io.dump_json(rep.to_dict(), out / f"report_{i}.json")
        if rep.psd_estimates:
            ps = rep.psd_estimates
            io.write_csv(out / f"psd_{i}.csv", ["omega", "S_U", "S_Z", "S_Z_target"],
                         zip(ps["S_U"].omegas, ps["S_U"].values, ps["S_Z"].values,
                             ps["S_Z_target"].values))
        rows.append((cfg.architecture, cfg.channel, d.point.distortion, rep.empirical_rate,
                     rep.rate_loss, rep.bound_ok))
    io.write_csv(out / "summary.csv", SUMMARY_COLUMNS, rows)
    if not all(r[-1] for r in rows):
        raise BoundViolation("measured rate loss exceeds the 0.254 bit/dimension bound")
    return rows


def cmd_sweep(cfg: ExperimentConfig) -> list:
    cfg = replace(cfg, architecture="noise-shaper")
    process, designs = _designs(cfg)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for d in designs:
        for name in cfg.lattices:
            lat = make_lattice(name)
            sc = SimConfig(source=process, channel=name, n_samples=cfg.n_samples,
                           n_parallel=lat.dim, seed=cfg.seed, rate_estimator="requantize")
            rep = run_parallel_bank(d, lat, sc)
            rows.append((name, lat.dim, d.point.distortion, rep.empirical_rate, rep.rate_se,
                         rep.rate_perp, rep.rate_loss, rep.rate_loss_se))
    io.write_csv(out / "sweep.csv", SWEEP_COLUMNS, rows)
    return rows


COMMANDS = {"rdf": cmd_rdf, "design": cmd_design, "simulate": cmd_simulate, "sweep": cmd_sweep}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rperp", description="Uncorrelated-distortion rate-distortion toolkit.",
        epilog=CSV_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, epilog=CSV_HELP,
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("--config", required=True, type=Path, help="JSON experiment config")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", type=Path, help="override the output directory")
        p.add_argument("--grid", type=int, help="override the PSD grid size")
        p.add_argument("--samples", type=int, help="override the Monte-Carlo sample count")
    return parser


def load_config(args) -> ExperimentConfig:
    try:
        raw = json.loads(args.config.read_text())
    except OSError as exc:
        raise ConfigError(f"config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: invalid JSON ({exc})") from None
    if not isinstance(raw, dict):
        raise ConfigError("config: top level must be an object")
    for flag, key in (("seed", "seed"), ("grid", "grid_size"), ("samples", "n_samples")):
        v = getattr(args, flag)
        if v is not None:
            raw[key] = v
    if args.out is not None:
        raw["output_dir"] = str(args.out)
    return ExperimentConfig.from_dict(raw, args.config.parent)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        result = COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except BoundViolation as exc:
        print(f"bound violation: {exc}", file=sys.stderr)
        return 4
    except (DesignError, FactorizationError, SimulationDivergence, ArithmeticError,
            np.linalg.LinAlgError, ValueError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    if isinstance(result, Path):
        print(result)
    elif isinstance(result, list):
        for r in result:
            print(*(io._fmt(v) for v in (r if isinstance(r, tuple) else (r,))), sep=",")
    return 0


if __name__ == "__main__":
    sys.exit(main())
