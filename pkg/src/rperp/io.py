"""JSON serialisation of designs and reports, and CSV writers."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .design import FeedbackTransformDesign, NoiseShaperDesign, TransformDesign
from .rdf import RdfPoint
from .spectra import PsdGrid

FORMAT_VERSION = 1


def _arr(a) -> list:
    return np.asarray(a, dtype=float).tolist()


def _clean(v):
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, np.ndarray):
        return _clean(v.tolist())
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        v = v.item()
    if isinstance(v, float) and not np.isfinite(v):
        return None
    return v


def design_to_dict(design) -> dict:
    point = {"rate": design.point.rate, "distortion": design.point.distortion,
             "parameter": design.point.parameter}
    if isinstance(design, TransformDesign):
        return {"format_version": FORMAT_VERSION, "kind": "transform", "T": _arr(design.T),
                "sigma_w2": design.sigma_w2, "K_Z": _arr(design.Kz), "K_X": _arr(design.K_X),
                "point": point}
    if isinstance(design, FeedbackTransformDesign):
        return {"format_version": FORMAT_VERSION, "kind": "feedback-transform",
                "A": _arr(design.A), "F": _arr(design.F), "Ddiag": _arr(design.Ddiag),
                "sigma_w2": design.sigma_w2, "K_Z": _arr(design.Kz), "K_X": _arr(design.K_X),
                "point": point}
    if isinstance(design, NoiseShaperDesign):
        return {"format_version": FORMAT_VERSION, "kind": "noise-shaper",
                "a": _arr(design.a), "a_inv": _arr(design.a_inv), "f": _arr(design.f),
                "sigma_w2": design.sigma_w2, "sigma_u2": design.sigma_u2,
                "source_psd": _arr(design.psd.values), "target_Sz": _arr(design.target_Sz.values),
                "point": point, "diagnostics": _clean(design.diagnostics)}
    raise TypeError(f"cannot serialise {type(design).__name__}")


def design_from_dict(d: dict):
    if d.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported design format version {d.get('format_version')!r}")
    point = RdfPoint(**d["point"])
    kind = d["kind"]
    if kind == "transform":
        return TransformDesign(np.array(d["T"]), d["sigma_w2"], np.array(d["K_Z"]),
                               np.array(d["K_X"]), point)
    if kind == "feedback-transform":
        return FeedbackTransformDesign(np.array(d["A"]), np.array(d["F"]), np.array(d["Ddiag"]),
                                       d["sigma_w2"], np.array(d["K_Z"]), np.array(d["K_X"]), point)
    if kind == "noise-shaper":
        return NoiseShaperDesign(np.array(d["a"]), np.array(d["a_inv"]), np.array(d["f"]),
                                 d["sigma_w2"], d["sigma_u2"],
                                 PsdGrid.from_values(d["target_Sz"]),
                                 PsdGrid.from_values(d["source_psd"]), point,
                                 d.get("diagnostics", {}))
    raise ValueError(f"unknown design kind {kind!r}")


def dump_json(obj, path) -> None:
    Path(path).write_text(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")


def save_design(design, path) -> None:
    dump_json(design_to_dict(design), path)


def load_design(path):
    return design_from_dict(json.loads(Path(path).read_text()))


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def write_index_csv(path, indices) -> None:
    """Integer lattice coordinates, one quantiser output per row, for external entropy coders."""
    idx = np.atleast_2d(np.asarray(indices))
    if idx.shape[0] == 1 and np.asarray(indices).ndim == 1:
        idx = idx.T
    if not np.issubdtype(idx.dtype, np.integer):
        raise TypeError("indices must be integers")
    write_csv(path, [f"i{k}" for k in range(idx.shape[1])], idx.tolist())
