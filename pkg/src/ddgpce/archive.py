"""JSON archives of fitted surrogates.

Floats are written with Python's shortest round-trip representation, so a
loaded archive reproduces every stored number exactly.  No timestamps are
stored, which keeps reruns with identical seeds byte-identical.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .bifidelity import BiFidelitySurrogate, FourierLink
from .distributions import RandomInputModel
from .errors import ConfigError
from .multiindex import MultiIndexSet
from .orthopoly import OrthonormalBasis
from .surrogate import DdGpceSurrogate, FitReport

FORMAT = "ddgpce-surrogate"
VERSION = 1


def _basis_to_dict(basis: OrthonormalBasis) -> dict:
    return {
        "index_set": basis.index_set.to_dict(),
        "shift": basis.shift.tolist(),
        "scale": basis.scale.tolist(),
        "whitening": basis.whitening.tolist(),
        "jitter": float(basis.jitter),
        "condition_estimate": float(basis.condition_estimate),
    }


def _basis_from_dict(d: dict) -> OrthonormalBasis:
    iset = MultiIndexSet.from_dict(d["index_set"])
    W = np.array(d["whitening"], dtype=float)
    if W.shape != (iset.cardinality, iset.cardinality):
        raise ConfigError(f"whitening matrix shape {W.shape} does not match index set size {iset.cardinality}")
    return OrthonormalBasis(
        iset, W, np.array(d["shift"], dtype=float), np.array(d["scale"], dtype=float),
        float(d.get("jitter", 0.0)), float(d.get("condition_estimate", 1.0)),
    )


def _report_to_dict(r: FitReport | None):
    if r is None:
        return None
    return {"residual": r.residual, "n_samples": r.n_samples, "n_terms": r.n_terms,
            "condition_estimate": r.condition_estimate}


def _report_from_dict(d):
    return None if d is None else FitReport(float(d["residual"]), int(d["n_samples"]),
                                            int(d["n_terms"]), float(d["condition_estimate"]))


def _surrogate_to_dict(s: DdGpceSurrogate) -> dict:
    return {"basis": _basis_to_dict(s.basis), "coefficients": s.coefficients.tolist(),
            "fit_report": _report_to_dict(s.fit_report)}


def _surrogate_from_dict(d: dict) -> DdGpceSurrogate:
    return DdGpceSurrogate(_basis_from_dict(d["basis"]), np.array(d["coefficients"], dtype=float),
                           _report_from_dict(d.get("fit_report")))


def to_dict(surrogate, input_model: RandomInputModel | None = None, provenance: dict | None = None) -> dict:
    doc = {"format": FORMAT, "version": VERSION}
    if isinstance(surrogate, BiFidelitySurrogate):
        doc["kind"] = "bifidelity"
        doc["surrogate"] = _surrogate_to_dict(surrogate.low)
        doc["link"] = {
            "basis": _basis_to_dict(surrogate.link.basis),
            "coefficients": surrogate.link.coefficients.tolist(),
            "fit_report": _report_to_dict(surrogate.link.fit_report),
        }
        provenance = {**surrogate.provenance, **(provenance or {})}
    elif isinstance(surrogate, DdGpceSurrogate):
        doc["kind"] = "single"
        doc["surrogate"] = _surrogate_to_dict(surrogate)
    else:
        raise ConfigError(f"cannot archive object of type {type(surrogate).__name__}")
    doc["input_model"] = None if input_model is None else input_model.to_dict()
    doc["provenance"] = provenance or {}
    return doc


def from_dict(doc: dict):
    """Return ``(surrogate, input_model_or_None, provenance)``."""
    if doc.get("format") != FORMAT:
        raise ConfigError(f"not a surrogate archive (format {doc.get('format')!r})")
    if doc.get("version") != VERSION:
        raise ConfigError(f"unsupported archive version {doc.get('version')!r}")
    low = _surrogate_from_dict(doc["surrogate"])
    provenance = doc.get("provenance", {})
    if doc["kind"] == "bifidelity":
        ln = doc["link"]
        link = FourierLink(_basis_from_dict(ln["basis"]), np.array(ln["coefficients"], dtype=float),
                           _report_from_dict(ln.get("fit_report")))
        sur = BiFidelitySurrogate(low, link, dict(provenance))
    elif doc["kind"] == "single":
        sur = low
    else:
        raise ConfigError(f"unknown archive kind {doc['kind']!r}")
    model = doc.get("input_model")
    return sur, (None if model is None else RandomInputModel.from_dict(model)), provenance


def dumps(surrogate, input_model=None, provenance=None) -> str:
    return json.dumps(to_dict(surrogate, input_model, provenance), indent=1, sort_keys=True) + "\n"


def save(path, surrogate, input_model=None, provenance=None) -> None:
    Path(path).write_text(dumps(surrogate, input_model, provenance))


def load(path):
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read archive {path}: {exc}") from exc
    return from_dict(doc)
