"""JSON file formats for models, sequences, and fit reports.

States are 1-based on disk.  A sequence label is an integer for an
observed state, a list of integers for a restricted set, or null for a
fully hidden step.  Floats are serialized with their shortest exact
decimal representation, so a round trip preserves every bit.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import InvalidModel
from .model import (
    Hyper,
    InitialLaw,
    LabeledSequence,
    LabelSet,
    LarParams,
    ModelParams,
    PhmcParams,
)


def model_to_dict(m: ModelParams) -> dict:
    return {
        "K": m.hyper.K,
        "p": m.hyper.p,
        "pi": m.phmc.pi.tolist(),
        "A": m.phmc.A.tolist(),
        "states": [{"phi": lar.phi.tolist(), "h": lar.h} for lar in m.lar],
        "g0": {"mean": m.g0.m.tolist(), "cov": m.g0.V.tolist()},
    }


def model_from_dict(d: dict) -> ModelParams:
    try:
        hyper = Hyper(K=int(d["K"]), p=int(d["p"]))
        phmc = PhmcParams(pi=d["pi"], A=d["A"])
        lar = tuple(LarParams(phi=s["phi"], h=float(s["h"])) for s in d["states"])
        g0 = InitialLaw(m=d["g0"]["mean"], V=d["g0"]["cov"])
    except (KeyError, TypeError) as exc:
        raise InvalidModel(f"malformed model document: {exc}") from exc
    return ModelParams(hyper=hyper, phmc=phmc, lar=lar, g0=g0)


def _label_to_json(lab: LabelSet, K: int):
    if lab.is_full(K):
        return None
    if lab.is_singleton():
        return lab.states()[0] + 1
    return [s + 1 for s in lab.states()]


def _label_from_json(entry, K: int) -> LabelSet:
    if entry is None:
        return LabelSet.full(K)
    if isinstance(entry, list):
        return LabelSet.of(int(s) - 1 for s in entry)
    return LabelSet.single(int(entry) - 1)


def sequence_to_dict(seq: LabeledSequence, K: int) -> dict:
    return {
        "p": len(seq.initial),
        "initial": seq.initial.tolist(),
        "series": seq.series.tolist(),
        "labels": [_label_to_json(lab, K) for lab in seq.labels],
    }


def sequence_from_dict(d: dict, K: int) -> LabeledSequence:
    try:
        labels = tuple(_label_from_json(e, K) for e in d["labels"])
        return LabeledSequence(initial=d["initial"], series=d["series"], labels=labels)
    except (KeyError, TypeError) as exc:
        raise InvalidModel(f"malformed sequence document: {exc}") from exc


def save_model(m: ModelParams, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(m), indent=2) + "\n")


def load_model(path: str | Path) -> ModelParams:
    return model_from_dict(json.loads(Path(path).read_text()))


def save_sequence(seq: LabeledSequence, K: int, path: str | Path) -> None:
    Path(path).write_text(json.dumps(sequence_to_dict(seq, K), indent=2) + "\n")


def load_sequence(path: str | Path, K: int) -> LabeledSequence:
    return sequence_from_dict(json.loads(Path(path).read_text()), K)


def report_to_dict(report) -> dict:
    return {
        "iterations": report.iterations,
        "converged": report.converged,
        "loglik_trace": list(report.loglik_trace),
    }


def states_to_json(states: np.ndarray) -> list[int]:
    """Convert internal 0-based states to the 1-based wire format."""
    return [int(s) + 1 for s in states]
