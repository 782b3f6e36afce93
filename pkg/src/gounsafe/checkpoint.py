"""JSON checkpoints: model config, shape-tagged weights, vocabulary and calibration."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from gounsafe.autodiff.core import Tensor
from gounsafe.autodiff.ops import BatchNormState
from gounsafe.calibration import CalibrationArtifact
from gounsafe.errors import ShapeMismatch, VocabularyMismatch
from gounsafe.features import LabelVocabulary, load_manifest, manifest_hash
from gounsafe.models import ModelConfig, ModelParams

FORMAT_VERSION = 1


def _array(a: np.ndarray) -> dict:
    return {"shape": list(a.shape), "data": a.reshape(-1).tolist()}


def _unarray(d: dict) -> np.ndarray:
    a = np.asarray(d["data"], dtype=np.float64)
    shape = tuple(d["shape"])
    if a.size != int(np.prod(shape, dtype=np.int64)):
        raise ShapeMismatch(f"stored array of {a.size} values cannot take shape {shape}")
    return a.reshape(shape)


def params_hash(params: ModelParams) -> str:
    h = hashlib.sha256()
    for name in params.names():
        h.update(name.encode())
        h.update(np.ascontiguousarray(params.weights[name].data).tobytes())
    return h.hexdigest()[:16]


@dataclass
class Checkpoint:
    config: ModelConfig
    params: ModelParams
    vocab: LabelVocabulary
    feature_subset: str = "ALL"
    calibration: CalibrationArtifact | None = None
    calibration_scores: tuple[list[float], list[float]] | None = None
    validation_ids: list[str] = field(default_factory=list)
    seed: int = 0

    def to_json(self) -> dict:
        return {
            "version": FORMAT_VERSION,
            "config": self.config.to_json(),
            "weights": {k: _array(self.params.weights[k].data) for k in self.params.names()},
            "batch_norm": {k: {"mean": s.mean.tolist(), "var": s.var.tolist(),
                               "momentum": s.momentum} for k, s in sorted(self.params.bn.items())},
            "vocabulary": self.vocab.to_json(),
            "vocabulary_hash": self.vocab.hash,
            "manifest_hash": self.vocab.manifest_hash,
            "params_hash": params_hash(self.params),
            "feature_subset": self.feature_subset,
            "calibration": self.calibration.to_json() if self.calibration else None,
            "calibration_scores": list(self.calibration_scores) if self.calibration_scores else None,
            "validation_ids": self.validation_ids,
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, d: dict) -> Checkpoint:
        cfg = ModelConfig.from_json(d["config"])
        weights = {k: Tensor(_unarray(v), requires_grad=True) for k, v in d["weights"].items()}
        bn = {}
        for k, s in d.get("batch_norm", {}).items():
            st = BatchNormState(len(s["mean"]), s["momentum"])
            st.mean, st.var = np.asarray(s["mean"]), np.asarray(s["var"])
            bn[k] = st
        cal = CalibrationArtifact.from_json(d["calibration"]) if d.get("calibration") else None
        params = ModelParams(weights, bn, (cal.T_what, cal.T_why) if cal else (1.0, 1.0))
        vocab = LabelVocabulary.from_json(d["vocabulary"])
        if vocab.hash != d.get("vocabulary_hash", vocab.hash):
            raise VocabularyMismatch("stored vocabulary does not match its hash")
        scores = d.get("calibration_scores")
        return cls(cfg, params, vocab, d.get("feature_subset", "ALL"), cal,
                   (scores[0], scores[1]) if scores else None, d.get("validation_ids", []),
                   d.get("seed", 0))

    def check_manifest(self, manifest: dict | None = None) -> None:
        """The encoder's finite-label manifest must be the one the model was trained with."""
        current = manifest_hash(manifest or load_manifest())
        if self.vocab.manifest_hash and self.vocab.manifest_hash != current:
            raise VocabularyMismatch(
                f"checkpoint manifest {self.vocab.manifest_hash} differs from encoder manifest {current}")
        if self.vocab.n != self.config.n_features:
            raise VocabularyMismatch(
                f"vocabulary has {self.vocab.n} features, model expects {self.config.n_features}")


def save_checkpoint(path: str, ckpt: Checkpoint) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(ckpt.to_json(), fh, sort_keys=True)
        fh.write("\n")


def load_checkpoint(path: str) -> Checkpoint:
    with open(path, encoding="utf-8") as fh:
        return Checkpoint.from_json(json.load(fh))
