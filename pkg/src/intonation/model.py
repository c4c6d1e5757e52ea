"""Two-branch intonation classifier.

The acoustic branch runs the framewise feature matrix through a BiLSTM,
pools the two final hidden states, and projects through dropout + ReLU to
an encoding vector. The embedding branch mean-pools a precomputed
utterance embedding over time, optionally reweights its dimensions with a
softmax gate computed from the acoustic encoding, then projects through
dropout + ReLU. The classifier head is one linear layer over whatever
branches the variant enables:

    llf     acoustic branch only
    w2e     embedding branch only, no gating
    concat  both branches, no gating
    full    both branches with the softmax feature gate

Feature standardization statistics for the acoustic branch live on the
model and travel with its checkpoint.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import DimMismatch, VariantInputMissing
from .labels import CLASS_NAMES, Label
from .llf import LlfConfig
from .nn import BiLstm, Dropout, Linear, Param, softmax
from .tnsr import read_tnsr, write_tnsr

CHECKPOINT_META = "meta.json"
CHECKPOINT_FORMAT_VERSION = 1


class Variant(str, Enum):
    LLF_ONLY = "llf"
    W2E_ONLY = "w2e"
    CONCAT_NO_ATTENTION = "concat"
    FULL = "full"


@dataclass(frozen=True)
class ModelConfig:
    llf_dim: int = 23
    lstm_hidden: int = 128
    fl_out: int = 256
    emb_dim: int = 768
    fw_out: int = 256
    n_classes: int = 2
    dropout_lstm: float = 0.1
    dropout_w: float = 0.5
    variant: Variant = Variant.FULL

    @property
    def uses_llf(self) -> bool:
        return self.variant != Variant.W2E_ONLY

    @property
    def uses_emb(self) -> bool:
        return self.variant != Variant.LLF_ONLY

    @property
    def uses_attention(self) -> bool:
        return self.variant == Variant.FULL

    @property
    def classifier_in(self) -> int:
        return self.fl_out * self.uses_llf + self.fw_out * self.uses_emb

    def validate(self) -> None:
        for field_name in ("llf_dim", "lstm_hidden", "fl_out", "emb_dim", "fw_out"):
            if getattr(self, field_name) < 1:
                raise ValueError(f"{field_name} must be positive")
        if self.n_classes < 2:
            raise ValueError("need at least two classes")


@dataclass(frozen=True)
class PredictResult:
    label: Label
    probabilities: np.ndarray


class IntonationModel:
    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        cfg.validate()
        self.cfg = cfg
        self.llf_mean: np.ndarray | None = None
        self.llf_std: np.ndarray | None = None
        self.llf_config: LlfConfig | None = None

        # fixed construction order keeps initialization reproducible per seed
        if cfg.uses_llf:
            self.bilstm = BiLstm(cfg.llf_dim, cfg.lstm_hidden, rng=rng, name="bilstm")
            self.drop_llf = Dropout(cfg.dropout_lstm)
            self.f_l = Linear(2 * cfg.lstm_hidden, cfg.fl_out, "relu", rng=rng, name="f_l")
        if cfg.uses_attention:
            self.f_att = Linear(cfg.fl_out, cfg.emb_dim, "softmax", rng=rng, name="f_att")
        if cfg.uses_emb:
            self.drop_emb = Dropout(cfg.dropout_w)
            self.f_w = Linear(cfg.emb_dim, cfg.fw_out, "relu", rng=rng, name="f_w")
        self.classifier = Linear(cfg.classifier_in, cfg.n_classes, "none", rng=rng, name="classifier")
        self._cache = None

    # -- parameters ----------------------------------------------------

    def params(self) -> list[Param]:
        out: list[Param] = []
        if self.cfg.uses_llf:
            out += self.bilstm.params() + self.f_l.params()
        if self.cfg.uses_attention:
            out += self.f_att.params()
        if self.cfg.uses_emb:
            out += self.f_w.params()
        out += self.classifier.params()
        return out

    def zero_grads(self) -> None:
        for p in self.params():
            p.grad[...] = 0.0

    def param_values(self) -> list[np.ndarray]:
        return [p.value.copy() for p in self.params()]

    def load_param_values(self, values: list[np.ndarray]) -> None:
        params = self.params()
        if len(values) != len(params):
            raise DimMismatch(f"{len(values)} arrays for {len(params)} parameters")
        for p, v in zip(params, values):
            if p.value.shape != v.shape:
                raise DimMismatch(f"{p.name}: shape {v.shape} != {p.value.shape}")
            p.value[...] = v

    # -- standardization -----------------------------------------------

    def set_llf_norm(self, mean: np.ndarray, std: np.ndarray) -> None:
        mean = np.asarray(mean, dtype=np.float64)
        std = np.asarray(std, dtype=np.float64)
        if mean.shape != (self.cfg.llf_dim,) or std.shape != (self.cfg.llf_dim,):
            raise DimMismatch("standardization stats must be one value per feature")
        self.llf_mean, self.llf_std = mean, std

    def normalize_llf(self, values: np.ndarray) -> np.ndarray:
        """Apply stored per-feature standardization; identity before training."""
        if self.llf_mean is None:
            return np.asarray(values, dtype=np.float64)
        return (np.asarray(values, dtype=np.float64) - self.llf_mean) / self.llf_std

    # -- forward / backward ---------------------------------------------

    def forward_batch(
        self,
        llf: np.ndarray | None = None,
        emb_mean: np.ndarray | None = None,
        train: bool = False,
        rng: np.random.Generator | None = None,
    ) -> np.ndarray:
        """Logits for a batch. `llf` is (B, T, llf_dim) already standardized;
        `emb_mean` is (B, emb_dim) time-pooled embeddings."""
        cfg = self.cfg
        parts = []
        cache: dict = {}
        encoding = None
        if cfg.uses_llf:
            if llf is None:
                raise VariantInputMissing(f"variant {cfg.variant.value} needs framewise features")
            out, _ = self.bilstm.forward(llf, train)
            h = cfg.lstm_hidden
            pooled = np.concatenate([out[:, -1, :h], out[:, 0, h:]], axis=1)
            encoding = self.f_l.forward(self.drop_llf.forward(pooled, train, rng), train)
            parts.append(encoding)
            cache["out_shape"] = out.shape
        if cfg.uses_emb:
            if emb_mean is None:
                raise VariantInputMissing(f"variant {cfg.variant.value} needs embeddings")
            emb_mean = np.asarray(emb_mean, dtype=np.float64)
            if emb_mean.ndim != 2 or emb_mean.shape[1] != cfg.emb_dim:
                raise DimMismatch(f"emb_mean shape {emb_mean.shape}, expected (B, {cfg.emb_dim})")
            if cfg.uses_attention:
                gate = self.f_att.forward(encoding, train)
                weighted = gate * emb_mean
                cache["emb_mean"] = emb_mean
            else:
                weighted = emb_mean
            fused = self.f_w.forward(self.drop_emb.forward(weighted, train, rng), train)
            parts.append(fused)
        features = np.concatenate(parts, axis=1) if len(parts) > 1 else parts[0]
        logits = self.classifier.forward(features, train)
        self._cache = cache
        return logits

    def backward(self, dlogits: np.ndarray) -> None:
        cfg = self.cfg
        cache = self._cache
        self._cache = None
        dfeatures = self.classifier.backward(dlogits)
        if cfg.uses_llf and cfg.uses_emb:
            d_encoding = dfeatures[:, : cfg.fl_out]
            d_fused = dfeatures[:, cfg.fl_out :]
        elif cfg.uses_llf:
            d_encoding, d_fused = dfeatures, None
        else:
            d_encoding, d_fused = None, dfeatures

        if cfg.uses_emb:
            d_weighted = self.drop_emb.backward(self.f_w.backward(d_fused))
            if cfg.uses_attention:
                d_gate = d_weighted * cache["emb_mean"]
                d_encoding = d_encoding + self.f_att.backward(d_gate)
        if cfg.uses_llf:
            d_pooled = self.drop_llf.backward(self.f_l.backward(d_encoding))
            h = cfg.lstm_hidden
            d_out = np.zeros(cache["out_shape"])
            d_out[:, -1, :h] = d_pooled[:, :h]
            d_out[:, 0, h:] = d_pooled[:, h:]
            self.bilstm.backward(d_out)

    # -- inference -------------------------------------------------------

    def predict(
        self, llf: np.ndarray | None = None, emb: np.ndarray | None = None
    ) -> PredictResult:
        """Classify one clip from raw (unstandardized) features.

        `llf` is the (T, llf_dim) feature matrix; `emb` is the (T_w, emb_dim)
        embedding matrix, mean-pooled here. Ties break toward the lower index.
        """
        llf_b = None
        emb_b = None
        if self.cfg.uses_llf:
            if llf is None:
                raise VariantInputMissing("this variant classifies from framewise features")
            llf_b = self.normalize_llf(llf)[None, :, :]
        if self.cfg.uses_emb:
            if emb is None:
                raise VariantInputMissing("this variant classifies from embeddings")
            emb = np.asarray(emb, dtype=np.float64)
            if emb.ndim != 2:
                raise DimMismatch(f"embedding must be 2-D, got shape {emb.shape}")
            emb_b = emb.mean(axis=0)[None, :]
        logits = self.forward_batch(llf_b, emb_b, train=False)
        probs = softmax(logits, axis=1)[0]
        return PredictResult(label=Label(int(np.argmax(probs))), probabilities=probs)

    # -- checkpoints ------------------------------------------------------

    def save_checkpoint(self, directory: str | Path, extra: dict | None = None) -> None:
        """Write meta.json plus one tensor file per parameter."""
        directory = Path(directory)
        (directory / "params").mkdir(parents=True, exist_ok=True)
        cfg_dict = asdict(self.cfg)
        cfg_dict["variant"] = self.cfg.variant.value
        meta = {
            "format_version": CHECKPOINT_FORMAT_VERSION,
            "model": cfg_dict,
            "class_names": list(CLASS_NAMES),
            "llf_norm": None
            if self.llf_mean is None
            else {"mean": self.llf_mean.tolist(), "std": self.llf_std.tolist()},
            "llf_config": None if self.llf_config is None else asdict(self.llf_config),
            "params": [p.name for p in self.params()],
            "extra": extra or {},
        }
        with open(directory / CHECKPOINT_META, "w", encoding="utf-8") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")
        for p in self.params():
            write_tnsr(p.value, directory / "params" / f"{p.name}.tnsr")

    @classmethod
    def load_checkpoint(cls, directory: str | Path) -> "IntonationModel":
        directory = Path(directory)
        with open(directory / CHECKPOINT_META, encoding="utf-8") as fh:
            meta = json.load(fh)
        if meta.get("format_version") != CHECKPOINT_FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta.get('format_version')}")
        cfg_dict = dict(meta["model"])
        cfg_dict["variant"] = Variant(cfg_dict["variant"])
        cfg = ModelConfig(**cfg_dict)
        model = cls(cfg, np.random.default_rng(0))
        for p in model.params():
            stored = read_tnsr(directory / "params" / f"{p.name}.tnsr")
            if stored.shape != p.value.shape:
                raise DimMismatch(f"{p.name}: checkpoint shape {stored.shape}")
            p.value[...] = stored.astype(np.float64)
        if meta.get("llf_norm"):
            model.set_llf_norm(
                np.array(meta["llf_norm"]["mean"]), np.array(meta["llf_norm"]["std"])
            )
        if meta.get("llf_config"):
            model.llf_config = LlfConfig(**meta["llf_config"])
        return model
