"""Small differentiable two-logit classifier over token sequences.

Architecture: embedding table, mean-pool over the sequence, one tanh hidden
layer, two output logits, softmax. Because pooling is a mean of embedding
rows, an input is fully described by its normalized token-frequency vector,
which keeps batched training a pair of matrix products.

Class index 0 is "Yes", index 1 is "No". Exact ties predict "No".
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .loss import PredictionProbs
from .textio import LABEL_NO, LABEL_YES, SEP_TOKEN, TokenSequence, VOCAB_SIZE, vocab_sha256

MODEL_MAGIC = b"SCTM"
MODEL_FORMAT_VERSION = 1

YES_INDEX = 0
NO_INDEX = 1


class ModelConfigError(ValueError):
    """Non-positive layer sizes or otherwise unusable model configuration."""


class ModelIOError(RuntimeError):
    """Corrupt, truncated, or incompatible model file."""


@dataclass
class ModelParams:
    embedding: np.ndarray  # (vocab_size, d_embed)
    w_hidden: np.ndarray  # (d_embed, d_hidden)
    b_hidden: np.ndarray  # (d_hidden,)
    w_out: np.ndarray  # (d_hidden, 2)
    b_out: np.ndarray  # (2,)

    @property
    def d_embed(self) -> int:
        return self.embedding.shape[1]

    @property
    def d_hidden(self) -> int:
        return self.w_hidden.shape[1]

    @property
    def vocab_size(self) -> int:
        return self.embedding.shape[0]

    def arrays(self) -> list[tuple[str, np.ndarray]]:
        return [
            ("embedding", self.embedding),
            ("w_hidden", self.w_hidden),
            ("b_hidden", self.b_hidden),
            ("w_out", self.w_out),
            ("b_out", self.b_out),
        ]

    def copy(self) -> "ModelParams":
        return ModelParams(*(a.copy() for _, a in self.arrays()))

    def check_finite(self) -> None:
        for name, a in self.arrays():
            if not np.all(np.isfinite(a)):
                raise ValueError(f"non-finite values in {name}")


def init_params(d_embed: int, d_hidden: int, rng: np.random.Generator,
                vocab_size: int = VOCAB_SIZE) -> ModelParams:
    """Uniform symmetric init scaled by 1/sqrt(fan-in); biases start at zero."""
    if d_embed < 1 or d_hidden < 1:
        raise ModelConfigError(f"layer sizes must be positive, got ({d_embed}, {d_hidden})")
    s_embed = 1.0 / np.sqrt(d_embed)
    s_hidden = 1.0 / np.sqrt(d_embed)
    s_out = 1.0 / np.sqrt(d_hidden)
    return ModelParams(
        embedding=rng.uniform(-s_embed, s_embed, size=(vocab_size, d_embed)),
        w_hidden=rng.uniform(-s_hidden, s_hidden, size=(d_embed, d_hidden)),
        b_hidden=np.zeros(d_hidden),
        w_out=rng.uniform(-s_out, s_out, size=(d_hidden, 2)),
        b_out=np.zeros(2),
    )


def frequency_vector(ids: tuple[int, ...] | list[int], vocab_size: int = VOCAB_SIZE) -> np.ndarray:
    """Normalized token histogram; mean-pooled embeddings are freq @ table.
    An empty sequence falls back to the separator-only baseline."""
    if not ids:
        ids = [SEP_TOKEN]
    arr = np.asarray(ids, dtype=np.int64)
    if arr.min() < 0 or arr.max() >= vocab_size:
        raise ValueError("token id outside vocabulary")
    return np.bincount(arr, minlength=vocab_size).astype(np.float64) / len(arr)


def frequency_matrix(sequences: list[tuple[int, ...]], vocab_size: int = VOCAB_SIZE) -> np.ndarray:
    return np.stack([frequency_vector(ids, vocab_size) for ids in sequences])


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exps = np.exp(shifted)
    return exps / exps.sum(axis=-1, keepdims=True)


def forward_freq(model: ModelParams, freq: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Batched forward pass on frequency vectors.

    Returns (pooled, hidden, logits) with shapes (N, d_embed), (N, d_hidden),
    (N, 2); intermediate activations feed the backward pass.
    """
    pooled = freq @ model.embedding
    hidden = np.tanh(pooled @ model.w_hidden + model.b_hidden)
    logits = hidden @ model.w_out + model.b_out
    return pooled, hidden, logits


def forward(model: ModelParams, tokens: TokenSequence | tuple[int, ...]) -> tuple[np.ndarray, PredictionProbs]:
    """Single-sequence forward pass returning (logits, PredictionProbs)."""
    ids = tokens.ids if isinstance(tokens, TokenSequence) else tuple(tokens)
    freq = frequency_vector(ids, model.vocab_size)[None, :]
    _, _, logits = forward_freq(model, freq)
    probs = softmax(logits)[0]
    return logits[0], PredictionProbs(p_yes=float(probs[YES_INDEX]), p_no=float(probs[NO_INDEX]))


def predict_label(p_yes: float) -> str:
    """Argmax with the deterministic tie rule: exactly 0.5 predicts No."""
    return LABEL_YES if p_yes > 0.5 else LABEL_NO


def save_model(model: ModelParams, path: str) -> None:
    """Versioned binary container: magic, format version, JSON header echoing
    the configuration, then raw little-endian float64 array payloads."""
    header = {
        "format_version": MODEL_FORMAT_VERSION,
        "d_embed": model.d_embed,
        "d_hidden": model.d_hidden,
        "vocab_size": model.vocab_size,
        "vocab_sha256": vocab_sha256(),
        "arrays": [[name, list(a.shape)] for name, a in model.arrays()],
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MODEL_MAGIC)
        f.write(struct.pack("<I", MODEL_FORMAT_VERSION))
        f.write(struct.pack("<I", len(header_bytes)))
        f.write(header_bytes)
        for _, a in model.arrays():
            f.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load_model(path: str) -> ModelParams:
    """Inverse of save_model; bit-identical parameters round-trip."""
    with open(path, "rb") as f:
        blob = f.read()
    offset = 0

    def take(n: int, what: str) -> bytes:
        nonlocal offset
        if offset + n > len(blob):
            raise ModelIOError(f"truncated model file while reading {what}")
        chunk = blob[offset : offset + n]
        offset += n
        return chunk

    if take(4, "magic") != MODEL_MAGIC:
        raise ModelIOError("bad magic; not a model file")
    (version,) = struct.unpack("<I", take(4, "version"))
    if version != MODEL_FORMAT_VERSION:
        raise ModelIOError(f"unsupported model format version {version}")
    (header_len,) = struct.unpack("<I", take(4, "header length"))
    try:
        header = json.loads(take(header_len, "header").decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelIOError(f"corrupt model header: {exc}")
    expected_names = ["embedding", "w_hidden", "b_hidden", "w_out", "b_out"]
    declared = header.get("arrays", [])
    if [name for name, _ in declared] != expected_names:
        raise ModelIOError("model header declares unexpected arrays")
    arrays = {}
    for name, shape in declared:
        count = int(np.prod(shape)) if shape else 1
        raw = take(8 * count, f"array {name}")
        arrays[name] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
    if offset != len(blob):
        raise ModelIOError(f"{len(blob) - offset} trailing bytes after payload")
    model = ModelParams(**arrays)
    if (model.d_embed, model.d_hidden, model.vocab_size) != (
        header.get("d_embed"),
        header.get("d_hidden"),
        header.get("vocab_size"),
    ):
        raise ModelIOError("header/payload shape mismatch")
    if model.w_hidden.shape != (model.d_embed, model.d_hidden) or model.w_out.shape != (
        model.d_hidden,
        2,
    ):
        raise ModelIOError("inconsistent layer shapes")
    return model


def model_vocab_sha256(path: str) -> str:
    """Vocabulary hash recorded in a saved model, for compatibility checks."""
    with open(path, "rb") as f:
        blob = f.read(12)
        if len(blob) < 12 or blob[:4] != MODEL_MAGIC:
            raise ModelIOError("bad magic; not a model file")
        (header_len,) = struct.unpack("<I", blob[8:12])
        header_bytes = f.read(header_len)
    try:
        header = json.loads(header_bytes.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelIOError(f"corrupt model header: {exc}")
    return header.get("vocab_sha256", "")
