"""Training loop for the toy classifier: per-batch cross-entropy plus the
lambda-weighted semantic term, AdamW updates with linear warmup, and a
per-step log. The lambda schedule and warmup share one global step counter.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .loss import (
    DSEP_ALIGNED,
    DSEP_DIRECTIONS,
    DSEP_LITERAL,
    EPSILON,
    ConsistencyUnavailable,
    LambdaSchedule,
    consistency_target,
    lambda_at,
)
from .model import (
    ModelParams,
    NO_INDEX,
    YES_INDEX,
    forward_freq,
    frequency_matrix,
    init_params,
    softmax,
)
from .textio import LABEL_YES, Example, tokenize

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class TrainingDivergedError(RuntimeError):
    """Loss became non-finite; carries a diagnostic snapshot."""

    def __init__(self, step: int, ce: float, sem: float, lam: float):
        super().__init__(f"non-finite loss at step {step}: ce={ce}, sem={sem}, lam={lam}")
        self.step = step
        self.ce = ce
        self.sem = sem
        self.lam = lam


@dataclass
class TrainConfig:
    epochs: int = 3
    batch_size: int = 8
    learning_rate: float = 1e-2
    weight_decay: float = 0.01
    warmup_steps: int = 100
    lambda_start: float = 0.05
    lambda_end: float = 0.30
    semantic_enabled: bool = True
    dsep_direction: str = DSEP_LITERAL
    seed: int = 0
    d_embed: int = 32
    d_hidden: int = 32
    max_seq_len: int = 512

    def __post_init__(self) -> None:
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if self.learning_rate <= 0 or self.warmup_steps < 1 or self.max_seq_len < 1:
            raise ValueError("learning_rate, warmup_steps, max_seq_len must be positive")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be non-negative")
        if self.d_embed < 1 or self.d_hidden < 1:
            raise ValueError("layer sizes must be positive")
        if self.dsep_direction not in DSEP_DIRECTIONS:
            raise ValueError(f"unknown dsep_direction {self.dsep_direction!r}")
        # Validates the endpoint ordering.
        LambdaSchedule(self.lambda_start, self.lambda_end, 1)


@dataclass
class StepRecord:
    step: int
    lam: float
    ce: float
    semantic: float
    total: float


@dataclass
class EpochRecord:
    epoch: int
    probe_yes: int
    probe_no: int
    probe_bias: float


@dataclass
class TrainLog:
    steps: list[StepRecord] = field(default_factory=list)
    epochs: list[EpochRecord] = field(default_factory=list)
    parse_fallbacks: int = 0
    truncated_sequences: int = 0
    deterministic: bool = True

    def write_csv(self, path: str) -> None:
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["step", "lambda", "ce", "semantic", "total"])
            for r in self.steps:
                writer.writerow(
                    [r.step, f"{r.lam:.12f}", f"{r.ce:.12f}", f"{r.semantic:.12f}", f"{r.total:.12f}"]
                )

    def summary_dict(self) -> dict:
        last = self.steps[-1] if self.steps else None
        return {
            "num_steps": len(self.steps),
            "final_step": asdict(last) if last else None,
            "epochs": [asdict(e) for e in self.epochs],
            "parse_fallbacks": self.parse_fallbacks,
            "truncated_sequences": self.truncated_sequences,
            "deterministic": self.deterministic,
        }


def init_model(config: TrainConfig, rng: np.random.Generator | None = None) -> ModelParams:
    if rng is None:
        rng = np.random.default_rng(config.seed)
    return init_params(config.d_embed, config.d_hidden, rng)


class AdamW:
    """Adaptive moments with bias correction and decoupled weight decay."""

    def __init__(self, model: ModelParams, weight_decay: float):
        self.weight_decay = weight_decay
        self.m = [np.zeros_like(a) for _, a in model.arrays()]
        self.v = [np.zeros_like(a) for _, a in model.arrays()]
        self.t = 0

    def step(self, model: ModelParams, grads: list[np.ndarray], lr: float) -> None:
        self.t += 1
        bc1 = 1.0 - ADAM_BETA1**self.t
        bc2 = 1.0 - ADAM_BETA2**self.t
        for i, (_, param) in enumerate(model.arrays()):
            g = grads[i]
            self.m[i] = ADAM_BETA1 * self.m[i] + (1.0 - ADAM_BETA1) * g
            self.v[i] = ADAM_BETA2 * self.v[i] + (1.0 - ADAM_BETA2) * g * g
            m_hat = self.m[i] / bc1
            v_hat = self.v[i] / bc2
            param -= lr * (m_hat / (np.sqrt(v_hat) + ADAM_EPS) + self.weight_decay * param)


def _semantic_target_index(example: Example, dsep_direction: str) -> int:
    """Class index the semantic loss reads for this example, or -1 when the
    text does not parse (the sample then contributes cross-entropy only)."""
    try:
        side, _ = consistency_target(example, dsep_direction)
    except ConsistencyUnavailable:
        return -1
    return YES_INDEX if side == LABEL_YES else NO_INDEX


def _batch_losses_and_dlogits(
    probs: np.ndarray,
    labels: np.ndarray,
    sem_targets: np.ndarray,
    lam: float,
    semantic_enabled: bool,
) -> tuple[float, float, np.ndarray, int]:
    """Mean CE, mean semantic loss, and d(total)/d(logits) for one batch.

    Semantic loss averages over samples with a usable target; samples with
    target -1 fall back to CE only and are counted.
    """
    n = probs.shape[0]
    p_true = probs[np.arange(n), labels]
    ce = float(-np.mean(np.log(np.maximum(p_true, EPSILON))))
    dlogits = probs.copy()
    dlogits[np.arange(n), labels] -= 1.0
    dlogits /= n

    sem = 0.0
    fallbacks = int(np.sum(sem_targets < 0))
    if semantic_enabled:
        mask = sem_targets >= 0
        m = int(np.sum(mask))
        if m > 0:
            rows = np.nonzero(mask)[0]
            k = sem_targets[rows]
            p_k = probs[rows, k]
            sem = float(-np.mean(np.log(p_k + EPSILON)))
            # d(-log(p_k + eps))/dlogits_j = -(p_k * (1[j=k] - p_j)) / (p_k + eps)
            coeff = (p_k / (p_k + EPSILON)) / m
            sem_grad = probs[rows] * coeff[:, None]
            sem_grad[np.arange(len(rows)), k] -= coeff
            dlogits[rows] += lam * sem_grad
    return ce, sem, dlogits, fallbacks


def _backward(
    model: ModelParams,
    freq: np.ndarray,
    pooled: np.ndarray,
    hidden: np.ndarray,
    dlogits: np.ndarray,
) -> list[np.ndarray]:
    d_w_out = hidden.T @ dlogits
    d_b_out = dlogits.sum(axis=0)
    d_hidden = dlogits @ model.w_out.T
    d_pre = d_hidden * (1.0 - hidden * hidden)
    d_w_hidden = pooled.T @ d_pre
    d_b_hidden = d_pre.sum(axis=0)
    d_pooled = d_pre @ model.w_hidden.T
    d_embedding = freq.T @ d_pooled
    return [d_embedding, d_w_hidden, d_b_hidden, d_w_out, d_b_out]


def _probe_record(model: ModelParams, probe_freq: np.ndarray, epoch: int) -> EpochRecord:
    _, _, logits = forward_freq(model, probe_freq)
    probs = softmax(logits)
    yes = int(np.sum(probs[:, YES_INDEX] > 0.5))
    no = probe_freq.shape[0] - yes
    bias = max(yes, no) / probe_freq.shape[0]
    return EpochRecord(epoch=epoch, probe_yes=yes, probe_no=no, probe_bias=bias)


def train(
    dataset: list[Example],
    config: TrainConfig,
    probe: list[Example] | None = None,
) -> tuple[ModelParams, TrainLog]:
    """Run the training algorithm: per batch, compute the scheduled lambda,
    cross-entropy, the semantic term from re-parsed text, and one AdamW
    update with linear learning-rate warmup."""
    if not dataset:
        raise ValueError("training dataset is empty")
    rng = np.random.default_rng(config.seed)
    model = init_params(config.d_embed, config.d_hidden, rng)
    optimizer = AdamW(model, config.weight_decay)
    log = TrainLog()

    sequences = []
    for ex in dataset:
        seq = tokenize(ex.premise, ex.hypothesis, config.max_seq_len)
        if seq.truncated:
            log.truncated_sequences += 1
        sequences.append(seq.ids)
    freq_all = frequency_matrix(sequences)
    labels_all = np.array(
        [YES_INDEX if ex.label == LABEL_YES else NO_INDEX for ex in dataset], dtype=np.int64
    )
    sem_targets_all = np.array(
        [_semantic_target_index(ex, config.dsep_direction) for ex in dataset], dtype=np.int64
    )

    probe_freq = None
    if probe:
        probe_freq = frequency_matrix(
            [tokenize(ex.premise, ex.hypothesis, config.max_seq_len).ids for ex in probe]
        )

    n = len(dataset)
    steps_per_epoch = math.ceil(n / config.batch_size)
    total_steps = config.epochs * steps_per_epoch
    # T is the last step index so the logged lambda hits both endpoints.
    schedule = LambdaSchedule(config.lambda_start, config.lambda_end, max(1, total_steps - 1))

    step = 0
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        for b in range(steps_per_epoch):
            idx = order[b * config.batch_size : (b + 1) * config.batch_size]
            freq = freq_all[idx]
            lam = lambda_at(step, schedule)
            pooled, hidden, logits = forward_freq(model, freq)
            probs = softmax(logits)
            ce, sem, dlogits, fallbacks = _batch_losses_and_dlogits(
                probs, labels_all[idx], sem_targets_all[idx], lam, config.semantic_enabled
            )
            log.parse_fallbacks += fallbacks
            sem_logged = sem if config.semantic_enabled else 0.0
            total = ce + (lam * sem if config.semantic_enabled else 0.0)
            if not math.isfinite(total):
                raise TrainingDivergedError(step, ce, sem_logged, lam)
            grads = _backward(model, freq, pooled, hidden, dlogits)
            lr = config.learning_rate * min(1.0, (step + 1) / config.warmup_steps)
            optimizer.step(model, grads, lr)
            log.steps.append(StepRecord(step, lam, ce, sem_logged, total))
            step += 1
        if probe_freq is not None:
            log.epochs.append(_probe_record(model, probe_freq, epoch))
    model.check_finite()
    return model, log


def _example_loss(model: ModelParams, freq: np.ndarray, label_idx: int,
                  sem_idx: int, lam: float) -> float:
    _, _, logits = forward_freq(model, freq)
    probs = softmax(logits)[0]
    value = -math.log(max(float(probs[label_idx]), EPSILON))
    if lam > 0 and sem_idx >= 0:
        value += lam * -math.log(float(probs[sem_idx]) + EPSILON)
    return value


def gradient_check(
    model: ModelParams,
    example: Example,
    lam: float,
    rng: np.random.Generator | None = None,
    num_coords: int = 100,
    fd_step: float = 1e-4,
    dsep_direction: str = DSEP_ALIGNED,
) -> float:
    """Compare analytic gradients of the total loss against central finite
    differences on a random coordinate subsample; returns the max relative
    error."""
    if rng is None:
        rng = np.random.default_rng(0)
    seq = tokenize(example.premise, example.hypothesis)
    freq = frequency_matrix([seq.ids])
    label_idx = YES_INDEX if example.label == LABEL_YES else NO_INDEX
    sem_idx = _semantic_target_index(example, dsep_direction)

    pooled, hidden, logits = forward_freq(model, freq)
    probs = softmax(logits)
    sem_targets = np.array([sem_idx], dtype=np.int64)
    labels = np.array([label_idx], dtype=np.int64)
    _, _, dlogits, _ = _batch_losses_and_dlogits(probs, labels, sem_targets, lam, lam > 0)
    analytic = _backward(model, freq, pooled, hidden, dlogits)

    sizes = [a.size for _, a in model.arrays()]
    total_size = sum(sizes)
    coords = rng.choice(total_size, size=min(num_coords, total_size), replace=False)
    work = model.copy()
    work_arrays = [a for _, a in work.arrays()]

    max_rel = 0.0
    for flat in coords:
        arr_i = 0
        local = int(flat)
        while local >= sizes[arr_i]:
            local -= sizes[arr_i]
            arr_i += 1
        a = work_arrays[arr_i]
        original = a.flat[local]
        a.flat[local] = original + fd_step
        up = _example_loss(work, freq, label_idx, sem_idx, lam)
        a.flat[local] = original - fd_step
        down = _example_loss(work, freq, label_idx, sem_idx, lam)
        a.flat[local] = original
        numeric = (up - down) / (2.0 * fd_step)
        exact = analytic[arr_i].flat[local]
        rel = abs(exact - numeric) / max(abs(exact), abs(numeric), 1e-6)
        max_rel = max(max_rel, rel)
    return max_rel
