"""Consistency scoring against graph structure, the semantic loss term,
total loss composition, and the linear lambda ramp."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from .data import oracle_answer
from .graphs import GraphError, InvalidQueryError, dag_from_edges
from .textio import (
    DSEP,
    LABEL_YES,
    Example,
    HypothesisParseError,
    PremiseParseError,
    parse_hypothesis,
    parse_premise,
)

EPSILON = 1e-8

# How d-separation hypotheses map onto the consistency score. "aligned"
# scores the probability of the oracle's answer to the rendered question;
# "literal" scores the opposite side for d-separated pairs, which acts as a
# counter-majority pressure during training.
DSEP_ALIGNED = "aligned"
DSEP_LITERAL = "literal"
DSEP_DIRECTIONS = (DSEP_ALIGNED, DSEP_LITERAL)


class ConsistencyUnavailable(ValueError):
    """Premise or hypothesis failed to parse; no consistency score exists."""


@dataclass(frozen=True)
class PredictionProbs:
    p_yes: float
    p_no: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.p_yes <= 1.0 and 0.0 <= self.p_no <= 1.0):
            raise ValueError(f"probabilities out of range: ({self.p_yes}, {self.p_no})")
        if abs(self.p_yes + self.p_no - 1.0) > 1e-9:
            raise ValueError(f"probabilities must sum to 1: ({self.p_yes}, {self.p_no})")


@dataclass(frozen=True)
class LambdaSchedule:
    lambda_start: float = 0.05
    lambda_end: float = 0.30
    total_steps: int = 1

    def __post_init__(self) -> None:
        if not 0.0 <= self.lambda_start <= self.lambda_end:
            raise ValueError(
                f"need 0 <= lambda_start <= lambda_end, got "
                f"({self.lambda_start}, {self.lambda_end})"
            )
        if self.total_steps < 1:
            raise ValueError(f"total_steps must be >= 1, got {self.total_steps}")


@dataclass(frozen=True)
class ConsistencyScore:
    c: float
    truth: bool


def lambda_at(t: int | float, schedule: LambdaSchedule) -> float:
    """Linear interpolation from lambda_start at t=0 to lambda_end at t=T.
    Out-of-range steps are clamped with a warning."""
    if t < 0 or t > schedule.total_steps:
        warnings.warn(
            f"step {t} outside [0, {schedule.total_steps}]; clamping",
            RuntimeWarning,
            stacklevel=2,
        )
        t = min(max(t, 0), schedule.total_steps)
    span = schedule.lambda_end - schedule.lambda_start
    return schedule.lambda_start + (t / schedule.total_steps) * span


def consistency_target(example: Example, dsep_direction: str = DSEP_ALIGNED) -> tuple[str, bool]:
    """Parse the example and answer it with the graph oracle.

    Returns (side, truth): `side` is the label whose probability the
    consistency score reads ("Yes" or "No"), `truth` the oracle's answer to
    the rendered hypothesis. Raises ConsistencyUnavailable on parse failure.
    """
    if dsep_direction not in DSEP_DIRECTIONS:
        raise ValueError(f"unknown d-separation direction {dsep_direction!r}")
    try:
        g = dag_from_edges(parse_premise(example.premise))
        query = parse_hypothesis(example.hypothesis)
        answer = oracle_answer(g, query)
    except (PremiseParseError, HypothesisParseError, GraphError, InvalidQueryError) as exc:
        raise ConsistencyUnavailable(str(exc)) from exc
    truth = answer == LABEL_YES
    side = answer
    if query.kind == DSEP and dsep_direction == DSEP_LITERAL:
        side = "No" if truth else "Yes"
    return side, truth


def consistency(
    example: Example, probs: PredictionProbs, dsep_direction: str = DSEP_ALIGNED
) -> ConsistencyScore:
    """Probability mass the model places on the graph-entailed side of the
    hypothesis (see consistency_target for the direction convention)."""
    side, truth = consistency_target(example, dsep_direction)
    c = probs.p_yes if side == LABEL_YES else probs.p_no
    return ConsistencyScore(c=c, truth=truth)


def semantic_loss_batch(scores: list[ConsistencyScore]) -> float:
    """-(1/N) * sum(log(c_i + eps)); finite for all c in [0, 1]."""
    if not scores:
        raise ValueError("semantic loss is undefined for an empty batch")
    return -sum(math.log(s.c + EPSILON) for s in scores) / len(scores)


def cross_entropy(probs: PredictionProbs, label: str) -> float:
    """-log of the probability assigned to the true label, floored at eps."""
    p_true = probs.p_yes if label == LABEL_YES else probs.p_no
    return -math.log(max(p_true, EPSILON))


def total_loss(ce: float, sem: float, lam: float) -> float:
    if not (math.isfinite(ce) and math.isfinite(sem) and math.isfinite(lam)):
        raise ValueError(f"non-finite loss inputs: ce={ce}, sem={sem}, lam={lam}")
    if lam < 0:
        raise ValueError(f"lambda must be non-negative, got {lam}")
    return ce + lam * sem
