"""Rendering graphs and queries to text, parsing that text back, and
character-level tokenization.

The sentence templates are a frozen wire format: premises are space-joined
"<a> causes <b>." sentences, hypotheses are either "Does <a> cause <b>?" or
"Are <a> and <b> d-separated[ given <z1, z2, ...>]?" with the conditioning
list comma-separated in sorted order.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from typing import Sequence

from .graphs import NAME_ALPHABET, Dag

TRANSITIVITY = "transitivity"
DSEP = "dsep"

LABEL_YES = "Yes"
LABEL_NO = "No"
LABELS = (LABEL_YES, LABEL_NO)

MAX_SEQ_LEN = 512

_EDGE_RE = re.compile(r"(\w+) causes (\w+)")
_TRANSITIVITY_RE = re.compile(r"^Does (\w+) cause (\w+)\?$")
_DSEP_RE = re.compile(r"^Are (\w+) and (\w+) d-separated(?: given ([\w, ]+))?\?$")

# Fixed character vocabulary: names plus template punctuation (the hyphen
# appears in "d-separated"), then a premise/hypothesis separator as the
# final id.
VOCAB = NAME_ALPHABET + " .?,-"
SEP_TOKEN = len(VOCAB)
VOCAB_SIZE = len(VOCAB) + 1
_CHAR_TO_ID = {c: i for i, c in enumerate(VOCAB)}


def vocab_sha256() -> str:
    return hashlib.sha256((VOCAB + "<sep>").encode("utf-8")).hexdigest()


class PremiseParseError(ValueError):
    """Premise text yields no edges."""


class HypothesisParseError(ValueError):
    """Hypothesis text matches neither query template."""


class TokenizeError(ValueError):
    """Text contains a character outside the fixed vocabulary."""


@dataclass(frozen=True)
class Query:
    kind: str  # TRANSITIVITY or DSEP
    a: str
    b: str
    z: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        if self.kind not in (TRANSITIVITY, DSEP):
            raise ValueError(f"unknown query kind {self.kind!r}")
        if self.a == self.b:
            raise ValueError("query endpoints must differ")
        if self.kind == TRANSITIVITY and self.z:
            raise ValueError("transitivity queries take no conditioning set")


@dataclass(frozen=True)
class Example:
    premise: str
    hypothesis: str
    label: str

    def __post_init__(self) -> None:
        if self.label not in LABELS:
            raise ValueError(f"label must be Yes or No, got {self.label!r}")


@dataclass(frozen=True)
class TokenSequence:
    ids: tuple[int, ...]
    truncated: bool = False


def render_premise(g: Dag, order: Sequence[tuple[str, str]] | None = None) -> str:
    """One sentence per edge, in the given order (default: graph edge order)."""
    edges = tuple(order) if order is not None else g.edges
    if not edges:
        raise ValueError("cannot render a premise for an empty edge set")
    if sorted(edges) != sorted(g.edges):
        raise ValueError("order must be a permutation of the graph's edges")
    return " ".join(f"{a} causes {b}." for a, b in edges)


def render_hypothesis(q: Query) -> str:
    if q.kind == TRANSITIVITY:
        return f"Does {q.a} cause {q.b}?"
    if q.z:
        given = ", ".join(sorted(q.z))
        return f"Are {q.a} and {q.b} d-separated given {given}?"
    return f"Are {q.a} and {q.b} d-separated?"


def parse_premise(text: str) -> tuple[tuple[str, str], ...]:
    """Extract edges from every "<a> causes <b>" match, deduplicated in
    first-occurrence order. Zero matches is a parse error."""
    edges: list[tuple[str, str]] = []
    seen: set[tuple[str, str]] = set()
    for match in _EDGE_RE.finditer(text):
        edge = (match.group(1), match.group(2))
        if edge not in seen:
            seen.add(edge)
            edges.append(edge)
    if not edges:
        raise PremiseParseError(f"no causal statements found in {text!r}")
    return tuple(edges)


def parse_hypothesis(text: str) -> Query:
    m = _TRANSITIVITY_RE.match(text)
    if m:
        a, b = m.group(1), m.group(2)
        if a == b:
            raise HypothesisParseError(f"query endpoints must differ in {text!r}")
        return Query(TRANSITIVITY, a, b)
    m = _DSEP_RE.match(text)
    if m:
        a, b, z_text = m.group(1), m.group(2), m.group(3)
        if a == b:
            raise HypothesisParseError(f"query endpoints must differ in {text!r}")
        z: frozenset[str] = frozenset()
        if z_text is not None:
            members = z_text.split(", ")
            if not all(re.fullmatch(r"\w+", member) for member in members):
                raise HypothesisParseError(f"malformed conditioning list in {text!r}")
            z = frozenset(members)
        return Query(DSEP, a, b, z)
    raise HypothesisParseError(f"unrecognized hypothesis {text!r}")


def _encode(text: str) -> list[int]:
    ids = []
    for c in text:
        if c not in _CHAR_TO_ID:
            raise TokenizeError(f"character {c!r} is outside the vocabulary")
        ids.append(_CHAR_TO_ID[c])
    return ids


def tokenize(premise: str, hypothesis: str, max_len: int = MAX_SEQ_LEN) -> TokenSequence:
    """Character tokens for premise, a separator, then hypothesis tokens.
    Sequences longer than max_len are truncated and flagged."""
    ids = _encode(premise) + [SEP_TOKEN] + _encode(hypothesis)
    if len(ids) > max_len:
        return TokenSequence(tuple(ids[:max_len]), truncated=True)
    return TokenSequence(tuple(ids), truncated=False)


def detokenize(seq: TokenSequence) -> tuple[str, str]:
    """Inverse of tokenize for untruncated sequences."""
    parts: list[list[str]] = [[]]
    for i in seq.ids:
        if i == SEP_TOKEN:
            parts.append([])
        elif 0 <= i < len(VOCAB):
            parts[-1].append(VOCAB[i])
        else:
            raise TokenizeError(f"token id {i} is outside the vocabulary")
    premise = "".join(parts[0])
    hypothesis = "".join(parts[1]) if len(parts) > 1 else ""
    return premise, hypothesis
