"""Dataset generation, multi-stage validation, and JSONL serialization.

Every accepted example survives the full validation pass: the premise
re-parses into a valid graph, the hypothesis re-parses into a query, the
label is recomputed from the parsed text, and d-separation graphs satisfy
the structural validity bounds. Generation is deterministic: each example
slot draws from its own seed-derived RNG, so output depends only on the
spec and seed (and sharding by slot cannot change it).
"""

from __future__ import annotations

import json
import logging
import os
import random
import tempfile
from dataclasses import dataclass, field, replace

from . import graphs, textio
from .graphs import (
    ChainConfig,
    Dag,
    DagConfig,
    InvalidQueryError,
    GraphError,
    NameCollisionError,
    d_separated,
    dag_from_edges,
    draw_names,
    enumerate_undirected_paths,
    find_path,
    generate_chain,
    generate_dag,
)
from .textio import (
    DSEP,
    LABEL_NO,
    LABEL_YES,
    TRANSITIVITY,
    Example,
    HypothesisParseError,
    PremiseParseError,
    Query,
    parse_hypothesis,
    parse_premise,
    render_hypothesis,
    render_premise,
)

logger = logging.getLogger(__name__)

TASKS = (TRANSITIVITY, DSEP)
SUITES = ("train", "length", "branching", "reversed", "shuffled", "long-names", "adversarial")
ADVERSARIAL_KINDS = ("irrelevant", "broken", "extended")

REJECTION_REASONS = (
    "premise-parse",
    "hypothesis-parse",
    "label-mismatch",
    "edge-count-low",
    "edge-count-high",
    "unreachable-pair",
    "name-collision",
    "attempt-limit",
)

MAX_ATTEMPTS_STANDARD = 10
MAX_ATTEMPTS_ADVERSARIAL = 15
SUITE_BUDGET_FACTOR = 50

JSONL_KEYS = ("premise", "hypothesis", "label")


class DataError(ValueError):
    """Bad generation spec or unusable input data."""


class JsonlError(DataError):
    """A JSONL line failed to read; carries the 1-based line number."""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class SuiteGenerationError(RuntimeError):
    """Ran out of attempt budget before reaching the requested count."""

    def __init__(self, message: str, examples: list[Example], report: "ValidationReport"):
        super().__init__(message)
        self.examples = examples
        self.report = report


@dataclass
class ValidationReport:
    attempted: int = 0
    accepted: int = 0
    rejection_counts: dict[str, int] = field(default_factory=dict)

    def record_rejection(self, reason: str) -> None:
        if reason not in REJECTION_REASONS:
            raise ValueError(f"unknown rejection reason {reason!r}")
        self.rejection_counts[reason] = self.rejection_counts.get(reason, 0) + 1

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.attempted if self.attempted else 0.0

    @property
    def total_rejections(self) -> int:
        return sum(n for reason, n in self.rejection_counts.items() if reason != "attempt-limit")

    def to_dict(self) -> dict:
        return {
            "attempted": self.attempted,
            "accepted": self.accepted,
            "acceptance_rate": self.acceptance_rate,
            "rejection_counts": dict(sorted(self.rejection_counts.items())),
        }


@dataclass(frozen=True)
class SuiteParams:
    """Resolved generation knobs for one (task, suite) pair."""

    graph: str  # "chain" or "dag"
    length_range: tuple[int, int]  # chain length, or DAG node count
    name_len_range: tuple[int, int]
    p_flip_choices: tuple[float, ...] = (0.0, 0.3, 0.5)
    density_range: tuple[float, float] = (0.3, 0.6)
    z_size_max: int = 3
    reverse_edges: bool = False
    shuffle_sentences: bool = False
    balance_labels: bool = False


@dataclass(frozen=True)
class GenerationSpec:
    task: str
    suite: str
    count: int
    seed: int
    overrides: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.task not in TASKS:
            raise DataError(f"unknown task {self.task!r}")
        if self.suite not in SUITES:
            raise DataError(f"unknown suite {self.suite!r}")
        if self.suite == "adversarial" and self.task != TRANSITIVITY:
            raise DataError("the adversarial suite is defined for transitivity only")
        if self.count < 1:
            raise DataError("count must be positive")


@dataclass(frozen=True)
class AdversarialSpec:
    count: int
    seed: int

    def __post_init__(self) -> None:
        if self.count < 1:
            raise DataError("count must be positive")

    def mix_counts(self) -> tuple[int, int, int]:
        """Exact irrelevant/broken/extended counts (30/30/40 split)."""
        n_irr = (3 * self.count) // 10
        n_broken = (3 * self.count) // 10
        return n_irr, n_broken, self.count - n_irr - n_broken


def resolve_suite_params(task: str, suite: str, **overrides) -> SuiteParams:
    """Per-suite defaults; keyword overrides replace individual fields."""
    if suite == "train":
        params = SuiteParams(
            graph="chain" if task == TRANSITIVITY else "dag",
            length_range=(3, 6),
            name_len_range=(1, 3),
        )
    elif suite == "length":
        params = SuiteParams(graph="chain", length_range=(7, 15), name_len_range=(1, 3))
    elif suite == "branching":
        params = SuiteParams(
            graph="dag",
            length_range=(7, 15),
            name_len_range=(1, 3),
            density_range=(0.7, 1.2),
        )
    elif suite == "reversed":
        params = replace(resolve_suite_params(task, "train"), reverse_edges=True)
    elif suite == "shuffled":
        params = replace(
            resolve_suite_params(task, "train"),
            p_flip_choices=(0.5,),
            shuffle_sentences=True,
        )
    elif suite == "long-names":
        params = replace(resolve_suite_params(task, "train"), name_len_range=(8, 10))
    else:
        raise DataError(f"no standard parameters for suite {suite!r}")
    if overrides:
        params = replace(params, **overrides)
    return params


class _Rejected(Exception):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


def _build_graph(params: SuiteParams, rng: random.Random) -> Dag:
    if params.graph == "chain":
        config = ChainConfig(
            length_range=params.length_range,
            name_len_range=params.name_len_range,
            p_flip=rng.choice(params.p_flip_choices),
        )
        g = generate_chain(config, rng)
    else:
        config = DagConfig(
            num_nodes_range=params.length_range,
            edge_density_range=params.density_range,
            name_len_range=params.name_len_range,
        )
        g = generate_dag(config, rng)
    if params.reverse_edges:
        g = g.reversed()
    return g


def _pick_transitivity_query(g: Dag, rng: random.Random, balance: bool) -> Query:
    if balance:
        positives, negatives = [], []
        for a in g.nodes:
            for b in g.nodes:
                if a != b:
                    (positives if find_path(g, a, b) else negatives).append((a, b))
        pools = [p for p in (positives, negatives) if p]
        pool = rng.choice(pools) if len(pools) == 2 and rng.random() < 0.5 else None
        if pool is None:
            pool = positives + negatives
        a, b = rng.choice(pool)
    else:
        a, b = rng.sample(list(g.nodes), 2)
    return Query(TRANSITIVITY, a, b)


def _pick_dsep_query(g: Dag, rng: random.Random, z_size_max: int) -> Query:
    x, y = rng.sample(list(g.nodes), 2)
    remaining = sorted(set(g.nodes) - {x, y})
    size = rng.randint(0, min(z_size_max, len(remaining)))
    z = frozenset(rng.sample(remaining, size))
    return Query(DSEP, x, y, z)


def oracle_answer(g: Dag, query: Query) -> str:
    if query.kind == TRANSITIVITY:
        return LABEL_YES if find_path(g, query.a, query.b) else LABEL_NO
    return LABEL_YES if d_separated(g, query.a, query.b, query.z) else LABEL_NO


def validate_example(example: Example) -> str | None:
    """Re-run the full validation pass on serialized text. Returns None when
    the example is acceptable, otherwise one of REJECTION_REASONS.

    The task is inferred from the hypothesis. Premises that parse into an
    invalid graph (cycles, self-edges) count as premise-parse failures, and
    labels that cannot be recomputed (query node absent from the premise)
    count as label mismatches.
    """
    try:
        edges = parse_premise(example.premise)
        g = dag_from_edges(edges)
    except (PremiseParseError, GraphError):
        return "premise-parse"
    try:
        query = parse_hypothesis(example.hypothesis)
    except HypothesisParseError:
        return "hypothesis-parse"
    if query.kind == DSEP:
        node_set = set(g.nodes)
        if not ({query.a, query.b} | set(query.z)) <= node_set:
            return "label-mismatch"
        if len(g.edges) < len(g.nodes) - 1:
            return "edge-count-low"
        if len(g.edges) > 3 * len(g.nodes):
            return "edge-count-high"
        if not enumerate_undirected_paths(g, query.a, query.b):
            return "unreachable-pair"
    try:
        recomputed = oracle_answer(g, query)
    except (InvalidQueryError, GraphError):
        return "label-mismatch"
    if recomputed != example.label:
        return "label-mismatch"
    return None


def _attempt_example(task: str, params: SuiteParams, rng: random.Random) -> Example:
    try:
        g = _build_graph(params, rng)
    except NameCollisionError:
        raise _Rejected("name-collision")
    if task == TRANSITIVITY:
        query = _pick_transitivity_query(g, rng, params.balance_labels)
    else:
        query = _pick_dsep_query(g, rng, params.z_size_max)
    label = oracle_answer(g, query)
    order = list(g.edges)
    if params.shuffle_sentences:
        rng.shuffle(order)
    example = Example(render_premise(g, order), render_hypothesis(query), label)
    reason = validate_example(example)
    if reason is not None:
        raise _Rejected(reason)
    return example


def generate_example(
    task: str,
    params: SuiteParams,
    rng: random.Random,
    max_attempts: int = MAX_ATTEMPTS_STANDARD,
    report: ValidationReport | None = None,
) -> Example | None:
    """Generate one validated example, retrying up to max_attempts times.
    Returns None (recording attempt-limit) if every attempt was rejected."""
    report = report if report is not None else ValidationReport()
    for _ in range(max_attempts):
        report.attempted += 1
        try:
            example = _attempt_example(task, params, rng)
        except _Rejected as rej:
            report.record_rejection(rej.reason)
            continue
        report.accepted += 1
        return example
    report.record_rejection("attempt-limit")
    return None


def _slot_rng(seed: int, namespace: str, slot: int) -> random.Random:
    return random.Random(f"{namespace}/{seed}/{slot}")


def generate_suite(spec: GenerationSpec) -> tuple[list[Example], ValidationReport]:
    """Generate exactly spec.count validated examples for a standard suite.

    Raises SuiteGenerationError (carrying partial output) if the global
    attempt budget of count * 50 runs out first.
    """
    if spec.suite == "adversarial":
        return generate_adversarial(AdversarialSpec(spec.count, spec.seed))
    params = resolve_suite_params(spec.task, spec.suite, **spec.overrides)
    report = ValidationReport()
    examples: list[Example] = []
    budget = spec.count * SUITE_BUDGET_FACTOR
    slot = 0
    namespace = f"{spec.task}/{spec.suite}"
    while len(examples) < spec.count:
        if report.attempted >= budget:
            raise SuiteGenerationError(
                f"attempt budget {budget} exhausted after {len(examples)} examples",
                examples,
                report,
            )
        remaining = budget - report.attempted
        rng = _slot_rng(spec.seed, namespace, slot)
        example = generate_example(
            spec.task, params, rng, min(MAX_ATTEMPTS_STANDARD, remaining), report
        )
        if example is not None:
            examples.append(example)
        slot += 1
    logger.info(
        "suite %s/%s: accepted %d of %d attempts (%.1f%%)",
        spec.task,
        spec.suite,
        report.accepted,
        report.attempted,
        100.0 * report.acceptance_rate,
    )
    return examples, report


def _attempt_irrelevant(rng: random.Random) -> Example:
    """Main chain plus 1-3 disconnected chains; query stays on the main chain."""
    main_len = rng.randint(3, 5)
    extra_lens = [rng.randint(2, 4) for _ in range(rng.randint(1, 3))]
    try:
        names = draw_names(main_len + sum(extra_lens), (1, 3), rng)
    except NameCollisionError:
        raise _Rejected("name-collision")
    p_flip = rng.choice((0.0, 0.3, 0.5))
    edges: list[tuple[str, str]] = []
    main_nodes = names[:main_len]
    for i in range(main_len - 1):
        a, b = main_nodes[i], main_nodes[i + 1]
        if rng.random() < p_flip:
            a, b = b, a
        edges.append((a, b))
    offset = main_len
    for length in extra_lens:
        chain = names[offset : offset + length]
        offset += length
        for i in range(length - 1):
            a, b = chain[i], chain[i + 1]
            if rng.random() < p_flip:
                a, b = b, a
            edges.append((a, b))
    g = Dag(names, tuple(edges))
    a, b = rng.sample(list(main_nodes), 2)
    query = Query(TRANSITIVITY, a, b)
    example = Example(render_premise(g), render_hypothesis(query), oracle_answer(g, query))
    reason = validate_example(example)
    if reason is not None:
        raise _Rejected(reason)
    return example


def _attempt_broken(rng: random.Random) -> Example:
    """Two or three disconnected forward chains; the query spans components,
    so the label is always No."""
    lengths = [rng.randint(2, 4) for _ in range(rng.randint(2, 3))]
    try:
        names = draw_names(sum(lengths), (1, 3), rng)
    except NameCollisionError:
        raise _Rejected("name-collision")
    components: list[tuple[str, ...]] = []
    edges: list[tuple[str, str]] = []
    offset = 0
    for length in lengths:
        chain = names[offset : offset + length]
        offset += length
        components.append(chain)
        edges.extend((chain[i], chain[i + 1]) for i in range(length - 1))
    g = Dag(names, tuple(edges))
    comp_a, comp_b = rng.sample(range(len(components)), 2)
    a = rng.choice(list(components[comp_a]))
    b = rng.choice(list(components[comp_b]))
    example = Example(
        render_premise(g), render_hypothesis(Query(TRANSITIVITY, a, b)), LABEL_NO
    )
    reason = validate_example(example)
    if reason is not None:
        raise _Rejected(reason)
    return example


def _attempt_extended(rng: random.Random) -> Example:
    """Long forward chain queried end to end; the label is always Yes."""
    length = rng.randint(7, 12)
    try:
        names = draw_names(length, (1, 3), rng)
    except NameCollisionError:
        raise _Rejected("name-collision")
    edges = tuple((names[i], names[i + 1]) for i in range(length - 1))
    g = Dag(names, edges)
    example = Example(
        render_premise(g),
        render_hypothesis(Query(TRANSITIVITY, names[0], names[-1])),
        LABEL_YES,
    )
    reason = validate_example(example)
    if reason is not None:
        raise _Rejected(reason)
    return example


_ADVERSARIAL_BUILDERS = {
    "irrelevant": _attempt_irrelevant,
    "broken": _attempt_broken,
    "extended": _attempt_extended,
}


def generate_adversarial(spec: AdversarialSpec) -> tuple[list[Example], ValidationReport]:
    """Adversarial transitivity set with an exact 30/30/40 irrelevant /
    broken / extended mix, output order shuffled by the seed."""
    report = ValidationReport()
    budget = spec.count * SUITE_BUDGET_FACTOR
    examples: list[Example] = []
    for kind, quota in zip(ADVERSARIAL_KINDS, spec.mix_counts()):
        builder = _ADVERSARIAL_BUILDERS[kind]
        produced = 0
        slot = 0
        while produced < quota:
            if report.attempted >= budget:
                raise SuiteGenerationError(
                    f"attempt budget {budget} exhausted after {len(examples)} examples",
                    examples,
                    report,
                )
            rng = _slot_rng(spec.seed, f"adversarial/{kind}", slot)
            slot += 1
            example = None
            for _ in range(min(MAX_ATTEMPTS_ADVERSARIAL, budget - report.attempted)):
                report.attempted += 1
                try:
                    example = builder(rng)
                    break
                except _Rejected as rej:
                    report.record_rejection(rej.reason)
            if example is None:
                report.record_rejection("attempt-limit")
                continue
            report.accepted += 1
            examples.append(example)
            produced += 1
    random.Random(f"adversarial/shuffle/{spec.seed}").shuffle(examples)
    logger.info(
        "adversarial suite: accepted %d of %d attempts (%.1f%%)",
        report.accepted,
        report.attempted,
        100.0 * report.acceptance_rate,
    )
    return examples, report


def example_to_json(example: Example) -> str:
    return json.dumps(
        {"premise": example.premise, "hypothesis": example.hypothesis, "label": example.label},
        ensure_ascii=False,
    )


def write_jsonl(examples: list[Example], path: str) -> None:
    """One object per line with exactly premise/hypothesis/label keys.
    Written atomically (temp file + rename), UTF-8, newline-terminated."""
    payload = "".join(example_to_json(ex) + "\n" for ex in examples)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".jsonl")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_jsonl(path: str) -> list[Example]:
    """Strict reader: malformed JSON, missing/unknown keys, non-string values,
    or a label outside {Yes, No} raise JsonlError naming the line."""
    examples: list[Example] = []
    with open(path, "r", encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                raise JsonlError(line_number, "blank line")
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise JsonlError(line_number, f"invalid JSON ({exc.msg})")
            if not isinstance(obj, dict):
                raise JsonlError(line_number, "expected a JSON object")
            if set(obj.keys()) != set(JSONL_KEYS):
                raise JsonlError(
                    line_number, f"expected keys {list(JSONL_KEYS)}, got {sorted(obj.keys())}"
                )
            if not all(isinstance(obj[k], str) for k in JSONL_KEYS):
                raise JsonlError(line_number, "all values must be strings")
            if obj["label"] not in (LABEL_YES, LABEL_NO):
                raise JsonlError(line_number, f"label must be Yes or No, got {obj['label']!r}")
            examples.append(Example(obj["premise"], obj["hypothesis"], obj["label"]))
    return examples


def validate_file(path: str) -> ValidationReport:
    """Re-run the validation pass over a JSONL file, counting rejections by
    reason. Files emitted by this package validate with zero rejections."""
    examples = read_jsonl(path)
    report = ValidationReport()
    for example in examples:
        report.attempted += 1
        reason = validate_example(example)
        if reason is None:
            report.accepted += 1
        else:
            report.record_rejection(reason)
    return report
