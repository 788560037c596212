"""Decomposition-based multi-objective engine.

A maximization problem is split into scalar subproblems, one per weight
vector on a simplex lattice.  Every generation each subproblem learns a model
from its selection neighborhood, samples one offspring, and offers it to its
replacement neighborhood under the configured scalarization; all offspring
also feed an external archive of non-dominated solutions.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import metrics
from .config import RunConfig, validate_config
from .problems import make_problem
from .variation import diversity_preserving_sample, make_operator

RNG_KIND = "numpy-pcg64"


def generate_weight_vectors(h: int, m: int = 2) -> np.ndarray:
    """All m-part compositions of h, scaled to the unit simplex.

    Rows come out in ascending lexicographic order, so for m = 2 subproblem 0
    carries weight (0, 1) and the last subproblem (1, 0).  The row count is
    C(h + m - 1, m - 1).
    """
    if h < 1:
        raise ValueError(f"granularity h must be >= 1, got {h}")
    if m < 2:
        raise ValueError(f"need at least two objectives, got {m}")
    rows = []
    for bars in itertools.combinations(range(h + m - 1), m - 1):
        prev = -1
        parts = []
        for b in bars:
            parts.append(b - prev - 1)
            prev = b
        parts.append(h + m - 2 - prev)
        rows.append(parts)
    assert len(rows) == math.comb(h + m - 1, m - 1)
    return np.asarray(rows, dtype=np.float64) / h


def build_neighborhoods(weights: np.ndarray, size: int) -> np.ndarray:
    """Indices of each weight vector's `size` nearest vectors (itself included).

    Sorted by ascending Euclidean distance, ties by ascending index, so
    column 0 is always the subproblem itself.
    """
    w = np.asarray(weights, dtype=np.float64)
    num = len(w)
    if not 1 <= size <= num:
        raise ValueError(f"neighborhood size must be in [1, {num}], got {size}")
    diff = w[:, None, :] - w[None, :, :]
    d2 = (diff * diff).sum(axis=2)
    order = np.argsort(d2, axis=1, kind="stable")
    return order[:, :size].copy()


# ---------------------------------------------------------------------------
# Scalarizations (objectives are maximized)


def weighted_sum(objectives, weights):
    """Weighted-sum value(s); larger is better."""
    o = np.asarray(objectives, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    return (o * w).sum(axis=-1)


def tchebycheff(objectives, weights, reference):
    """Weighted Tchebycheff distance to the reference point; smaller is better."""
    o = np.asarray(objectives, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    z = np.asarray(reference, dtype=np.float64)
    return (w * np.abs(o - z)).max(axis=-1)


def scalarize(kind: str, objectives, weights, reference=None):
    """Dispatch by name; see ``weighted_sum`` and ``tchebycheff``."""
    if kind == "weighted_sum":
        return weighted_sum(objectives, weights)
    if kind == "tchebycheff":
        if reference is None:
            raise ValueError("tchebycheff scalarization needs a reference point")
        return tchebycheff(objectives, weights, reference)
    raise ValueError(f"unknown scalarization {kind!r}")


def update_reference_point(reference: np.ndarray, objectives: np.ndarray) -> np.ndarray:
    """Component-wise best (maximum) of the reference and a new objective vector."""
    return np.maximum(np.asarray(reference, dtype=np.float64), np.asarray(objectives, dtype=np.float64))


# ---------------------------------------------------------------------------
# External archive


def _dominates_key(a: tuple, b: tuple) -> bool:
    gt = False
    for x, y in zip(a, b):
        if x < y:
            return False
        if x > y:
            gt = True
    return gt


class ExternalArchive:
    """All non-dominated solutions seen so far.

    Solutions are grouped by objective point; a genotype is stored at most
    once.  Adding a solution evicts every stored point it dominates.
    """

    def __init__(self):
        self._points: dict[tuple, dict[bytes, None]] = {}
        self._genotypes: dict[bytes, tuple] = {}

    def __len__(self) -> int:
        return len(self._genotypes)

    @property
    def num_points(self) -> int:
        return len(self._points)

    def add(self, genotype: np.ndarray, objectives: np.ndarray) -> bool:
        """Offer one solution; returns True iff it was inserted."""
        key = tuple(np.asarray(objectives, dtype=np.float64).tolist())
        points = self._points
        dominated = None
        for p in points:
            if _dominates_key(p, key):
                return False
            if _dominates_key(key, p):
                if dominated is None:
                    dominated = [p]
                else:
                    dominated.append(p)
        if dominated:
            for p in dominated:
                for gb in points.pop(p):
                    del self._genotypes[gb]
        gb = np.ascontiguousarray(genotype, dtype=np.uint8).tobytes()
        if gb in self._genotypes:
            return False
        points.setdefault(key, {})[gb] = None
        self._genotypes[gb] = key
        return True

    def objective_points(self) -> np.ndarray:
        """Distinct objective points, one row each (insertion order)."""
        return np.asarray(list(self._points.keys()), dtype=np.float64)

    def entries(self):
        """Yield (genotype, objective point) pairs in insertion order."""
        for key, bucket in self._points.items():
            pt = np.asarray(key, dtype=np.float64)
            for gb in bucket:
                yield np.frombuffer(gb, dtype=np.uint8).copy(), pt

    def sorted_entries(self):
        """Entries sorted by descending first objective, then genotype bytes."""
        rows = [(key, gb) for key, bucket in self._points.items() for gb in bucket]
        rows.sort(key=lambda t: (-t[0][0], t[1]))
        return [(np.frombuffer(gb, dtype=np.uint8).copy(), np.asarray(key, dtype=np.float64)) for key, gb in rows]


# ---------------------------------------------------------------------------
# Run records


@dataclass
class MetricsRecord:
    """One per-generation progress row."""

    generation: int
    evaluations: int
    igd: float
    true_count: int
    archive_size: int


@dataclass
class StructureLog:
    """Oriented dependency edges recorded during a run, per (generation, subproblem)."""

    n: int
    entries: list[tuple[int, int, np.ndarray]] = field(default_factory=list)

    def record(self, generation: int, subproblem: int, edges) -> None:
        arr = np.asarray(list(edges), dtype=np.int32).reshape(-1, 2)
        self.entries.append((generation, subproblem, arr))


@dataclass
class RunState:
    """Mutable engine state shared with the replacement step."""

    problem: object
    weights: np.ndarray
    select_neighbors: np.ndarray
    replace_neighbors: np.ndarray
    population: np.ndarray
    objectives: np.ndarray
    reference: np.ndarray
    archive: ExternalArchive
    rng: np.random.Generator
    scalarization: str
    generation: int = 0


def update_population(state: RunState, genotype: np.ndarray, objectives: np.ndarray, index: int, n_r: int) -> int:
    """Offer an offspring to subproblem ``index``'s replacement neighborhood.

    Neighbors are visited in uniformly random order; each whose current
    solution is strictly worse under its own scalarized subproblem adopts the
    offspring, up to ``n_r`` adoptions.  Returns the number of replacements.
    """
    if n_r < 1:
        raise ValueError(f"n_r must be >= 1, got {n_r}")
    r_idx = state.replace_neighbors[index]
    w = state.weights[r_idx]
    cur = state.objectives[r_idx]
    if state.scalarization == "tchebycheff":
        z = state.reference
        g_new = (w * np.abs(objectives - z)).max(axis=1)
        g_cur = (w * np.abs(cur - z)).max(axis=1)
        better = g_new < g_cur
    elif state.scalarization == "weighted_sum":
        g_new = w @ objectives
        g_cur = (w * cur).sum(axis=1)
        better = g_new > g_cur
    else:
        raise ValueError(f"unknown scalarization {state.scalarization!r}")
    # The traversal order is drawn unconditionally so the stream of random
    # draws per offspring does not depend on the comparison outcomes.
    order = state.rng.permutation(len(r_idx)).tolist()
    if not better.any():
        return 0
    replaced = 0
    flags = better.tolist()
    for t in order:
        if flags[t]:
            slot = r_idx[t]
            state.population[slot] = genotype
            state.objectives[slot] = objectives
            replaced += 1
            if replaced == n_r:
                break
    return replaced


@dataclass
class RunResult:
    """Everything a finished run produced."""

    config: RunConfig
    seed: int
    rng_kind: str
    evaluations: int
    population: np.ndarray
    objectives: np.ndarray
    archive: ExternalArchive
    trace: list[MetricsRecord]
    structure: StructureLog | None

    @property
    def final(self) -> MetricsRecord:
        return self.trace[-1]

    def to_dict(self) -> dict:
        """Deterministic JSON-ready summary (identical for identical runs)."""
        from .problems import genotype_to_string

        archive_rows = [
            {"objectives": pt.tolist(), "genotype": genotype_to_string(g)}
            for g, pt in self.archive.sorted_entries()
        ]
        return {
            "seed": self.seed,
            "rng": self.rng_kind,
            "evaluations": self.evaluations,
            "trace": [[r.generation, r.evaluations, r.igd, r.true_count, r.archive_size] for r in self.trace],
            "archive": archive_rows,
            "population": [genotype_to_string(g) for g in self.population],
            "objectives": self.objectives.tolist(),
            "structure_entries": 0 if self.structure is None else len(self.structure.entries),
        }


def _metrics_record(generation: int, evaluations: int, front, archive: ExternalArchive) -> MetricsRecord:
    pts = archive.objective_points()
    return MetricsRecord(
        generation=generation,
        evaluations=evaluations,
        igd=metrics.igd(front.points, pts),
        true_count=metrics.count_matched_points(front.points, pts),
        archive_size=len(archive),
    )


def run(config: RunConfig) -> RunResult:
    """Execute one full optimization run described by ``config``."""
    cfg = validate_config(config).resolved()
    problem = make_problem(cfg.problem, cfg.n, layout=cfg.block_layout)
    weights = generate_weight_vectors(cfg.h, problem.num_objectives)
    num = len(weights)
    select_nb = build_neighborhoods(weights, cfg.t_s)
    replace_nb = select_nb if cfg.t_r == cfg.t_s else build_neighborhoods(weights, cfg.t_r)
    # Model learning and duplicate checks see the neighborhood in ascending
    # subproblem order (the incremental operator depends on a fixed order).
    select_asc = np.sort(select_nb, axis=1)

    rng = np.random.default_rng(cfg.seed)
    population = rng.integers(0, 2, size=(num, problem.n), dtype=np.uint8)
    objectives = problem.evaluate_many(population)
    reference = objectives.max(axis=0)
    archive = ExternalArchive()
    for g, o in zip(population, objectives):
        archive.add(g, o)
    evaluations = num

    operator = make_operator(cfg.operator)
    op_state = operator.init_state(num, problem.n)
    state = RunState(
        problem=problem,
        weights=weights,
        select_neighbors=select_nb,
        replace_neighbors=replace_nb,
        population=population,
        objectives=objectives,
        reference=reference,
        archive=archive,
        rng=rng,
        scalarization=cfg.scalarization,
    )
    front = problem.true_front()
    trace = [_metrics_record(0, evaluations, front, archive)]
    structure = StructureLog(problem.n) if cfg.structure_log else None
    sub_filter = None if cfg.structure_subproblems is None else frozenset(cfg.structure_subproblems)
    max_tries = cfg.t_s

    for gen in range(1, cfg.generations + 1):
        state.generation = gen
        log_gen = structure is not None and (gen - 1) % cfg.structure_stride == 0
        for i in range(num):
            solutions = population[select_asc[i]]
            if op_state is None:
                model, _ = operator.learn(solutions, None, rng)
            else:
                model, op_state[i] = operator.learn(solutions, op_state[i], rng)
            if cfg.diversity_sampling:
                y = diversity_preserving_sample(lambda r: operator.sample(model, r), solutions, max_tries, rng)
            else:
                y = operator.sample(model, rng)
            fy = problem.evaluate(y)
            state.reference = update_reference_point(state.reference, fy)
            update_population(state, y, fy, i, cfg.n_r)
            archive.add(y, fy)
            evaluations += 1
            if log_gen and (sub_filter is None or i in sub_filter):
                structure.record(gen, i, model.edges)
        trace.append(_metrics_record(gen, evaluations, front, archive))

    return RunResult(
        config=cfg,
        seed=cfg.seed,
        rng_kind=RNG_KIND,
        evaluations=evaluations,
        population=population,
        objectives=state.objectives,
        archive=archive,
        trace=trace,
        structure=structure,
    )
