"""Per-subproblem variation operators.

Each operator follows the same two-step protocol: ``learn`` digests the
neighborhood's current solutions into a model, ``sample`` draws a new genotype
from that model.  Implemented families:

* ``ga``   -- uniform crossover of two neighborhood parents plus bit-flip
  mutation (the "model" is just the chosen parent pair; retries re-run
  crossover and mutation on the same parents).
* ``umda`` -- independent per-position Bernoulli frequencies with a Bayesian
  prior.
* ``pbil`` -- a persistent probability vector per subproblem, nudged towards
  each neighborhood solution by a learning rate.
* ``tree`` -- a dependency-tree distribution: pairwise mutual information,
  maximum-weight spanning forest, ancestral sampling.

All genotypes are numpy uint8 arrays of 0/1.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

OPERATOR_KINDS = ("ga", "umda", "pbil", "tree")

# Mutual-information values below this floor are floating-point noise from the
# entropy sum and are snapped to exactly zero (count-based tables that are not
# exactly independent sit many orders of magnitude above it).
_MI_NOISE_FLOOR = 1e-12


@dataclass(frozen=True)
class OperatorConfig:
    """Parameters shared by the operator family.

    ``mutation_rate=None`` means "one expected flip per genotype", i.e. 1/n
    resolved against the genotype length at sampling time.
    """

    kind: str = "tree"
    crossover_rate: float = 1.0
    mutation_rate: float | None = None
    alpha: float = 0.05
    prior_r: float = 1.0
    mi_threshold: float = 0.0


def validate_operator_config(cfg: OperatorConfig) -> None:
    if cfg.kind not in OPERATOR_KINDS:
        raise ValueError(f"unknown operator kind {cfg.kind!r} (available: {', '.join(OPERATOR_KINDS)})")
    if not 0.0 <= cfg.crossover_rate <= 1.0:
        raise ValueError(f"crossover_rate must be in [0, 1], got {cfg.crossover_rate}")
    if cfg.mutation_rate is not None and not 0.0 <= cfg.mutation_rate <= 1.0:
        raise ValueError(f"mutation_rate must be in [0, 1], got {cfg.mutation_rate}")
    if not 0.0 < cfg.alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {cfg.alpha}")
    if cfg.prior_r < 0.0:
        raise ValueError(f"prior_r must be >= 0, got {cfg.prior_r}")
    if cfg.mi_threshold < 0.0:
        raise ValueError(f"mi_threshold must be >= 0, got {cfg.mi_threshold}")


# ---------------------------------------------------------------------------
# Genetic operators


def _ga_child(a: np.ndarray, b: np.ndarray, cfg: OperatorConfig, rng: np.random.Generator) -> np.ndarray:
    n = len(a)
    if rng.random() < cfg.crossover_rate:
        child = np.where(rng.random(n) < 0.5, a, b)
    else:
        child = a.copy()
    rate = cfg.mutation_rate if cfg.mutation_rate is not None else 1.0 / n
    flips = rng.random(n) < rate
    return np.where(flips, child ^ 1, child).astype(np.uint8, copy=False)


def _pick_parents(count: int, rng: np.random.Generator) -> tuple[int, int]:
    i = int(rng.integers(count))
    j = int(rng.integers(count - 1))
    if j >= i:
        j += 1
    return i, j


def ga_variation(neighbors: np.ndarray, cfg: OperatorConfig, rng: np.random.Generator) -> np.ndarray:
    """One offspring: uniform crossover of two distinct neighbors, then mutation."""
    nb = np.asarray(neighbors)
    if nb.ndim != 2 or len(nb) < 2:
        raise ValueError("genetic variation needs at least two neighborhood solutions")
    validate_operator_config(cfg)
    i, j = _pick_parents(len(nb), rng)
    return _ga_child(nb[i], nb[j], cfg, rng)


# ---------------------------------------------------------------------------
# Univariate models (UMDA / PBIL)


@dataclass
class UnivariateModel:
    """Independent Bernoulli model: probs[j] = p(x_j = 1)."""

    probs: np.ndarray


def learn_univariate(solutions: np.ndarray, prior_r: float = 1.0) -> UnivariateModel:
    """Position-wise frequencies with a symmetric Bayesian prior.

    p_j = (#ones_j + r) / (#solutions + 2r); with r = 0 this is the maximum
    likelihood estimate, r = 1 the usual add-one smoothing.
    """
    s = np.asarray(solutions)
    if s.ndim != 2 or len(s) == 0:
        raise ValueError("need a non-empty (k, n) array of solutions")
    if prior_r < 0.0:
        raise ValueError(f"prior_r must be >= 0, got {prior_r}")
    ones = s.sum(axis=0, dtype=np.float64)
    return UnivariateModel((ones + prior_r) / (len(s) + 2.0 * prior_r))


def sample_univariate(model: UnivariateModel, rng: np.random.Generator) -> np.ndarray:
    p = model.probs
    return (rng.random(len(p)) < p).astype(np.uint8)


def pbil_update(probs: np.ndarray, solutions: np.ndarray, alpha: float) -> np.ndarray:
    """Incremental frequency update: p <- (1-alpha) p + alpha x, once per solution.

    Solutions are folded in the order given; the input vector is not modified.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    s = np.asarray(solutions, dtype=np.float64)
    if s.ndim != 2 or len(s) == 0:
        raise ValueError("need a non-empty (k, n) array of solutions")
    p = np.asarray(probs, dtype=np.float64).copy()
    if p.shape != (s.shape[1],):
        raise ValueError(f"probability vector must have shape ({s.shape[1]},), got {p.shape}")
    keep = 1.0 - alpha
    for row in s:
        p *= keep
        p += alpha * row
    return p


# ---------------------------------------------------------------------------
# Dependency-tree model


@dataclass
class TreeModel:
    """A forest-factorized distribution over bit positions.

    parent[j] is the parent position or -1 for component roots; root_probs[j]
    is the smoothed marginal p(x_j = 1) (used when j is a root); cond_probs[j]
    is (p(x_j=1 | parent=0), p(x_j=1 | parent=1)) for non-roots; edges holds
    the oriented (parent, child) pairs in discovery order; order is a
    topological ordering of all positions.
    """

    parent: np.ndarray
    root_probs: np.ndarray
    cond_probs: np.ndarray
    edges: list[tuple[int, int]]
    order: np.ndarray

    def __post_init__(self):
        self._plan = None

    def sampling_plan(self) -> list[tuple[int, int, float, float]]:
        """Topologically ordered (pos, parent, p1_if_parent0, p1_if_parent1) rows."""
        if self._plan is None:
            par = self.parent.tolist()
            roots = self.root_probs.tolist()
            cond = self.cond_probs.tolist()
            plan = []
            for j in self.order.tolist():
                pj = par[j]
                if pj < 0:
                    plan.append((j, -1, roots[j], roots[j]))
                else:
                    plan.append((j, pj, cond[j][0], cond[j][1]))
            self._plan = plan
        return self._plan


_TRIU_CACHE: dict[int, tuple[np.ndarray, np.ndarray, list[int], list[int]]] = {}


def _triu_pairs(n: int):
    cached = _TRIU_CACHE.get(n)
    if cached is None:
        iu, ju = np.triu_indices(n, 1)
        cached = (iu, ju, iu.tolist(), ju.tolist())
        _TRIU_CACHE[n] = cached
    return cached


def _plogp(x: np.ndarray) -> np.ndarray:
    safe = np.where(x > 0.0, x, 1.0)
    return x * np.log(safe)


def _mi_from_counts(num: int, ones: np.ndarray, c11: np.ndarray, prior_r: float) -> np.ndarray:
    c10 = ones[:, None] - c11
    c01 = ones[None, :] - c11
    c00 = num - ones[:, None] - ones[None, :] + c11
    denom = num + 4.0 * prior_r
    joint = (np.stack([c00, c01, c10, c11]) + prior_r) / denom
    # Marginals obtained by summing the smoothed bivariate table.
    m1 = (ones + 2.0 * prior_r) / denom
    m0 = (num - ones + 2.0 * prior_r) / denom
    neg_h = _plogp(m0) + _plogp(m1)
    terms = _plogp(joint)
    # Group the additions so every elementwise sum pairs a value with its own
    # transpose counterpart; commutativity then makes the matrix exactly
    # symmetric instead of symmetric-up-to-rounding.
    mi = (terms[0] + terms[3]) + (terms[1] + terms[2])
    mi -= neg_h[:, None] + neg_h[None, :]
    np.maximum(mi, 0.0, out=mi)
    mi[mi < _MI_NOISE_FLOOR] = 0.0
    np.fill_diagonal(mi, 0.0)
    return mi


def mutual_information_matrix(solutions: np.ndarray, prior_r: float = 1.0) -> np.ndarray:
    """Pairwise mutual information (natural log) between bit positions.

    Bivariate cell counts are smoothed to (count + r) / (k + 4r) and the
    univariate marginals are the sums of the smoothed table.  The result is
    symmetric, non-negative, and has a zero diagonal; exactly independent
    pairs score exactly zero.
    """
    s = np.asarray(solutions, dtype=np.float64)
    if s.ndim != 2 or len(s) < 2:
        raise ValueError("mutual information needs at least two solutions")
    if prior_r < 0.0:
        raise ValueError(f"prior_r must be >= 0, got {prior_r}")
    return _mi_from_counts(len(s), s.sum(axis=0), s.T @ s, prior_r)


def max_weight_spanning_forest(weights: np.ndarray, threshold: float = 0.0) -> list[tuple[int, int]]:
    """Kruskal's maximum-weight spanning forest over a symmetric weight matrix.

    Candidate edges are scanned by descending weight, ties broken by ascending
    (i, j); only the upper triangle is consulted.  After the forest is built,
    edges whose weight is <= threshold are dropped, so a fully zero matrix
    with the default threshold yields an empty edge list.
    """
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValueError(f"weight matrix must be square, got shape {w.shape}")
    n = w.shape[0]
    if n < 2:
        return []
    iu, ju, iu_list, ju_list = _triu_pairs(n)
    vals = w[iu, ju]
    scan = np.lexsort((ju, iu, -vals)).tolist()
    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    accepted: list[tuple[int, int, float]] = []
    want = n - 1
    for t in scan:
        a = iu_list[t]
        b = ju_list[t]
        ra = find(a)
        rb = find(b)
        if ra != rb:
            parent[rb] = ra
            accepted.append((a, b, float(vals[t])))
            if len(accepted) == want:
                break
    return [(a, b) for a, b, wt in accepted if wt > threshold]


def _orient_forest(edges: list[tuple[int, int]], n: int):
    """Root every component at its lowest index and orient edges away from it."""
    adj: dict[int, list[int]] = {}
    for a, b in edges:
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    for lst in adj.values():
        lst.sort()
    parent = np.full(n, -1, dtype=np.int64)
    order: list[int] = []
    seen = bytearray(n)
    oriented: list[tuple[int, int]] = []
    for root in range(n):
        if seen[root]:
            continue
        seen[root] = 1
        order.append(root)
        if root not in adj:
            continue
        queue = deque([root])
        while queue:
            u = queue.popleft()
            for v in adj.get(u, ()):
                if not seen[v]:
                    seen[v] = 1
                    parent[v] = u
                    order.append(v)
                    oriented.append((u, v))
                    queue.append(v)
    return parent, np.asarray(order, dtype=np.int64), oriented


def learn_tree(solutions: np.ndarray, cfg: OperatorConfig | None = None) -> TreeModel:
    """Fit a dependency forest to the solutions.

    Steps: pairwise mutual information, maximum-weight spanning forest with
    threshold pruning, then smoothed marginal and parent-conditional
    frequencies.  With no surviving edges the model degenerates to the same
    product of marginals ``learn_univariate`` produces.

    The dependency structure is scored with maximum-likelihood frequencies:
    the prior acts as a mutation-equivalent on the sampling parameters
    (marginals and conditionals) only.  Smoothing the MI input as well would
    manufacture identical positive weights between fully-converged positions,
    and the spanning forest would then wire unrelated variables together on
    tie-breaks alone.
    """
    if cfg is None:
        cfg = OperatorConfig(kind="tree")
    validate_operator_config(cfg)
    s = np.asarray(solutions, dtype=np.float64)
    if s.ndim != 2 or len(s) < 2:
        raise ValueError("tree learning needs at least two solutions")
    num, n = s.shape
    r = cfg.prior_r
    ones = s.sum(axis=0)
    c11 = s.T @ s
    mi = _mi_from_counts(num, ones, c11, 0.0)
    edges = max_weight_spanning_forest(mi, cfg.mi_threshold)
    parent, order, oriented = _orient_forest(edges, n)
    root_probs = (ones + r) / (num + 2.0 * r)
    cond = np.full((n, 2), 0.5, dtype=np.float64)
    if oriented:
        pe = np.fromiter((p for p, _ in oriented), dtype=np.int64, count=len(oriented))
        ce = np.fromiter((c for _, c in oriented), dtype=np.int64, count=len(oriented))
        n11 = c11[pe, ce]
        d1 = ones[pe] + 2.0 * r
        d0 = (num - ones[pe]) + 2.0 * r
        # An unseen parent value with r = 0 leaves the conditional undefined;
        # keep it at the uninformative 0.5 (it is never reached by sampling).
        cond[ce, 1] = np.where(d1 > 0.0, (n11 + r) / np.where(d1 > 0.0, d1, 1.0), 0.5)
        cond[ce, 0] = np.where(d0 > 0.0, ((ones[ce] - n11) + r) / np.where(d0 > 0.0, d0, 1.0), 0.5)
    return TreeModel(parent=parent, root_probs=root_probs, cond_probs=cond, edges=oriented, order=order)


def sample_tree(model: TreeModel, rng: np.random.Generator) -> np.ndarray:
    """Ancestral sampling: roots from marginals, children from parent conditionals."""
    plan = model.sampling_plan()
    u = rng.random(len(plan))
    bits = [0] * len(plan)
    for t, (j, pj, p0, p1) in enumerate(plan):
        p = p1 if pj >= 0 and bits[pj] else p0
        bits[j] = 1 if u[t] < p else 0
    return np.asarray(bits, dtype=np.uint8)


# ---------------------------------------------------------------------------
# Diversity-preserving sampling


def diversity_preserving_sample(sampler, neighbors: np.ndarray, max_tries: int, rng: np.random.Generator) -> np.ndarray:
    """Resample until the offspring differs from every neighborhood solution.

    ``sampler(rng)`` draws one genotype.  At most ``max_tries`` draws are
    made; if all of them duplicate a neighbor, the last draw is returned
    unchanged.
    """
    if max_tries < 1:
        raise ValueError(f"max_tries must be >= 1, got {max_tries}")
    nb = np.asarray(neighbors)
    y = None
    for _ in range(max_tries):
        y = sampler(rng)
        if not bool((nb == y).all(axis=1).any()):
            return y
    return y


# ---------------------------------------------------------------------------
# Engine-facing operator objects


class GAOperator:
    kind = "ga"

    def __init__(self, cfg: OperatorConfig):
        validate_operator_config(cfg)
        self.cfg = cfg

    def init_state(self, num_subproblems: int, n: int):
        return None

    def learn(self, solutions: np.ndarray, state, rng: np.random.Generator):
        if len(solutions) < 2:
            raise ValueError("genetic variation needs at least two neighborhood solutions")
        i, j = _pick_parents(len(solutions), rng)
        return (solutions[i], solutions[j]), state

    def sample(self, model, rng: np.random.Generator) -> np.ndarray:
        a, b = model
        return _ga_child(a, b, self.cfg, rng)


class UMDAOperator:
    kind = "umda"

    def __init__(self, cfg: OperatorConfig):
        validate_operator_config(cfg)
        self.cfg = cfg

    def init_state(self, num_subproblems: int, n: int):
        return None

    def learn(self, solutions: np.ndarray, state, rng: np.random.Generator):
        return learn_univariate(solutions, self.cfg.prior_r), state

    def sample(self, model: UnivariateModel, rng: np.random.Generator) -> np.ndarray:
        return sample_univariate(model, rng)


class PBILOperator:
    kind = "pbil"

    def __init__(self, cfg: OperatorConfig):
        validate_operator_config(cfg)
        self.cfg = cfg

    def init_state(self, num_subproblems: int, n: int):
        return np.full((num_subproblems, n), 0.5, dtype=np.float64)

    def learn(self, solutions: np.ndarray, state: np.ndarray, rng: np.random.Generator):
        new = pbil_update(state, solutions, self.cfg.alpha)
        return UnivariateModel(new), new

    def sample(self, model: UnivariateModel, rng: np.random.Generator) -> np.ndarray:
        return sample_univariate(model, rng)


class TreeOperator:
    kind = "tree"

    def __init__(self, cfg: OperatorConfig):
        validate_operator_config(cfg)
        self.cfg = cfg

    def init_state(self, num_subproblems: int, n: int):
        return None

    def learn(self, solutions: np.ndarray, state, rng: np.random.Generator):
        return learn_tree(solutions, self.cfg), state

    def sample(self, model: TreeModel, rng: np.random.Generator) -> np.ndarray:
        return sample_tree(model, rng)


def make_operator(cfg: OperatorConfig):
    """Instantiate the operator named by cfg.kind."""
    classes = {"ga": GAOperator, "umda": UMDAOperator, "pbil": PBILOperator, "tree": TreeOperator}
    if cfg.kind not in classes:
        raise ValueError(f"unknown operator kind {cfg.kind!r} (available: {', '.join(OPERATOR_KINDS)})")
    return classes[cfg.kind](cfg)
