"""Benchmark problems.

The main citizen here is the deceptive bi-objective trap function over
bitstrings: the genotype is split into 5-bit blocks and each block is scored
by a pair of complementary trap functions, one pulling towards all-ones and
the other towards all-zeros.  Both objectives are maximized.
"""
from __future__ import annotations

import numpy as np

BLOCK = 5


def trap5_block(u: int) -> int:
    """Deceptive trap score of one 5-bit block given its number of ones."""
    if not 0 <= u <= BLOCK:
        raise ValueError(f"block unitation must be in [0, {BLOCK}], got {u}")
    return BLOCK if u == BLOCK else (BLOCK - 1) - u


def inv_trap5_block(u: int) -> int:
    """Complementary trap score: maximal at the all-zeros block."""
    if not 0 <= u <= BLOCK:
        raise ValueError(f"block unitation must be in [0, {BLOCK}], got {u}")
    return BLOCK if u == 0 else u - 1


class ParetoFront:
    """A known optimal front: objective points plus one representative genotype each."""

    def __init__(self, points: np.ndarray, genotypes: np.ndarray):
        self.points = np.asarray(points, dtype=float)
        self.genotypes = np.asarray(genotypes, dtype=np.uint8)

    def __len__(self) -> int:
        return len(self.points)


class BiTrapProblem:
    """Bi-objective concatenated trap of order 5 over n-bit genotypes.

    Objective 1 sums the deceptive trap over all blocks, objective 2 sums the
    complementary trap.  A block layout may be supplied to scatter the block
    members across the genotype; by default block b owns the contiguous
    positions [5b, 5b+5).
    """

    name = "bitrap"
    num_objectives = 2

    def __init__(self, n: int, layout: tuple[int, ...] | None = None):
        if n <= 0 or n % BLOCK != 0:
            raise ValueError(f"genotype length must be a positive multiple of {BLOCK}, got {n}")
        self.n = n
        self.num_blocks = n // BLOCK
        if layout is None:
            self._layout = np.arange(n)
        else:
            layout_arr = np.asarray(layout, dtype=np.int64)
            if sorted(layout_arr.tolist()) != list(range(n)):
                raise ValueError("layout must be a permutation of range(n)")
            self._layout = layout_arr

    def evaluate(self, genotype: np.ndarray) -> np.ndarray:
        """Objective vector (f1, f2) of a single genotype."""
        x = np.asarray(genotype)
        if x.shape != (self.n,):
            raise ValueError(f"genotype must have shape ({self.n},), got {x.shape}")
        u = x[self._layout].reshape(self.num_blocks, BLOCK).sum(axis=1)
        f1 = np.where(u == BLOCK, BLOCK, (BLOCK - 1) - u).sum()
        f2 = np.where(u == 0, BLOCK, u - 1).sum()
        return np.array([f1, f2], dtype=float)

    def evaluate_many(self, genotypes: np.ndarray) -> np.ndarray:
        """Objective matrix (k, 2) for a population given as a (k, n) array."""
        x = np.asarray(genotypes)
        if x.ndim != 2 or x.shape[1] != self.n:
            raise ValueError(f"population must have shape (k, {self.n}), got {x.shape}")
        u = x[:, self._layout].reshape(len(x), self.num_blocks, BLOCK).sum(axis=2)
        f1 = np.where(u == BLOCK, BLOCK, (BLOCK - 1) - u).sum(axis=1)
        f2 = np.where(u == 0, BLOCK, u - 1).sum(axis=1)
        return np.stack([f1, f2], axis=1).astype(float)

    def true_front(self) -> ParetoFront:
        """The exact optimal front: one point per count of all-ones blocks.

        A genotype whose blocks are all uniform (each block all ones or all
        zeros) with k ones-blocks scores (4*num_blocks + k, 5*num_blocks - k);
        any block mixing ones and zeros is dominated by flipping it to uniform.
        """
        l = self.num_blocks
        ks = np.arange(l + 1)
        points = np.stack([4 * l + ks, 5 * l - ks], axis=1).astype(float)
        genotypes = np.zeros((l + 1, self.n), dtype=np.uint8)
        for k in range(l + 1):
            for b in range(k):
                genotypes[k, self._layout[b * BLOCK:(b + 1) * BLOCK]] = 1
        return ParetoFront(points, genotypes)


def dominates(a, b) -> bool:
    """Pareto dominance under maximization: a is >= everywhere and > somewhere."""
    av = np.asarray(a, dtype=float)
    bv = np.asarray(b, dtype=float)
    if av.shape != bv.shape or av.ndim != 1:
        raise ValueError(f"objective vectors must share one dimension, got {av.shape} and {bv.shape}")
    return bool(np.all(av >= bv) and np.any(av > bv))


def make_problem(name: str, n: int, layout: tuple[int, ...] | None = None) -> BiTrapProblem:
    """Instantiate a problem by registry name."""
    if name != "bitrap":
        raise ValueError(f"unknown problem {name!r} (available: bitrap)")
    return BiTrapProblem(n, layout=layout)


def genotype_to_string(genotype: np.ndarray) -> str:
    return "".join("1" if v else "0" for v in genotype.tolist())


def genotype_from_string(bits: str) -> np.ndarray:
    if not bits or any(c not in "01" for c in bits):
        raise ValueError(f"genotype string must be non-empty and binary, got {bits!r}")
    return np.frombuffer(bits.encode("ascii"), dtype=np.uint8) - ord("0")
