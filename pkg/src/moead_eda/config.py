"""Run configuration: the full set of knobs for one optimization run."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

from .variation import OperatorConfig, validate_operator_config


class ConfigError(ValueError):
    """Raised for invalid or inconsistent configuration values."""


@dataclass(frozen=True)
class RunConfig:
    """Everything a single run needs; see ``runner.parse_config`` for parsing.

    ``max_generations=None`` resolves to five times the genotype length.
    ``structure_subproblems=None`` logs every subproblem (when structure
    logging is on at all); ``structure_stride`` thins logging to generations
    1, 1+stride, 1+2*stride, ...
    """

    problem: str = "bitrap"
    n: int = 30
    h: int = 200
    t_s: int = 20
    t_r: int = 20
    n_r: int = 2
    scalarization: str = "tchebycheff"
    diversity_sampling: bool = True
    max_generations: int | None = None
    seed: int = 0
    operator: OperatorConfig = field(default_factory=OperatorConfig)
    structure_log: bool = False
    structure_stride: int = 1
    structure_subproblems: tuple[int, ...] | None = None
    block_layout: tuple[int, ...] | None = None
    output_dir: str | None = None

    @property
    def algorithm(self) -> str:
        return self.operator.kind

    @property
    def generations(self) -> int:
        return 5 * self.n if self.max_generations is None else self.max_generations

    @property
    def num_subproblems(self) -> int:
        # Simplex-lattice count for m objectives is C(h + m - 1, m - 1);
        # the bi-objective benchmark gives h + 1.
        return self.h + 1

    def resolved(self) -> "RunConfig":
        """A copy with every deferred default made explicit."""
        op = self.operator
        if op.mutation_rate is None:
            op = replace(op, mutation_rate=1.0 / self.n)
        return replace(self, max_generations=self.generations, operator=op)


SCALARIZATIONS = ("tchebycheff", "weighted_sum")


def validate_config(cfg: RunConfig) -> RunConfig:
    """Check every field, raising ConfigError naming the offending one."""
    if cfg.problem != "bitrap":
        raise ConfigError(f"problem: unknown problem {cfg.problem!r}")
    if cfg.n <= 0 or cfg.n % 5 != 0:
        raise ConfigError(f"n: genotype length must be a positive multiple of 5, got {cfg.n}")
    if cfg.h < 1:
        raise ConfigError(f"h: weight-vector granularity must be >= 1, got {cfg.h}")
    num = cfg.num_subproblems
    if not 1 <= cfg.t_s <= num:
        raise ConfigError(f"t_s: selection neighborhood size must be in [1, {num}], got {cfg.t_s}")
    if not 1 <= cfg.t_r <= num:
        raise ConfigError(f"t_r: replacement neighborhood size must be in [1, {num}], got {cfg.t_r}")
    if not 1 <= cfg.n_r <= cfg.t_r:
        raise ConfigError(f"n_r: replacement cap must be in [1, t_r={cfg.t_r}], got {cfg.n_r}")
    if cfg.scalarization not in SCALARIZATIONS:
        raise ConfigError(f"scalarization: must be one of {', '.join(SCALARIZATIONS)}, got {cfg.scalarization!r}")
    if cfg.max_generations is not None and cfg.max_generations < 0:
        raise ConfigError(f"max_generations: must be >= 0, got {cfg.max_generations}")
    if not 0 <= cfg.seed < 2 ** 64:
        raise ConfigError(f"seed: must be a 64-bit unsigned integer, got {cfg.seed}")
    try:
        validate_operator_config(cfg.operator)
    except ValueError as exc:
        raise ConfigError(f"operator: {exc}") from exc
    if cfg.structure_log and cfg.operator.kind != "tree":
        raise ConfigError(f"structure_log: only the tree operator exposes structure, not {cfg.operator.kind!r}")
    if cfg.structure_stride < 1:
        raise ConfigError(f"structure_stride: must be >= 1, got {cfg.structure_stride}")
    if cfg.structure_subproblems is not None:
        for idx in cfg.structure_subproblems:
            if not 0 <= idx < num:
                raise ConfigError(f"structure_subproblems: index {idx} outside [0, {num - 1}]")
    if cfg.block_layout is not None and sorted(cfg.block_layout) != list(range(cfg.n)):
        raise ConfigError(f"block_layout: must be a permutation of range({cfg.n})")
    return cfg
