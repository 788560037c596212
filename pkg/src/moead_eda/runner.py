"""Batch execution: config parsing, artifact emission, structure aggregation.

A run directory holds ``metrics.csv`` (one progress row per generation),
``front.csv`` (the final archive), ``meta.json`` (config + final summary) and,
when structure logging is enabled, ``structure.jsonl.gz``.  A batch directory
holds one ``run_<seed>/`` per seed plus ``batch_summary.json``.
"""
from __future__ import annotations

import dataclasses
import gzip
import json
import os
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .config import ConfigError, RunConfig, validate_config
from .core import RNG_KIND, MetricsRecord, RunResult, StructureLog, run
from .problems import genotype_to_string
from .variation import OperatorConfig

METRICS_HEADER = "generation,evaluations,igd,true_count,archive_size"
FRONT_HEADER = "f1,f2,genotype"

_BOOL_KEYS = {"diversity_sampling", "structure_log"}
_INT_KEYS = {"n", "h", "t_s", "t_r", "n_r", "max_generations", "seed", "structure_stride"}
_FLOAT_KEYS = {"crossover_rate", "mutation_rate", "alpha", "prior_r", "mi_threshold"}
_STR_KEYS = {"problem", "algorithm", "scalarization", "output_dir"}
_INT_TUPLE_KEYS = {"structure_subproblems", "block_layout"}
_OPERATOR_KEYS = {"crossover_rate", "mutation_rate", "alpha", "prior_r", "mi_threshold"}
_ALL_KEYS = _BOOL_KEYS | _INT_KEYS | _FLOAT_KEYS | _STR_KEYS | _INT_TUPLE_KEYS


def _parse_bool(key: str, text: str) -> bool:
    lowered = text.lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {text!r}")


def _coerce(key: str, value) -> object:
    if key not in _ALL_KEYS:
        raise ConfigError(f"unknown configuration key {key!r}")
    if isinstance(value, str):
        text = value.strip()
        try:
            if key in _BOOL_KEYS:
                return _parse_bool(key, text)
            if key in _INT_KEYS:
                return int(text)
            if key in _FLOAT_KEYS:
                return float(text)
            if key in _INT_TUPLE_KEYS:
                return tuple(int(part) for part in text.split(",") if part.strip() != "")
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}") from exc
        return text
    if key in _INT_TUPLE_KEYS and value is not None:
        return tuple(int(v) for v in value)
    return value


def parse_config(text: str | None = None, overrides: dict | None = None) -> RunConfig:
    """Build a validated RunConfig from key=value text plus override values.

    The text format is line-oriented ``key = value`` with ``#`` comments;
    later lines win, and overrides win over the text.  ``problem``, ``n`` and
    ``algorithm`` are required; unknown keys are rejected.
    """
    raw: dict[str, object] = {}
    if text is not None:
        for lineno, line in enumerate(text.splitlines(), start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise ConfigError(f"line {lineno}: expected key = value, got {line.strip()!r}")
            key, value = stripped.split("=", 1)
            raw[key.strip()] = _coerce(key.strip(), value.strip())
    if overrides:
        for key, value in overrides.items():
            if value is None:
                continue
            raw[key] = _coerce(key, value)
    for required in ("problem", "n", "algorithm"):
        if required not in raw:
            raise ConfigError(f"{required}: required key missing")
    operator = OperatorConfig(
        kind=raw.pop("algorithm"),
        **{key: raw.pop(key) for key in list(raw) if key in _OPERATOR_KEYS},
    )
    cfg = RunConfig(operator=operator, **raw)
    return validate_config(cfg)


def config_as_dict(cfg: RunConfig) -> dict:
    """JSON-ready view of a config (tuples become lists)."""
    out = dataclasses.asdict(cfg)
    for key in ("structure_subproblems", "block_layout"):
        if out[key] is not None:
            out[key] = list(out[key])
    return out


# ---------------------------------------------------------------------------
# Artifact emission


def metrics_csv_text(trace: list[MetricsRecord]) -> str:
    lines = [METRICS_HEADER]
    for r in trace:
        lines.append(f"{r.generation},{r.evaluations},{r.igd!r},{r.true_count},{r.archive_size}")
    return "\n".join(lines) + "\n"


def emit_metrics_csv(trace: list[MetricsRecord], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(metrics_csv_text(trace))


def front_csv_text(archive) -> str:
    lines = [FRONT_HEADER]
    for genotype, point in archive.sorted_entries():
        lines.append(f"{float(point[0])!r},{float(point[1])!r},{genotype_to_string(genotype)}")
    return "\n".join(lines) + "\n"


def emit_front_csv(archive, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(front_csv_text(archive))


def write_meta_json(result: RunResult, path: str) -> None:
    final = result.final
    meta = {
        "config": config_as_dict(result.config),
        "seed": result.seed,
        "rng": result.rng_kind,
        "evaluations": result.evaluations,
        "final": {
            "generation": final.generation,
            "igd": final.igd,
            "true_count": final.true_count,
            "archive_size": final.archive_size,
        },
    }
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(meta, f, indent=2, sort_keys=True)
        f.write("\n")


def write_structure_log(log: StructureLog, path: str) -> None:
    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "wt", encoding="utf-8", newline="\n") as f:
        f.write(json.dumps({"format": "tree-edges-v1", "n": log.n}) + "\n")
        for generation, subproblem, edges in log.entries:
            row = {"generation": generation, "subproblem": subproblem, "edges": edges.tolist()}
            f.write(json.dumps(row) + "\n")


def read_structure_log(path: str) -> StructureLog:
    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "rt", encoding="utf-8") as f:
        header_line = f.readline()
        if not header_line:
            raise ValueError(f"{path}: empty structure log")
        header = json.loads(header_line)
        if header.get("format") != "tree-edges-v1":
            raise ValueError(f"{path}: not a structure log (format {header.get('format')!r})")
        log = StructureLog(n=int(header["n"]))
        for line in f:
            if not line.strip():
                continue
            row = json.loads(line)
            log.record(row["generation"], row["subproblem"], row["edges"])
    return log


def write_run_artifacts(result: RunResult, out_dir: str) -> None:
    """Write metrics.csv, front.csv, meta.json (and the structure log) into out_dir."""
    os.makedirs(out_dir, exist_ok=True)
    emit_metrics_csv(result.trace, os.path.join(out_dir, "metrics.csv"))
    emit_front_csv(result.archive, os.path.join(out_dir, "front.csv"))
    write_meta_json(result, os.path.join(out_dir, "meta.json"))
    if result.structure is not None:
        write_structure_log(result.structure, os.path.join(out_dir, "structure.jsonl.gz"))


# ---------------------------------------------------------------------------
# Batches


@dataclass
class RunOutcome:
    """One batch member: either a finished result or the error that stopped it."""

    seed: int
    result: RunResult | None
    error: str | None = None
    run_dir: str | None = None


@dataclass
class BatchSummary:
    config: RunConfig
    seeds: tuple[int, ...]
    outcomes: list[RunOutcome]
    mean_igd: float | None
    std_igd: float | None
    mean_true_count: float | None
    std_true_count: float | None

    def as_dict(self) -> dict:
        runs = []
        for o in self.outcomes:
            row: dict[str, object] = {"seed": o.seed, "dir": o.run_dir, "error": o.error}
            if o.result is not None:
                final = o.result.final
                row.update(
                    igd=final.igd,
                    true_count=final.true_count,
                    archive_size=final.archive_size,
                    evaluations=o.result.evaluations,
                )
            runs.append(row)
        return {
            "config": config_as_dict(self.config),
            "rng": RNG_KIND,
            "seeds": list(self.seeds),
            "runs": runs,
            "mean_igd": self.mean_igd,
            "std_igd": self.std_igd,
            "mean_true_count": self.mean_true_count,
            "std_true_count": self.std_true_count,
        }


def _run_for_seed(args: tuple[RunConfig, int]) -> RunResult:
    cfg, seed = args
    return run(replace(cfg, seed=seed, output_dir=None))


def _mean_std(values: list[float]) -> tuple[float | None, float | None]:
    if not values:
        return None, None
    mean = statistics.fmean(values)
    std = statistics.stdev(values) if len(values) > 1 else 0.0
    return mean, std


def run_batch(config: RunConfig, seeds, jobs: int = 1) -> BatchSummary:
    """Run the same configuration once per seed; failures don't stop the batch.

    Artifacts land in ``<output_dir>/run_<seed>/`` when the config names an
    output directory, plus a ``batch_summary.json`` beside them.
    """
    cfg = validate_config(config)
    seeds = tuple(int(s) for s in seeds)
    if not seeds:
        raise ValueError("need at least one seed")
    if jobs < 1:
        raise ValueError(f"jobs must be >= 1, got {jobs}")
    outcomes: list[RunOutcome] = []
    if jobs == 1:
        results: list[RunResult | Exception] = []
        for seed in seeds:
            try:
                results.append(_run_for_seed((cfg, seed)))
            except Exception as exc:  # noqa: BLE001 - contain per-run failures
                results.append(exc)
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_for_seed, (cfg, seed)) for seed in seeds]
            results = []
            for future in futures:
                try:
                    results.append(future.result())
                except Exception as exc:  # noqa: BLE001
                    results.append(exc)
    for seed, item in zip(seeds, results):
        if isinstance(item, Exception):
            outcomes.append(RunOutcome(seed=seed, result=None, error=f"{type(item).__name__}: {item}"))
            continue
        outcome = RunOutcome(seed=seed, result=item)
        if cfg.output_dir:
            run_dir = os.path.join(cfg.output_dir, f"run_{seed}")
            try:
                write_run_artifacts(item, run_dir)
                outcome.run_dir = run_dir
            except OSError as exc:
                outcome.error = f"write failed: {exc}"
        outcomes.append(outcome)
    finals = [o.result.final for o in outcomes if o.result is not None]
    mean_igd, std_igd = _mean_std([f.igd for f in finals])
    mean_tc, std_tc = _mean_std([float(f.true_count) for f in finals])
    summary = BatchSummary(
        config=cfg,
        seeds=seeds,
        outcomes=outcomes,
        mean_igd=mean_igd,
        std_igd=std_igd,
        mean_true_count=mean_tc,
        std_true_count=std_tc,
    )
    if cfg.output_dir:
        os.makedirs(cfg.output_dir, exist_ok=True)
        with open(os.path.join(cfg.output_dir, "batch_summary.json"), "w", encoding="utf-8", newline="\n") as f:
            json.dump(summary.as_dict(), f, indent=2, sort_keys=True)
            f.write("\n")
    return summary


# ---------------------------------------------------------------------------
# Structure aggregation


def aggregate_structure(logs, subproblems=None, min_generation: int = 0, last_only: bool = False) -> np.ndarray:
    """Symmetric edge-frequency matrix summed over the given structure logs.

    entry (j, k) counts the models in which positions j and k were linked,
    regardless of orientation.  ``subproblems`` restricts to those subproblem
    indices, ``min_generation`` skips earlier generations, ``last_only`` keeps
    only each log's final recorded generation.
    """
    logs = list(logs)
    if not logs:
        raise ValueError("no structure logs to aggregate")
    n = logs[0].n
    for log in logs:
        if log.n != n:
            raise ValueError(f"structure logs disagree on genotype length: {log.n} vs {n}")
    wanted = None if subproblems is None else frozenset(int(s) for s in subproblems)
    directed = np.zeros((n, n), dtype=np.int64)
    for log in logs:
        entries = log.entries
        if last_only and entries:
            final_gen = max(generation for generation, _, _ in entries)
            entries = [e for e in entries if e[0] == final_gen]
        for generation, subproblem, edges in entries:
            if generation < min_generation:
                continue
            if wanted is not None and subproblem not in wanted:
                continue
            if len(edges):
                np.add.at(directed, (edges[:, 0], edges[:, 1]), 1)
    return directed + directed.T


def structure_matrix_csv_text(matrix: np.ndarray) -> str:
    lines = [",".join(str(int(v)) for v in row) for row in np.asarray(matrix)]
    return "\n".join(lines) + "\n"


def write_structure_matrix_csv(matrix: np.ndarray, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(structure_matrix_csv_text(matrix))


def write_pgm(matrix: np.ndarray, path: str) -> None:
    """Grayscale heat map (plain PGM): brighter pixels mark more frequent pairs."""
    mat = np.asarray(matrix, dtype=np.float64)
    if mat.ndim != 2:
        raise ValueError("heat map needs a 2-D matrix")
    peak = mat.max()
    if peak > 0:
        pixels = np.rint(mat * (255.0 / peak)).astype(np.int64)
    else:
        pixels = np.zeros(mat.shape, dtype=np.int64)
    lines = ["P2", f"{mat.shape[1]} {mat.shape[0]}", "255"]
    lines.extend(" ".join(str(v) for v in row) for row in pixels.tolist())
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")
