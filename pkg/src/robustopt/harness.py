"""Experiment execution: config handling, replication runs, CSV emission,
and the query-count scaling study.

A run configuration is a single JSON document; CLI flags override config
keys.  Replications are seeded deterministically (base seed + index) and
results are written in replication order, so identical configs produce
byte-identical CSV files.  Wall-clock timings are kept on the in-memory
result rows but never written to the CSV for exactly that reason.
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import applications as apps
from .core import QueryLedger
from .inner_oracle import LpFeasibilityOracle, SdpFeasibilityOracle
from .meta import solve_robust, solve_robust_sampled
from .sampling import ExactSubgradientOracle, PerturbationModel, QueryCostModel

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "ResultRow",
    "CSV_SCHEMA_VERSION",
    "CSV_COLUMNS",
    "OUT_DIR_ENV",
    "build_instance",
    "run_experiment",
    "write_csv",
    "scaling_study",
]

CSV_SCHEMA_VERSION = 1
CSV_COLUMNS = [
    "schema_version", "family", "m", "n", "d", "algorithm", "seed", "status",
    "max_violation", "iterations", "grad_queries", "proj_calls", "opt_calls",
]
OUT_DIR_ENV = "ROBUSTOPT_OUT_DIR"


class ConfigError(ValueError):
    """A configuration key is missing or malformed."""


@dataclass
class ExperimentConfig:
    instance: dict = field(default_factory=dict)
    algorithm: str = "exact"
    s: Optional[int] = None            # None -> ceil(G1*Ginf/G2^2)
    eps: float = 0.05
    delta: float = 0.05
    nu_mode: str = "exact"
    c_sample: float = 1.0
    c_norm: float = 1.0
    seed: int = 0
    replications: int = 1
    out: Optional[str] = None
    inject_failures: bool = False

    def __post_init__(self):
        if self.algorithm not in ("exact", "sampled"):
            raise ConfigError(f"algorithm must be 'exact' or 'sampled', "
                              f"got {self.algorithm!r}")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if self.nu_mode not in PerturbationModel.MODES:
            raise ConfigError(f"nu_mode must be one of "
                              f"{PerturbationModel.MODES}, got {self.nu_mode!r}")
        if not 0 < self.eps:
            raise ConfigError("eps must be positive")
        if not 0 < self.delta < 1:
            raise ConfigError("delta must lie in (0, 1)")

    @classmethod
    def from_dict(cls, doc, overrides=None):
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        merged = dict(doc)
        for key, value in (overrides or {}).items():
            if value is not None:
                if key not in known:
                    raise ConfigError(f"unknown config key: {key}")
                merged[key] = value
        try:
            return cls(**merged)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json_file(cls, path, overrides=None):
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(doc, overrides)


@dataclass
class ResultRow:
    family: str
    m: int
    n: int
    d: int
    algorithm: str
    seed: int
    status: str
    max_violation: Optional[float]
    iterations: int
    grad_queries: int
    proj_calls: int
    opt_calls: int
    wall_ms: float = 0.0   # in-memory only, never written to CSV


FAMILIES = {
    "lp-feasible": lambda p: apps.random_feasible_lp(**p),
    "lp-infeasible": lambda p: apps.infeasible_two_constraint_lp(**p),
    "lp-scaling": lambda p: apps.scaling_lp_instance(**p),
    "gmrp": lambda p: apps.build_gmrp(apps.gmrp_two_asset(**p)),
    "ttd": lambda p: apps.build_ttd(apps.ttd_three_bar(**p)),
}


def build_instance(spec):
    """Instance from a config block: either {"path": file} or
    {"family": name, ...family parameters}."""
    if not isinstance(spec, dict) or not spec:
        raise ConfigError("config key 'instance' must be a non-empty object")
    spec = dict(spec)
    if "path" in spec:
        path = spec.pop("path")
        if spec:
            raise ConfigError(f"instance path cannot be combined with "
                              f"extra keys {sorted(spec)}")
        try:
            return apps.load_instance(path), Path(path).stem
        except OSError as exc:
            raise ConfigError(f"cannot read instance file {path}: {exc}") from exc
    family = spec.pop("family", None)
    if family not in FAMILIES:
        raise ConfigError(f"instance family must be one of "
                          f"{sorted(FAMILIES)}, got {family!r}")
    try:
        return FAMILIES[family](spec), family
    except TypeError as exc:
        raise ConfigError(f"bad parameters for family {family!r}: {exc}") from exc


def _setup(instance, config):
    if isinstance(instance, apps.RobustLpInstance):
        problem = apps.lp_problem(instance)
        bounds = apps.lp_constants(instance)
        oracle = LpFeasibilityOracle(instance, config.eps)
        violation = lambda x: float(np.max(apps.worst_case_lp_violation(instance, x)))
    elif isinstance(instance, apps.RobustSdpInstance):
        problem = apps.sdp_problem(instance)
        bounds = apps.sdp_constants(instance)
        oracle = SdpFeasibilityOracle(instance, config.eps)
        violation = lambda x: float(np.max(apps.worst_case_sdp_violation(instance, x)))
    else:
        raise ConfigError(f"unsupported instance type {type(instance).__name__}")
    return problem, bounds, oracle, violation


def default_sample_count(bounds):
    return max(1, math.ceil(bounds.G1 * bounds.Ginf / bounds.G2**2))


def _run_one(problem, bounds, oracle, violation, config, family, seed):
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    if config.algorithm == "exact":
        outcome = solve_robust(problem, bounds,
                               ExactSubgradientOracle(problem, bounds),
                               oracle, config.eps, config.delta, rng)
    else:
        s = config.s if config.s is not None else default_sample_count(bounds)
        outcome = solve_robust_sampled(
            problem, bounds, s, oracle, config.eps, config.delta, rng,
            cost=QueryCostModel(c_sample=config.c_sample, c_norm=config.c_norm),
            mode=config.nu_mode, inject_failures=config.inject_failures)
    wall_ms = (time.perf_counter() - start) * 1e3
    led = outcome.ledger
    return ResultRow(
        family=family, m=problem.m, n=problem.n, d=problem.d,
        algorithm=config.algorithm, seed=seed, status=outcome.status,
        max_violation=(violation(outcome.x_bar)
                       if outcome.status == "solution" else None),
        iterations=outcome.iterations_used,
        grad_queries=led.grad_queries, proj_calls=led.proj_calls,
        opt_calls=led.opt_calls, wall_ms=wall_ms,
    ), outcome


def run_experiment(config):
    """Execute all replications of one experiment; returns the result rows
    and writes them as CSV when an output path is configured."""
    instance, family = build_instance(config.instance)
    problem, bounds, oracle, violation = _setup(instance, config)
    rows = []
    for rep in range(config.replications):
        row, _ = _run_one(problem, bounds, oracle, violation, config, family,
                          config.seed + rep)
        rows.append(row)
    if config.out:
        write_csv(rows, resolve_out_path(config.out))
    return rows


def resolve_out_path(out):
    path = Path(out)
    if not path.is_absolute():
        base = os.environ.get(OUT_DIR_ENV)
        if base:
            path = Path(base) / path
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def write_csv(rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow([
                CSV_SCHEMA_VERSION, row.family, row.m, row.n, row.d,
                row.algorithm, row.seed, row.status, _fmt(row.max_violation),
                row.iterations, _fmt(row.grad_queries), _fmt(row.proj_calls),
                _fmt(row.opt_calls),
            ])
    return path


def scaling_study(d_values, config, m=5, n=6, instance_seed=0):
    """Charged subgradient-query counts vs noise dimension, both
    algorithms, on the fixed-ratio LP family (single-entry shape
    matrices, so G1*Ginf/G2^2 = m for every d).

    Returns fitted log-log slopes together with the per-d counts.
    """
    d_values = sorted(int(d) for d in d_values)
    if len(d_values) < 3:
        raise ConfigError("scaling study needs at least 3 d values")
    records = []
    for d in d_values:
        instance = apps.scaling_lp_instance(m=m, n=n, d=d, seed=instance_seed)
        per_d = {"d": d}
        for algorithm in ("exact", "sampled"):
            cfg = replace(config, algorithm=algorithm, instance={}, out=None)
            problem, bounds, oracle, violation = _setup(instance, cfg)
            row, outcome = _run_one(problem, bounds, oracle, violation, cfg,
                                    "lp-scaling", cfg.seed)
            per_d[algorithm] = {
                "grad_queries": row.grad_queries,
                "proj_calls": row.proj_calls,
                "opt_calls": row.opt_calls,
                "iterations": row.iterations,
                "status": row.status,
            }
        records.append(per_d)
    logs_d = np.log([r["d"] for r in records])
    slopes = {}
    for algorithm in ("exact", "sampled"):
        logs_q = np.log([r[algorithm]["grad_queries"] for r in records])
        slopes[algorithm] = float(np.polyfit(logs_d, logs_q, 1)[0])
    return {"d_values": d_values, "records": records, "slopes": slopes}
