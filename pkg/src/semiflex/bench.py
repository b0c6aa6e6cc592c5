"""Trace ingestion, synthetic application pools and the experiment runner."""

from __future__ import annotations

import csv
import io
import logging
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .core import (
    Application,
    MachineConfig,
    ProblemInstance,
    StructuralError,
    format_load,
    lower_bound_machines,
    to_load,
)
from .heuristics import algorithm_grid, run_algorithm

log = logging.getLogger(__name__)

# upper end-points; None marks an open-ended bucket
CORE_BUCKETS = {"0-2": 2, "2-4": 4, "4-8": 8, "8-12": 12, "12-24": 24, ">24": None}
MEM_BUCKETS = {"0-2": 2, "2-4": 4, "4-8": 8, "8-32": 32, "32-64": 64, ">64": None}
SYNTH_MEMORY_VALUES = (2, 4, 8, 32, 64)
MILLI = 1000

DEFAULT_CONFIGS = tuple(MachineConfig(Q=Q, P=Fraction(32)) for Q in (64, 96, 128, 256, 512, 1024))


@dataclass(frozen=True)
class VmRecord:
    deployment_id: str
    core_bucket: str
    mem_bucket_gb: str
    avg_cpu_fraction: Fraction

    def __post_init__(self):
        for label, table in ((self.core_bucket, CORE_BUCKETS), (self.mem_bucket_gb, MEM_BUCKETS)):
            if label not in table:
                raise StructuralError(f"malformed bucket label {label!r}")
        object.__setattr__(self, "avg_cpu_fraction", to_load(self.avg_cpu_fraction))
        if self.avg_cpu_fraction > 1:
            raise StructuralError(f"average CPU fraction {self.avg_cpu_fraction} above 1")


def _to_milli(x: Fraction) -> Fraction:
    return Fraction(round(x * MILLI), MILLI)


def ingest(records: Iterable[VmRecord], min_load=1, max_load=32) -> list[Application]:
    """Collapse VM records into one application per deployment.

    Deployments touching an open-ended bucket are dropped. Memory is the
    largest bucket upper end among the deployment's VMs; load is the sum of
    ``avg_cpu_fraction * core bucket upper end``, rounded to milli-vCPU.
    Deployments outside ``[min_load, max_load]`` are dropped.
    """
    groups: dict[str, list[VmRecord]] = {}
    for r in records:
        groups.setdefault(r.deployment_id, []).append(r)
    lo, hi = to_load(min_load), to_load(max_load)
    apps = []
    dropped_open = dropped_load = 0
    for dep, vms in groups.items():
        cores = [CORE_BUCKETS[v.core_bucket] for v in vms]
        mems = [MEM_BUCKETS[v.mem_bucket_gb] for v in vms]
        if None in cores or None in mems:
            dropped_open += 1
            continue
        p = _to_milli(sum((v.avg_cpu_fraction * c for v, c in zip(vms, cores)), Fraction(0)))
        if not lo <= p <= hi:
            dropped_load += 1
            continue
        apps.append(Application(dep, p, max(mems)))
    log.info("ingested %d deployments, dropped %d open-ended and %d out of load range",
             len(apps), dropped_open, dropped_load)
    return apps


def read_vm_csv(stream) -> list[VmRecord]:
    reader = csv.DictReader(stream)
    expected = {"deployment_id", "core_bucket", "mem_bucket_gb", "avg_cpu_fraction"}
    if reader.fieldnames is None or not expected <= set(reader.fieldnames):
        raise StructuralError(f"CSV needs columns {sorted(expected)}, got {reader.fieldnames}")
    return [
        VmRecord(row["deployment_id"], row["core_bucket"].strip(), row["mem_bucket_gb"].strip(),
                 to_load(row["avg_cpu_fraction"]))
        for row in reader
    ]


def _clipped_lognormal_mean(mu: float, sigma: float, lo: float, hi: float) -> float:
    z = statistics.NormalDist()
    a = (np.log(lo) - mu) / sigma
    b = (np.log(hi) - mu) / sigma
    body = np.exp(mu + sigma**2 / 2) * (z.cdf(b - sigma) - z.cdf(a - sigma))
    return lo * z.cdf(a) + hi * (1 - z.cdf(b)) + body


def fit_load_distribution(median=5.0, mean=8.4, lo=1.0, hi=32.0) -> tuple[float, float]:
    """Lognormal ``(mu, sigma)`` whose clipped-to-``[lo, hi]`` version has the given median and mean."""
    mu = float(np.log(median))
    sigma = brentq(lambda s: _clipped_lognormal_mean(mu, s, lo, hi) - mean, 1e-3, 10.0)
    return mu, sigma


def fit_memory_weights(mean=14.0, center=2) -> tuple[float, list[float]]:
    """Bell-shaped weights over the memory buckets, centred on the 8 GB bucket, width fitted to ``mean``."""
    values = np.array(SYNTH_MEMORY_VALUES, dtype=float)
    k = np.arange(len(values))

    def weights(width):
        w = np.exp(-((k - center) ** 2) / (2 * width**2))
        return w / w.sum()

    width = brentq(lambda s: weights(s) @ values - mean, 0.05, 10.0)
    return width, weights(width).tolist()


@dataclass
class Pool:
    apps: list[Application]
    metadata: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "apps": [{"id": a.id, "p": format_load(a.p), "q": a.q} for a in self.apps],
            "metadata": self.metadata,
        }

    @classmethod
    def from_json(cls, data: dict) -> "Pool":
        apps = [Application(str(a["id"]), to_load(a["p"]), int(a["q"])) for a in data["apps"]]
        return cls(apps, data.get("metadata", {}))


def synth_pool(size: int, seed: int) -> Pool:
    """Synthetic stand-in for the trace-derived pool.

    Loads follow a lognormal clipped to ``[1, 32]`` vCPU, fitted so the
    clipped distribution has median 5.0 and mean 8.4. Memory takes a bucket
    upper end ``{2, 4, 8, 32, 64}`` GB with weights giving median 8, mean 14.
    """
    if size < 1:
        raise StructuralError("pool size must be positive")
    mu, sigma = fit_load_distribution()
    width, weights = fit_memory_weights()
    rng = np.random.default_rng(seed)
    loads = np.clip(rng.lognormal(mu, sigma, size), 1.0, 32.0)
    mems = rng.choice(SYNTH_MEMORY_VALUES, size=size, p=weights)
    digits = len(str(size))
    apps = [
        Application(f"app{i:0{digits}d}", Fraction(int(round(x * MILLI)), MILLI), int(qv))
        for i, (x, qv) in enumerate(zip(loads, mems))
    ]
    metadata = {
        "generator": "clipped-lognormal load, bell-weighted memory buckets",
        "seed": seed,
        "size": size,
        "load_mu": mu,
        "load_sigma": sigma,
        "load_clip": [1, 32],
        "memory_values": list(SYNTH_MEMORY_VALUES),
        "memory_weights": weights,
        "memory_width": width,
    }
    return Pool(apps, metadata)


@dataclass
class ExperimentSpec:
    instance_count: int = 50
    apps_per_instance: int = 100
    machine_configs: Sequence[MachineConfig] = DEFAULT_CONFIGS
    algorithms: Optional[Sequence[str]] = None  # None means the full grid
    seed: int = 0

    @property
    def algorithm_ids(self) -> list[str]:
        return algorithm_grid() if self.algorithms is None else list(self.algorithms)

    @classmethod
    def from_json(cls, data: dict) -> "ExperimentSpec":
        configs = data.get("machine_configs")
        return cls(
            instance_count=data.get("instance_count", 50),
            apps_per_instance=data.get("apps_per_instance", 100),
            machine_configs=DEFAULT_CONFIGS if configs is None else tuple(
                MachineConfig(Q=c["Q"], P=to_load(c["P"])) for c in configs
            ),
            algorithms=data.get("algorithms"),
            seed=data.get("seed", 0),
        )


@dataclass(frozen=True)
class ResultRow:
    instance_id: int
    P: Fraction
    Q: int
    algorithm: str
    machines: int
    lower_bound: int
    runtime_ms: float

    @property
    def normalized(self) -> Fraction:
        return Fraction(self.machines, self.lower_bound)

    def csv_fields(self) -> list:
        return [self.instance_id, format_load(self.P), self.Q, self.algorithm, self.machines,
                self.lower_bound, f"{float(self.normalized):.6f}", f"{self.runtime_ms:.3f}"]


CSV_COLUMNS = ["instance_id", "P", "Q", "algorithm", "machines", "lower_bound", "normalized", "runtime_ms"]


def sample_instances(apps: Sequence[Application], spec: ExperimentSpec,
                     config: Optional[MachineConfig] = None) -> list[ProblemInstance]:
    """Draw ``spec.instance_count`` instances of distinct applications, reproducibly from ``spec.seed``."""
    if len(apps) < spec.apps_per_instance:
        raise StructuralError(f"pool of {len(apps)} is smaller than {spec.apps_per_instance} apps per instance")
    if config is None:
        config = max(spec.machine_configs, key=lambda c: c.Q)
    rng = np.random.default_rng(spec.seed)
    out = []
    for _ in range(spec.instance_count):
        picks = rng.choice(len(apps), size=spec.apps_per_instance, replace=False)
        out.append(ProblemInstance(tuple(apps[i] for i in sorted(picks)), config))
    return out


class SolverBug(RuntimeError):
    """A heuristic returned an assignment that fails validation."""


def _run_one(task):
    index, instance, algorithm, seed = task
    start = time.perf_counter()
    result = run_algorithm(instance, algorithm, seed=seed)
    elapsed = (time.perf_counter() - start) * 1000
    if not result.report.feasible:
        raise SolverBug(f"{algorithm} on instance {index} (Q={instance.config.Q}): {result.report.violations[:3]}")
    return ResultRow(index, instance.config.P, instance.config.Q, algorithm, result.machines,
                     lower_bound_machines(instance), elapsed)


def run_experiment(spec: ExperimentSpec, pool: Sequence[Application], workers: int = 1) -> list[ResultRow]:
    """Run every algorithm on every sampled instance and machine configuration.

    Rows come back ordered by (instance, config, algorithm) whatever the
    worker count.
    """
    algorithms = spec.algorithm_ids
    if not algorithms:
        return []
    base = sample_instances(pool, spec)
    tasks = []
    for index, inst in enumerate(base):
        for config in spec.machine_configs:
            bound = inst.with_config(config)
            for algorithm in algorithms:
                tasks.append((index, bound, algorithm, spec.seed * 1_000_003 + index))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(_run_one, tasks, chunksize=32))
    else:
        rows = [_run_one(t) for t in tasks]
    return rows


def write_csv(rows: Iterable[ResultRow], stream) -> None:
    writer = csv.writer(stream)
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow(row.csv_fields())


def rows_to_csv(rows: Iterable[ResultRow]) -> str:
    buf = io.StringIO()
    write_csv(rows, buf)
    return buf.getvalue()
