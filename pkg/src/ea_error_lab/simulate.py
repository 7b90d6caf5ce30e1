"""Monte Carlo simulation of the (1+1) EAs and comparison against references.

Runs are grouped into fixed-size chunks. Chunk ``c`` draws from a Philox
stream keyed by ``(seed, c)``, so the result does not depend on how many
workers execute the chunks. Per-generation statistics are merged in chunk
order with (count, mean, M2) accumulators.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .builders import ProblemSpec, check_monotone

CHUNK_RUNS = 4096
THREADS_ENV = "EA_ERROR_LAB_THREADS"
Z_LIMIT = 4.0


@dataclass(frozen=True)
class SimConfig:
    spec: ProblemSpec
    runs: int
    t_max: int
    seed: int = 0
    init: str = "all_zeros"  # all_zeros | uniform_random | fixed_bitstring
    bits: Optional[str] = None

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.t_max < 0:
            raise ValueError("t_max must be nonnegative")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.init not in ("all_zeros", "uniform_random", "fixed_bitstring"):
            raise ValueError(f"unknown init {self.init!r}")
        if self.init == "fixed_bitstring":
            if self.bits is None or len(self.bits) != self.spec.n or set(self.bits) - {"0", "1"}:
                raise ValueError(f"fixed_bitstring init needs a 0/1 string of length {self.spec.n}")


@dataclass
class RunningStats:
    """Per-generation (count, mean, M2) accumulator, mergeable in any grouping."""

    count: np.ndarray
    mean: np.ndarray
    m2: np.ndarray

    @classmethod
    def empty(cls, size: int) -> "RunningStats":
        return cls(np.zeros(size), np.zeros(size), np.zeros(size))

    @classmethod
    def from_batch(cls, values: np.ndarray) -> "RunningStats":
        """``values`` has shape (runs, generations)."""
        mean = values.mean(axis=0)
        return cls(
            np.full(values.shape[1], float(values.shape[0])),
            mean,
            ((values - mean) ** 2).sum(axis=0),
        )

    def merge(self, other: "RunningStats") -> "RunningStats":
        n = self.count + other.count
        with np.errstate(invalid="ignore", divide="ignore"):
            delta = other.mean - self.mean
            frac = np.where(n > 0, other.count / n, 0.0)
            mean = self.mean + delta * frac
            m2 = self.m2 + other.m2 + delta**2 * self.count * frac
        return RunningStats(n, mean, m2)

    def std_error(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            var = np.where(self.count > 1, self.m2 / (self.count - 1), 0.0)
        return np.sqrt(var / np.maximum(self.count, 1))


@dataclass(frozen=True)
class EmpiricalTrajectory:
    mean_error: np.ndarray
    std_error: np.ndarray
    runs: int


def _fitness_fn(spec: ProblemSpec):
    n = spec.n
    if spec.problem == "onemax":
        return lambda x: x.sum(axis=1).astype(float), float(n)
    if spec.problem == "mono":
        table = check_monotone(spec.mono_f, n)
        return lambda x: table[x.sum(axis=1)], float(table[n])
    if spec.problem == "needle":
        return lambda x: (~x.any(axis=1)).astype(float), 1.0
    if spec.problem == "leadingones":
        return lambda x: np.cumprod(x, axis=1).sum(axis=1).astype(float), float(n)
    raise ValueError(f"unknown problem {spec.problem!r}")


def _initial_population(cfg: SimConfig, m: int, rng: np.random.Generator) -> np.ndarray:
    n = cfg.spec.n
    if cfg.init == "all_zeros":
        return np.zeros((m, n), dtype=bool)
    if cfg.init == "uniform_random":
        return rng.random((m, n)) < 0.5
    row = np.array([c == "1" for c in cfg.bits], dtype=bool)
    return np.tile(row, (m, 1))


def _mutate(x: np.ndarray, algorithm: str, rng: np.random.Generator) -> np.ndarray:
    m, n = x.shape
    if algorithm == "obse":
        mask = np.zeros((m, n), dtype=bool)
        mask[np.arange(m), rng.integers(n, size=m)] = True
    else:
        mask = rng.random((m, n)) < 1.0 / n
    return x ^ mask


def _chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(chunk,))
    return np.random.Generator(np.random.Philox(ss))


def simulate_chunk(cfg: SimConfig, chunk: int, m: int) -> np.ndarray:
    """Error paths of ``m`` runs from chunk ``chunk``; shape ``(m, t_max + 1)``.

    The error at ``t`` is recorded before the stop test at ``t``. Runs that
    reach the optimum stay there with error 0.
    """
    rng = _chunk_rng(cfg.seed, chunk)
    fitness, f_opt = _fitness_fn(cfg.spec)
    strict = cfg.spec.algorithm in ("obse", "bwse")
    x = _initial_population(cfg, m, rng)
    fx = fitness(x)
    errors = np.zeros((m, cfg.t_max + 1))
    errors[:, 0] = f_opt - fx
    active = np.flatnonzero(fx < f_opt)
    for t in range(1, cfg.t_max + 1):
        if active.size == 0:
            break
        y = _mutate(x[active], cfg.spec.algorithm, rng)
        fy = fitness(y)
        accept = fy > fx[active] if strict else fy >= fx[active]
        winners = active[accept]
        x[winners] = y[accept]
        fx[winners] = fy[accept]
        errors[active, t] = f_opt - fx[active]
        active = active[fx[active] < f_opt]
    return np.abs(errors)


def _chunk_sizes(runs: int) -> list[int]:
    full, rest = divmod(runs, CHUNK_RUNS)
    return [CHUNK_RUNS] * full + ([rest] if rest else [])


def _thread_count() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def simulate(cfg: SimConfig, threads: Optional[int] = None) -> EmpiricalTrajectory:
    sizes = _chunk_sizes(cfg.runs)

    def work(c: int) -> RunningStats:
        return RunningStats.from_batch(simulate_chunk(cfg, c, sizes[c]))

    workers = min(threads or _thread_count(), len(sizes))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(work, range(len(sizes))))
    else:
        parts = [work(c) for c in range(len(sizes))]
    total = RunningStats.empty(cfg.t_max + 1)
    for part in parts:
        total = total.merge(part)
    return EmpiricalTrajectory(total.mean, total.std_error(), cfg.runs)


def simulate_paths(cfg: SimConfig) -> np.ndarray:
    """All error paths, shape ``(runs, t_max + 1)``; meant for small diagnostic runs."""
    sizes = _chunk_sizes(cfg.runs)
    return np.vstack([simulate_chunk(cfg, c, m) for c, m in enumerate(sizes)])


@dataclass(frozen=True)
class Flag:
    t: int
    empirical: float
    reference: float
    std_error: float


@dataclass(frozen=True)
class ComparisonReport:
    mode: str
    sample_ts: tuple[int, ...]
    max_abs_z: float
    flags: tuple[Flag, ...] = field(default=())

    @property
    def ok(self) -> bool:
        return not self.flags


def _reference_values(reference, ts) -> np.ndarray:
    if callable(reference):
        return np.array([reference(t) for t in ts], dtype=float)
    ref = np.asarray(reference, dtype=float)
    return ref[list(ts)]


def compare(
    reference,
    empirical: EmpiricalTrajectory,
    sample_ts,
    mode: str = "exact",
    z: float = Z_LIMIT,
    atol: float = 1e-9,
) -> ComparisonReport:
    """Flag sample times where the Monte Carlo mean disagrees with ``reference``.

    ``reference`` is an array indexed by ``t`` or a callable of ``t``. In
    ``exact`` mode a flag means ``|mean - ref| > z*se + atol``; in ``bound``
    mode it means ``mean > ref + z*se + atol``. ``atol`` absorbs the case where
    every run has converged and the standard error is exactly zero.
    """
    if mode not in ("exact", "bound"):
        raise ValueError(f"unknown mode {mode!r}")
    ts = tuple(int(t) for t in sample_ts)
    if any(t < 0 or t >= empirical.mean_error.size for t in ts):
        raise ValueError("sample time outside simulated range")
    ref = _reference_values(reference, ts)
    mean = empirical.mean_error[list(ts)]
    se = empirical.std_error[list(ts)]
    diff = mean - ref
    with np.errstate(divide="ignore", invalid="ignore"):
        zs = np.where(se > 0, diff / se, np.where(np.abs(diff) > atol, np.copysign(np.inf, diff), 0.0))
    excess = np.abs(diff) if mode == "exact" else diff
    bad = excess > z * se + atol
    flags = tuple(Flag(t, float(mu), float(rv), float(s)) for t, mu, rv, s, b in zip(ts, mean, ref, se, bad) if b)
    zmax = float(np.max(np.abs(zs))) if mode == "exact" and ts else float(np.max(zs, initial=-math.inf))
    return ComparisonReport(mode, ts, zmax, flags)
