"""Exact level models for (1+1) EAs on OneMax, Mono and Needle-in-Haystack.

Level index ``i`` counts zero bits for OneMax/Mono (``|x| = n - i``) and one
bits for Needle (``|x| = i``, the needle is the all-zeros string). BWNE on
Needle keeps the full state space of non-optimal bit strings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .model import TransitionModel

PROBLEMS = ("onemax", "needle", "leadingones", "mono")
ALGORITHMS = ("obse", "bwse", "bwne")

MONO_FUNCTIONS: dict[str, Callable[[float], float]] = {
    "identity": lambda k: float(k),
    "square": lambda k: float(k) ** 2,
    "log": lambda k: math.log(k + 1.0),
}

BWNE_MAX_N = 10
BWSE_MAX_N = 20


@dataclass(frozen=True)
class ProblemSpec:
    problem: str
    algorithm: str
    n: int
    mono_f: Optional[Callable[[float], float]] = None

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ValueError(f"unknown problem {self.problem!r}")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if (self.problem == "mono") != (self.mono_f is not None):
            raise ValueError("mono_f is required for, and only for, problem 'mono'")
        if self.mono_f is not None:
            check_monotone(self.mono_f, self.n)


def check_monotone(mono_f, n: int) -> np.ndarray:
    values = np.array([mono_f(k) for k in range(n + 1)], dtype=float)
    if np.any(np.diff(values) <= 0):
        raise ValueError("mono_f must be strictly increasing on 0..n")
    return values


def _onemax_fitness(n: int, mono_f=None) -> np.ndarray:
    ones = n - np.arange(n + 1)
    if mono_f is None:
        return ones.astype(float)
    return check_monotone(mono_f, n)[ones]


def _obse_matrices(n: int):
    R = np.zeros((n, n))
    for i in range(1, n + 1):
        R[i - 1, i - 1] = 1.0 - i / n
        if i >= 2:
            R[i - 2, i - 1] = i / n
    r = np.zeros(n)
    r[0] = 1.0 / n
    return R, r


def build_onemax_obse(n: int) -> TransitionModel:
    if n < 1:
        raise ValueError("n must be >= 1")
    R, r = _obse_matrices(n)
    return TransitionModel.from_arrays(_onemax_fitness(n), R, r)


def build_mono_obse(n: int, mono_f) -> TransitionModel:
    if n < 1:
        raise ValueError("n must be >= 1")
    R, r = _obse_matrices(n)
    return TransitionModel.from_arrays(_onemax_fitness(n, mono_f), R, r)


def build_needle_bwse(n: int) -> TransitionModel:
    if n < 1:
        raise ValueError("n must be >= 1")
    q = 1.0 / n
    i = np.arange(1, n + 1)
    hit = q**i * (1 - q) ** (n - i)
    fitness = np.zeros(n + 1)
    fitness[0] = 1.0
    return TransitionModel.from_arrays(fitness, np.diag(1.0 - hit), hit)


def build_needle_bwne(n: int) -> TransitionModel:
    """Full chain over the ``2**n - 1`` non-optimal strings, ordered by integer value."""
    if not 1 <= n <= BWNE_MAX_N:
        raise ValueError(f"BWNE on Needle supports 1 <= n <= {BWNE_MAX_N} (got {n})")
    q = 1.0 / n
    states = np.arange(1, 2**n)
    popcount = np.array([bin(s).count("1") for s in range(2**n)])
    hamming = popcount[states[:, None] ^ states[None, :]]
    R = q**hamming * (1 - q) ** (n - hamming)
    r = q ** popcount[states] * (1 - q) ** (n - popcount[states])
    fitness = np.zeros(2**n)
    fitness[0] = 1.0
    return TransitionModel.from_arrays(fitness, R, r)


def _bwse_level_matrices(n: int):
    # P[k, j]: probability that bitwise mutation moves a string with j zeros to k zeros
    q = 1.0 / n
    P = np.zeros((n + 1, n + 1))
    for j in range(n + 1):
        for a in range(j + 1):
            for b in range(n - j + 1):
                P[j - a + b, j] += (
                    math.comb(j, a) * math.comb(n - j, b) * q ** (a + b) * (1 - q) ** (n - a - b)
                )
    R = np.zeros((n, n))
    r = P[0, 1:].copy()
    for j in range(1, n + 1):
        R[: j - 1, j - 1] = P[1:j, j]
        R[j - 1, j - 1] = 1.0 - R[: j - 1, j - 1].sum() - r[j - 1]
    return R, r


def build_onemax_bwse(n: int) -> TransitionModel:
    if not 1 <= n <= BWSE_MAX_N:
        raise ValueError(f"BWSE level model supports 1 <= n <= {BWSE_MAX_N} (got {n})")
    R, r = _bwse_level_matrices(n)
    return TransitionModel.from_arrays(_onemax_fitness(n), R, r)


def build_mono_bwse(n: int, mono_f) -> TransitionModel:
    """Same chain as OneMax-BWSE: strict elitism only sees the ordering of ``f``."""
    if not 1 <= n <= BWSE_MAX_N:
        raise ValueError(f"BWSE level model supports 1 <= n <= {BWSE_MAX_N} (got {n})")
    R, r = _bwse_level_matrices(n)
    return TransitionModel.from_arrays(_onemax_fitness(n, mono_f), R, r)


def build_model(spec: ProblemSpec) -> TransitionModel:
    key = (spec.problem, spec.algorithm)
    if spec.problem == "leadingones":
        raise ValueError(
            "LeadingOnes has no exact level model (the level process is not Markov); "
            "use 'simulate' or 'bound rate-analytic' instead"
        )
    if key == ("onemax", "obse"):
        return build_onemax_obse(spec.n)
    if key == ("onemax", "bwse"):
        return build_onemax_bwse(spec.n)
    if key == ("mono", "obse"):
        return build_mono_obse(spec.n, spec.mono_f)
    if key == ("mono", "bwse"):
        return build_mono_bwse(spec.n, spec.mono_f)
    if key == ("needle", "bwse"):
        return build_needle_bwse(spec.n)
    if key == ("needle", "bwne"):
        return build_needle_bwne(spec.n)
    raise ValueError(f"no exact model for {spec.problem}-{spec.algorithm}")


def uniform_bitstring_distribution(spec: ProblemSpec) -> np.ndarray:
    """Level distribution induced by a uniformly random start string.

    Mass that lands on the optimum is dropped, matching the model convention.
    """
    n = spec.n
    if spec.problem == "needle" and spec.algorithm == "bwne":
        return np.full(2**n - 1, 0.5**n)
    if spec.problem in ("onemax", "mono", "needle"):
        return np.array([math.comb(n, i) for i in range(1, n + 1)]) * 0.5**n
    raise ValueError(f"no level model for problem {spec.problem!r}")
