"""Absorbing Markov chain model of a (1+1) EA and its exact error trajectory.

States are labelled ``0..L``; state 0 is the optimum and is never stored in
the sub-matrix ``R``. Arrays are column-oriented: ``R[i, j]`` is the
probability of moving *from* state ``j+1`` *to* state ``i+1`` and a
distribution evolves as ``p_next = R @ p``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

STOCHASTIC_TOL = 1e-12


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class LevelDecomposition:
    """Fitness levels ``0..L`` sorted from the optimum downwards."""

    fitness: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "fitness", _frozen(self.fitness))
        if self.fitness.ndim != 1 or self.fitness.size < 2:
            raise ValueError("fitness needs the optimum plus at least one level")

    @property
    def L(self) -> int:
        return self.fitness.size - 1

    @property
    def f_opt(self) -> float:
        return float(self.fitness[0])

    @property
    def error(self) -> np.ndarray:
        """Absolute errors ``|f(i) - f_opt|`` for ``i = 0..L``."""
        return np.abs(self.fitness - self.fitness[0])


@dataclass(frozen=True)
class TransitionModel:
    """Level decomposition plus the non-optimal sub-matrix ``R`` and escape vector ``r``."""

    levels: LevelDecomposition
    R: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "R", _frozen(self.R))
        object.__setattr__(self, "r", _frozen(self.r))
        L = self.levels.L
        if self.R.shape != (L, L):
            raise ValueError(f"R has shape {self.R.shape}, expected {(L, L)}")
        if self.r.shape != (L,):
            raise ValueError(f"r has shape {self.r.shape}, expected {(L,)}")

    @classmethod
    def from_arrays(cls, fitness, R, r) -> "TransitionModel":
        return cls(LevelDecomposition(np.asarray(fitness, dtype=float)), R, r)

    @property
    def L(self) -> int:
        return self.levels.L

    @property
    def errors(self) -> np.ndarray:
        """Error vector over the non-optimal states ``1..L``."""
        return self.levels.error[1:]

    def full_matrix(self) -> np.ndarray:
        """The ``(L+1) x (L+1)`` column-stochastic matrix including the optimum."""
        P = np.zeros((self.L + 1, self.L + 1))
        P[0, 0] = 1.0
        P[0, 1:] = self.r
        P[1:, 1:] = self.R
        return P

    def to_dict(self) -> dict:
        return {
            "L": self.L,
            "fitness": self.levels.fitness.tolist(),
            "R": self.R.tolist(),
            "r": self.r.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TransitionModel":
        try:
            L = int(data["L"])
            model = cls.from_arrays(data["fitness"], data["R"], data["r"])
        except KeyError as exc:
            raise ValueError(f"model file is missing field {exc.args[0]!r}") from None
        if model.L != L:
            raise ValueError(f"field L={L} disagrees with fitness length {model.L + 1}")
        return model


def save_model(model: TransitionModel, path) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), indent=1))


def load_model(path) -> TransitionModel:
    with open(path) as fh:
        return TransitionModel.from_dict(json.load(fh))


def validate_model(model: TransitionModel, tol: float = STOCHASTIC_TOL) -> list[str]:
    """Return a list of violated invariants; an empty list means the model is valid."""
    problems = []
    fit = model.levels.fitness
    R, r = model.R, model.r

    if not fit[0] > fit[1]:
        problems.append("optimum fitness not strictly above level 1")
    if np.any(np.diff(fit[1:]) > 0):
        problems.append("fitness levels not sorted")
    if np.any(np.diff(model.errors) < 0):
        problems.append("errors not monotone")
    if np.any(R < 0) or np.any(R > 1) or np.any(r < 0) or np.any(r > 1):
        problems.append("entries outside [0, 1]")
    col_sums = R.sum(axis=0) + r
    for j in np.flatnonzero(np.abs(col_sums - 1.0) > tol):
        problems.append(f"column {j + 1} not stochastic (sum {float(col_sums[j])!r})")
    return problems


def check_distribution(model: TransitionModel, p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape != (model.L,):
        raise ValueError(f"distribution has shape {p.shape}, model needs ({model.L},)")
    if np.any(p < 0) or p.sum() > 1 + STOCHASTIC_TOL:
        raise ValueError("distribution must be nonnegative with total mass <= 1")
    return p


def distribution_step(model: TransitionModel, p) -> np.ndarray:
    """One generation: ``R @ p``. Mass leaving the non-optimal states is absorbed."""
    return model.R @ check_distribution(model, p)


def exact_trajectory(model: TransitionModel, p0, t_max: int) -> np.ndarray:
    """Expected error ``e^[t] = e^T R^t p0`` for ``t = 0..t_max``.

    Computed by repeated matrix-vector products, never by forming ``R^t``.
    """
    if t_max < 0:
        raise ValueError("t_max must be nonnegative")
    p = check_distribution(model, p0)
    e = model.errors
    out = np.empty(t_max + 1)
    out[0] = e @ p
    for t in range(1, t_max + 1):
        p = model.R @ p
        out[t] = e @ p
    return out


def initial_distribution(model: TransitionModel, spec: str) -> np.ndarray:
    """Parse ``worst``, ``uniform`` or ``level:k`` into a start distribution."""
    L = model.L
    p = np.zeros(L)
    if spec == "worst":
        p[L - 1] = 1.0
    elif spec == "uniform":
        p[:] = 1.0 / L
    elif spec.startswith("level:"):
        try:
            k = int(spec.split(":", 1)[1])
        except ValueError:
            raise ValueError(f"bad level in init spec {spec!r}") from None
        if not 1 <= k <= L:
            raise ValueError(f"level {k} outside 1..{L}")
        p[k - 1] = 1.0
    else:
        raise ValueError(f"unknown init spec {spec!r}; use worst, uniform or level:k")
    return p
