"""Upper bounds on the expected error.

Two families: geometric bounds ``e^[0] * rho^t`` from the minimum relative
drift (of the chain itself or of a slower auxiliary chain), and the
power-factor expansion of a slower upper-triangular auxiliary chain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .builders import ProblemSpec
from .model import TransitionModel, check_distribution, initial_distribution
from .spectral import (
    TIE_TOL,
    ClosedFormError,
    _power_factor_expression,
    is_upper_triangular,
)

DOMINANCE_TOL = 1e-12
EIGEN_TIE_TOL = 1e-14
PROVENANCES = ("rate_bound", "auxiliary_rate", "analytic", "trivial")


class BoundNotApplicable(ValueError):
    pass


@dataclass(frozen=True)
class BoundExpression:
    """``base * rate**t``."""

    base: float
    rate: float
    provenance: str

    def __post_init__(self):
        if not 0.0 <= self.rate <= 1.0:
            raise ValueError(f"rate {float(self.rate)!r} outside [0, 1]")
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")

    def __call__(self, t: int) -> float:
        return self.base * self.rate**t

    def trajectory(self, t_max: int) -> np.ndarray:
        return self.base * self.rate ** np.arange(t_max + 1, dtype=float)


@dataclass(frozen=True)
class DominanceReport:
    holds: bool
    t_checked: int
    first_violation: Optional[tuple] = None  # (t, row, column, lhs, rhs), 0-based indices


@dataclass(frozen=True)
class SlowerCheck:
    """Outcome of a sufficient-condition test; ``failures`` names violated conditions."""

    holds: bool
    failures: tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return self.holds


def _start(model: TransitionModel, p0) -> np.ndarray:
    if p0 is None:
        return initial_distribution(model, "worst")
    return check_distribution(model, p0)


def drift(model: TransitionModel, state: int) -> float:
    """Expected one-step error decrease from ``state`` (1-based)."""
    if not 1 <= state <= model.L:
        raise IndexError(f"state {state} outside 1..{model.L}")
    e = model.errors
    return float(e[state - 1] - model.R[:, state - 1] @ e)


def _relative_drifts(R: np.ndarray, e: np.ndarray) -> np.ndarray:
    if np.any(e <= 0):
        raise BoundNotApplicable("all non-optimal errors must be positive")
    return (e - e @ R) / e


def _rate_from_drifts(ratios: np.ndarray) -> float:
    bad = np.flatnonzero(ratios <= 0)
    if bad.size:
        raise BoundNotApplicable(
            f"drift is not positive at state {bad[0] + 1} (relative drift {float(ratios[bad[0]]):.6g})"
        )
    return float(min(1.0, max(0.0, 1.0 - ratios.min())))


def rate_bound(model: TransitionModel, p0=None, allow_trivial: bool = False) -> BoundExpression:
    """``e^[t] <= e^[0] (1 - min_i drift(i)/e(i))^t``; ``p0`` defaults to the worst level.

    Raises :class:`BoundNotApplicable` when some drift is nonpositive unless
    ``allow_trivial`` is set, in which case the constant ``max_i e(i)`` is returned.
    """
    p = _start(model, p0)
    try:
        rho = _rate_from_drifts(_relative_drifts(model.R, model.errors))
    except BoundNotApplicable:
        if not allow_trivial:
            raise
        return BoundExpression(float(model.errors.max()), 1.0, "trivial")
    return BoundExpression(float(model.errors @ p), rho, "rate_bound")


def analytic_rate_bound(spec: ProblemSpec, base: Optional[float] = None) -> BoundExpression:
    """Matrix-free rates for BWSE: ``1 - 1/(e n^2)`` on LeadingOnes, ``1 - 1/(e n)`` on OneMax.

    ``base`` defaults to the worst-case error ``n``.
    """
    n = spec.n
    if spec.algorithm != "bwse" or spec.problem not in ("leadingones", "onemax"):
        raise BoundNotApplicable(
            f"no analytic rate for {spec.problem}-{spec.algorithm}; supported: leadingones/onemax with bwse"
        )
    rho = 1.0 - 1.0 / (math.e * n * n) if spec.problem == "leadingones" else 1.0 - 1.0 / (math.e * n)
    return BoundExpression(float(n) if base is None else float(base), rho, "analytic")


def spectral_radius(R, tol: float = 1e-12, max_iter: int = 100_000) -> float:
    R = np.asarray(R, dtype=float)
    if R.size == 0:
        return 0.0
    if is_upper_triangular(R) or is_upper_triangular(R.T):
        return float(np.max(np.abs(np.diag(R))))
    if np.array_equal(R, R.T):
        return float(np.max(np.abs(np.linalg.eigvalsh(R))))
    v = np.ones(R.shape[0]) / R.shape[0]
    est = 0.0
    for _ in range(max_iter):
        w = R @ v
        norm = np.abs(w).sum()
        if norm == 0.0:
            return 0.0
        new = norm / np.abs(v).sum()
        v = w / norm
        if abs(new - est) <= tol * new:
            return float(new)
        est = new
    # periodic or slowly mixing chains
    return float(np.max(np.abs(np.linalg.eigvals(R))))


def eigen_initial_distribution(model: TransitionModel, sign_tol: float = 1e-10) -> np.ndarray:
    """Start distribution along a nonnegative eigenvector of the spectral radius, unit l1 norm."""
    R = model.R
    L = model.L
    d = np.diag(R)
    # only rounding-level ties share the mass; a real gap, however small, picks one state
    top = np.isclose(d, d.max(), rtol=0, atol=EIGEN_TIE_TOL)
    if np.count_nonzero(R - np.diag(d)) == 0:
        return top / top.sum()
    if is_upper_triangular(R):
        k = int(np.flatnonzero(top)[0])
        lam = d[k]
        v = np.zeros(L)
        v[k] = 1.0
        for i in range(k - 1, -1, -1):
            v[i] = R[i, i + 1 : k + 1] @ v[i + 1 : k + 1] / (lam - d[i])
    elif np.array_equal(R, R.T):
        w, V = np.linalg.eigh(R)
        v = V[:, np.argmax(np.abs(w))]
    else:
        w, V = np.linalg.eig(R)
        idx = np.argmax(np.abs(w))
        if abs(w[idx].imag) > sign_tol:
            raise BoundNotApplicable("dominant eigenvalue is not real")
        v = V[:, idx].real
    if v.sum() < 0:
        v = -v
    if np.any(v < -sign_tol * np.abs(v).max()):
        raise BoundNotApplicable("dominant eigenvector has mixed signs")
    v = np.clip(v, 0.0, None)
    return v / v.sum()


def average_convergence_rate(traj, t: int) -> float:
    """Geometric average rate ``1 - (e^[t] / e^[0])**(1/t)``."""
    traj = np.asarray(traj, dtype=float)
    if t < 1:
        raise ValueError("t must be >= 1")
    if traj[0] == 0:
        raise ValueError("initial error is zero; rate undefined")
    return float(1.0 - (traj[t] / traj[0]) ** (1.0 / t))


def hat_T(L: int) -> np.ndarray:
    """All-ones upper-triangular matrix."""
    return np.triu(np.ones((L, L)))


def hat_T_inv(L: int) -> np.ndarray:
    return np.eye(L) - np.eye(L, k=1)


def _same_shape(Bp, B):
    Bp = np.asarray(Bp, dtype=float)
    B = np.asarray(B, dtype=float)
    if Bp.shape != B.shape or Bp.ndim != 2 or Bp.shape[0] != Bp.shape[1]:
        raise ValueError(f"dimension mismatch: {Bp.shape} vs {B.shape}")
    return Bp, B


def dominance_check(Bp, B, t_max: int, tol: float = DOMINANCE_TOL) -> DominanceReport:
    """Check ``T @ Bp^t >= T @ B^t`` entrywise for ``t = 0..t_max``."""
    Bp, B = _same_shape(Bp, B)
    L = B.shape[0]
    lhs = hat_T(L)
    rhs = hat_T(L)
    for t in range(1, t_max + 1):
        lhs = lhs @ Bp
        rhs = rhs @ B
        gap = lhs - rhs
        if gap.min() < -tol:
            i, j = np.unravel_index(np.argmin(gap), gap.shape)
            return DominanceReport(False, t, (t, int(i), int(j), float(lhs[i, j]), float(rhs[i, j])))
    return DominanceReport(True, t_max)


def slower_sufficient_check(Bp, B, tol: float = DOMINANCE_TOL) -> SlowerCheck:
    """Sufficient test: ``T Bp >= T B`` and ``T Bp T^{-1} >= 0``."""
    Bp, B = _same_shape(Bp, B)
    L = B.shape[0]
    T = hat_T(L)
    failures = []
    if (T @ Bp - T @ B).min() < -tol:
        failures.append("T Bp >= T B")
    if (T @ Bp @ hat_T_inv(L)).min() < -tol:
        failures.append("T Bp T^-1 >= 0")
    return SlowerCheck(not failures, tuple(failures))


def _full(model_or_matrix) -> np.ndarray:
    if isinstance(model_or_matrix, TransitionModel):
        return model_or_matrix.full_matrix()
    return np.asarray(model_or_matrix, dtype=float)


def triangular_slower_check(aux, model, tol: float = DOMINANCE_TOL) -> SlowerCheck:
    """Entrywise conditions on two upper-triangular full matrices (optimum included).

    With states ``0..L``: the auxiliary diagonal is no smaller; for ``i < j``
    the auxiliary moves less mass into states ``< i``; and for ``i < j-1`` the
    auxiliary's mass into states ``<= i`` does not grow from column ``j-1`` to ``j``.
    """
    Pp, P = _full(aux), _full(model)
    if Pp.shape != P.shape:
        raise ValueError(f"dimension mismatch: {Pp.shape} vs {P.shape}")
    if not (is_upper_triangular(Pp) and is_upper_triangular(P)):
        raise ValueError("both transition matrices must be upper triangular")
    n = P.shape[0]
    failures = []
    bad = np.flatnonzero(np.diag(Pp) - np.diag(P) < -tol)
    if bad.size:
        failures.append(f"diagonal not dominated at state {bad[0]}")
    # cumulative mass into states 0..i-1, per column
    below_p = np.cumsum(P, axis=0)
    below_pp = np.cumsum(Pp, axis=0)
    for j in range(1, n):
        for i in range(1, j):
            if below_p[i - 1, j] - below_pp[i - 1, j] < -tol:
                failures.append(f"improvement mass condition fails at i={i}, j={j}")
                break
        for i in range(0, j - 1):
            if below_pp[i, j - 1] - below_pp[i, j] < -tol:
                failures.append(f"column monotonicity fails at i={i}, j={j}")
                break
    return SlowerCheck(not failures, tuple(failures))


def improvement_probabilities(model: TransitionModel) -> np.ndarray:
    """Per state ``j``: total probability of moving to any better state (optimum included)."""
    P = model.full_matrix()
    return np.array([P[:j, j].sum() for j in range(1, model.L + 1)])


def bwse_drift_choice(n: int) -> np.ndarray:
    """``(j/n)(1 - 1/n)^(n-1)``: flip exactly one of the ``j`` zero bits and nothing else."""
    j = np.arange(1, n + 1)
    return j / n * (1.0 - 1.0 / n) ** (n - 1)


def build_bidiagonal_auxiliary(
    model: TransitionModel, choice="maximal", tol: float = DOMINANCE_TOL
) -> TransitionModel:
    """Slower bidiagonal chain: from state ``j`` move to ``j-1`` with probability ``a_j``.

    ``choice`` is ``"maximal"`` (``a_j`` = total improvement probability),
    ``"paper-bwse"`` (see :func:`bwse_drift_choice`, with ``n = L``) or an
    explicit array of per-state values, each at most the improvement probability.
    """
    P = model.full_matrix()
    if not is_upper_triangular(P):
        raise ValueError("auxiliary construction needs an upper-triangular chain")
    maximal = improvement_probabilities(model)
    if isinstance(choice, str):
        if choice == "maximal":
            a = maximal
        elif choice == "paper-bwse":
            a = bwse_drift_choice(model.L)
        else:
            raise ValueError(f"unknown auxiliary choice {choice!r}")
    else:
        a = np.asarray(choice, dtype=float)
        if a.shape != (model.L,):
            raise ValueError(f"choice needs {model.L} values")
    over = np.flatnonzero(a > maximal + tol)
    if over.size:
        j = over[0] + 1
        raise BoundNotApplicable(
            f"auxiliary move probability {float(a[j - 1]):.6g} at state {j} exceeds the improvement "
            f"probability {float(maximal[j - 1]):.6g}; the chain would not be slower"
        )
    if np.any(a <= 0):
        raise BoundNotApplicable(f"zero improvement probability at state {np.flatnonzero(a <= 0)[0] + 1}")
    a = np.minimum(a, maximal)
    L = model.L
    R = np.diag(1.0 - a)
    R[np.arange(L - 1), np.arange(1, L)] = a[1:]
    r = np.zeros(L)
    r[0] = a[0]
    return TransitionModel(model.levels, R, r)


def _verify_slower(aux: TransitionModel, model: TransitionModel) -> None:
    if aux.L != model.L:
        raise ValueError("auxiliary and model differ in dimension")
    if np.any(np.diff(model.errors) < 0):
        raise BoundNotApplicable("errors are not monotone; slower-chain bounds do not apply")
    if is_upper_triangular(aux.full_matrix()) and is_upper_triangular(model.full_matrix()):
        check = triangular_slower_check(aux, model)
    else:
        check = slower_sufficient_check(aux.R, model.R)
    if not check:
        raise BoundNotApplicable("auxiliary chain is not verified slower: " + "; ".join(check.failures))


def auxiliary_rate_bound(
    model: TransitionModel, aux: TransitionModel, p0=None, allow_trivial: bool = False
) -> BoundExpression:
    """Rate bound of a verified slower chain, started from the original ``e^[0]``.

    On plateaus the auxiliary drift vanishes; ``allow_trivial`` then returns
    the constant ``max_i e(i)`` as in :func:`rate_bound`.
    """
    _verify_slower(aux, model)
    p = _start(model, p0)
    try:
        rho = _rate_from_drifts(_relative_drifts(aux.R, model.errors))
    except BoundNotApplicable:
        if not allow_trivial:
            raise
        return BoundExpression(float(model.errors.max()), 1.0, "trivial")
    return BoundExpression(float(model.errors @ p), rho, "auxiliary_rate")


def perturb_distinct(A, eps0: Optional[float] = None) -> np.ndarray:
    """Add ``k * eps0`` to the ``k``-th repeat (``k = 0, 1, ...``) of each tied diagonal value.

    The result dominates ``A`` entrywise. ``eps0`` defaults to ``1e-6`` times
    the largest diagonal entry (or ``1e-6`` for a zero diagonal).
    """
    A = np.array(A, dtype=float)
    d = np.diag(A).copy()
    if eps0 is None:
        eps0 = 1e-6 * (max(d.max(), 0.0) or 1.0)
    if eps0 <= 0:
        raise ValueError("eps0 must be positive")
    taken: list[float] = []
    for idx in range(d.size):
        value = d[idx]
        while any(abs(value - other) <= TIE_TOL for other in taken):
            value += eps0
        taken.append(value)
        d[idx] = value
    np.fill_diagonal(A, d)
    return A


def power_factor_bound(
    model: TransitionModel, aux: TransitionModel, p0, eps0: Optional[float] = None
) -> ClosedFormError:
    """Power-factor expansion of a verified slower triangular chain; ``>= e^[t]`` for all ``t``.

    Tied auxiliary diagonals are separated with :func:`perturb_distinct`
    after the slower-chain check, which keeps the dominance.
    """
    p = check_distribution(model, p0)
    if not is_upper_triangular(aux.R):
        raise ValueError("power-factor bound needs an upper-triangular auxiliary")
    _verify_slower(aux, model)
    A = perturb_distinct(aux.R, eps0)
    return _power_factor_expression(A, model.errors, p)
