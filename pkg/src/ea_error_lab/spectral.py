"""Closed-form expressions for the error trajectory.

Every routine returns a :class:`ClosedFormError`, a finite sum of terms
``c * binom(t, d) * lam**(t - s)``. Routines that express powers through
``lam**(t-1)`` are only valid from ``t = 1``; they carry the exact ``t = 0``
value in ``head``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .model import TransitionModel, check_distribution

TIE_TOL = 1e-9
SCHUR_MAX_L = 6
SCHUR_MAX_T = 12


class RepeatedEigenvalueError(ValueError):
    """Triangular input has two diagonal entries closer than the tie tolerance."""

    def __init__(self, i: int, j: int, value: float):
        self.pair = (i, j)
        super().__init__(
            f"diagonal entries {i} and {j} coincide (~{float(value)!r}); "
            "use perturb_distinct or the Jordan path"
        )


class UnsupportedMatrixError(ValueError):
    pass


@dataclass(frozen=True)
class Term:
    c: float
    lam: float
    degree: int = 0
    shift: int = 0

    def __call__(self, t: int) -> float:
        if t < self.degree:
            return 0.0
        k = t - self.shift
        if self.lam == 0.0:
            power = 1.0 if k == 0 else 0.0
        else:
            power = self.lam**k
        return self.c * math.comb(t, self.degree) * power


@dataclass(frozen=True)
class ClosedFormError:
    terms: tuple[Term, ...]
    head: tuple[float, ...] = field(default=())

    def __call__(self, t: int) -> float:
        return evaluate_closed_form(self, t)

    def trajectory(self, t_max: int) -> np.ndarray:
        return np.array([evaluate_closed_form(self, t) for t in range(t_max + 1)])

    def pruned(self, atol: float = 1e-12) -> "ClosedFormError":
        """Drop terms whose coefficient is below ``atol`` times the largest one."""
        if not self.terms:
            return self
        scale = max(abs(term.c) for term in self.terms)
        kept = tuple(term for term in self.terms if abs(term.c) > atol * scale)
        return ClosedFormError(kept, self.head)

    def scaled(self, factor: float) -> "ClosedFormError":
        return ClosedFormError(
            tuple(Term(term.c * factor, term.lam, term.degree, term.shift) for term in self.terms),
            tuple(h * factor for h in self.head),
        )

    def render(self, digits: int = 4) -> str:
        if not self.terms:
            return "0"
        parts = []
        for term in self.terms:
            s = f"{term.c:.{digits}g}"
            if term.degree:
                s += f"*C(t,{term.degree})"
            exp = "t" if term.shift == 0 else f"t-{term.shift}"
            s += f"*{term.lam:.{digits}g}^({exp})"
            parts.append(s)
        text = " + ".join(parts).replace("+ -", "- ")
        if self.head:
            text += f"  (t>={len(self.head)}; e[0]={self.head[0]:.{digits}g})"
        return text


def evaluate_closed_form(expr: ClosedFormError, t: int) -> float:
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t < len(expr.head):
        return float(expr.head[t])
    return float(sum(term(t) for term in expr.terms))


def is_upper_triangular(A, tol: float = 0.0) -> bool:
    return bool(np.all(np.abs(np.tril(A, -1)) <= tol))


def _check_distinct(diag, tol: float = TIE_TOL) -> None:
    order = np.argsort(diag, kind="stable")
    gaps = np.diff(diag[order])
    bad = np.flatnonzero(gaps <= tol)
    if bad.size:
        i, j = sorted((int(order[bad[0]]), int(order[bad[0] + 1])))
        raise RepeatedEigenvalueError(i, j, float(diag[i]))


def _triangular_eigenvectors(A: np.ndarray) -> np.ndarray:
    """Right eigenvectors (as columns) of an upper-triangular matrix with distinct diagonal."""
    L = A.shape[0]
    d = np.diag(A)
    V = np.zeros((L, L))
    for k in range(L):
        V[k, k] = 1.0
        for i in range(k - 1, -1, -1):
            V[i, k] = A[i, i + 1 : k + 1] @ V[i + 1 : k + 1, k] / (d[k] - d[i])
    return V


def diagonalizable_closed_form(model: TransitionModel, p0, method: str = "auto") -> ClosedFormError:
    """``e^[t] = sum_i c_i lam_i^t`` for diagonal, symmetric or distinct-triangular ``R``.

    ``method`` is one of ``auto``, ``diagonal``, ``symmetric``, ``triangular``.
    """
    p0 = check_distribution(model, p0)
    R, e = model.R, model.errors
    if method == "auto":
        if np.count_nonzero(R - np.diag(np.diag(R))) == 0:
            method = "diagonal"
        elif np.array_equal(R, R.T):
            method = "symmetric"
        elif is_upper_triangular(R):
            method = "triangular"
        else:
            raise UnsupportedMatrixError("R is not diagonal, symmetric or upper triangular")

    if method == "diagonal":
        if np.count_nonzero(R - np.diag(np.diag(R))):
            raise UnsupportedMatrixError("R is not diagonal")
        lam, a, b = np.diag(R), e, p0
    elif method == "symmetric":
        if not np.allclose(R, R.T, rtol=0, atol=1e-14):
            raise UnsupportedMatrixError("R is not symmetric")
        lam, V = np.linalg.eigh(R)
        # R = V diag(lam) V^T, so Q = V^T and Q^{-1} = V
        a, b = e @ V, V.T @ p0
    elif method == "triangular":
        if not is_upper_triangular(R):
            raise UnsupportedMatrixError("R is not upper triangular")
        lam = np.diag(R)
        _check_distinct(lam)
        V = _triangular_eigenvectors(R)
        a = e @ V
        b = np.linalg.solve(V, p0)
    else:
        raise ValueError(f"unknown method {method!r}")
    return ClosedFormError(tuple(Term(float(ai * bi), float(li)) for ai, bi, li in zip(a, b, lam)))


@dataclass(frozen=True)
class PowerFactorTensor:
    """``p[i, j, k]`` such that ``(A^t)[i, j] = sum_k p[i, j, k] * diag[k]**(t-1)`` for ``t >= 1``."""

    p: np.ndarray
    diag: np.ndarray

    def matrix_power(self, t: int) -> np.ndarray:
        if t < 1:
            raise ValueError("power-factor expansion holds for t >= 1")
        return self.p @ (self.diag ** (t - 1))


def power_factors(A, tie_tol: float = TIE_TOL) -> PowerFactorTensor:
    """Power factors of an upper-triangular matrix with pairwise distinct diagonal.

    Built column by column: entries with ``i <= k < j`` come from the
    recurrence over earlier columns, and the ``k = j`` entry closes the
    column so that the ``t = 1`` expansion reproduces ``A`` itself.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("A must be square")
    if not is_upper_triangular(A):
        raise UnsupportedMatrixError("A is not upper triangular")
    d = np.diag(A).copy()
    _check_distinct(d, tie_tol)
    L = d.size
    P = np.zeros((L, L, L))
    for j in range(L):
        P[j, j, j] = d[j]
        if j == 0:
            continue
        # S[i, k] = sum_{l=k}^{j-1} P[i, l, k] * A[l, j]; P vanishes for l < k, so sum all l < j
        S = np.einsum("ilk,l->ik", P[:, :j, :j], A[:j, j])
        P[:j, j, :j] = np.triu(S[:j, :j]) / (d[:j] - d[j])
        P[:j, j, j] = A[:j, j] - P[:j, j, :j].sum(axis=1)
    return PowerFactorTensor(P, d)


def triangular_closed_form(model: TransitionModel, p0) -> ClosedFormError:
    """``e^[t] = sum_k C_k lam_k^(t-1)`` with ``C_k = sum_{i,j} e_i p[i,j,k] p0_j``."""
    p0 = check_distribution(model, p0)
    return _power_factor_expression(model.R, model.errors, p0)


def _power_factor_expression(A, e, p0) -> ClosedFormError:
    pf = power_factors(A)
    coeff = np.einsum("i,ijk,j->k", e, pf.p, p0)
    terms = tuple(Term(float(c), float(lam), 0, 1) for c, lam in zip(coeff, pf.diag))
    return ClosedFormError(terms, head=(float(e @ p0),))


@dataclass(frozen=True)
class JordanStructure:
    """Block layout with ``R = Q_inv @ J @ Q``; blocks are ``(eigenvalue, size)`` in order."""

    blocks: tuple[tuple[float, int], ...]
    Q: np.ndarray
    Q_inv: np.ndarray

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        Q_inv = np.asarray(self.Q_inv, dtype=float)
        L = sum(size for _, size in self.blocks)
        if Q.shape != (L, L) or Q_inv.shape != (L, L):
            raise ValueError(f"block sizes sum to {L} but Q has shape {Q.shape}")
        if np.max(np.abs(Q @ Q_inv - np.eye(L))) >= 1e-8:
            raise ValueError("Q_inv is not the inverse of Q")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "Q_inv", Q_inv)

    @classmethod
    def from_q(cls, blocks, Q) -> "JordanStructure":
        Q = np.asarray(Q, dtype=float)
        return cls(tuple((float(lam), int(size)) for lam, size in blocks), Q, np.linalg.inv(Q))

    def jordan_matrix(self) -> np.ndarray:
        L = self.Q.shape[0]
        J = np.zeros((L, L))
        pos = 0
        for lam, size in self.blocks:
            for r in range(size):
                J[pos + r, pos + r] = lam
                if r + 1 < size:
                    J[pos + r, pos + r + 1] = 1.0
            pos += size
        return J


def jordan_closed_form(js: JordanStructure, e, p0) -> ClosedFormError:
    """Sum over Jordan blocks of ``a_i^T J_i^t b_i`` with ``a^T = e^T Q_inv`` and ``b = Q p0``.

    The ``q``-th superdiagonal of ``J_i^t`` is ``binom(t, q) lam^(t-q)``, which
    pairs ``a_r`` with ``b_{r+q}``.
    """
    a = np.asarray(e, dtype=float) @ js.Q_inv
    b = js.Q @ np.asarray(p0, dtype=float)
    terms = []
    pos = 0
    for lam, size in js.blocks:
        ab, bb = a[pos : pos + size], b[pos : pos + size]
        for q in range(size):
            c = float(ab[: size - q] @ bb[q:])
            terms.append(Term(c, lam, q, q))
        pos += size
    return ClosedFormError(tuple(terms))


def _compositions(total: int, parts: int):
    # nonnegative integer vectors of length `parts` summing to `total`
    for bars in itertools.combinations(range(total + parts - 1), parts - 1):
        prev = -1
        out = []
        for bar in bars:
            out.append(bar - prev - 1)
            prev = bar
        out.append(total + parts - 1 - prev - 1)
        yield out


def schur_entry_oracle(T, i: int, j: int, t: int) -> float:
    """Entry ``(i, j)`` (0-based) of ``T^t`` by enumerating increasing index paths.

    A path ``i = a_1 < ... < a_{m+1} = j`` contributes the product of the
    traversed off-diagonal entries times the sum over all ways of spending
    the remaining ``t - m`` steps on the diagonal entries of its nodes.
    """
    T = np.asarray(T, dtype=float)
    L = T.shape[0]
    if L > SCHUR_MAX_L or t > SCHUR_MAX_T:
        raise ValueError(f"oracle limited to L <= {SCHUR_MAX_L}, t <= {SCHUR_MAX_T}")
    lam = np.diag(T)
    if i > j:
        return 0.0
    if i == j:
        return float(lam[i] ** t)
    total = 0.0
    for m in range(1, min(j - i, t) + 1):
        for inner in itertools.combinations(range(i + 1, j), m - 1):
            path = (i, *inner, j)
            weight = math.prod(T[path[l], path[l + 1]] for l in range(m))
            if weight == 0.0:
                continue
            diag_sum = sum(
                math.prod(lam[a] ** b for a, b in zip(path, beta))
                for beta in _compositions(t - m, m + 1)
            )
            total += weight * diag_sum
    return float(total)
