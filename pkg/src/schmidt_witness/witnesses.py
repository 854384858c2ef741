"""Closed-form witness operators, coefficient masks and thresholds."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import minimize_scalar

from .linalg import as_hermitian, hermitize, ket, local_dim, normalize, phi_plus, projector


def _idx(d: int, i: int, j: int) -> int:
    return i * d + j


@dataclass(frozen=True)
class CoefficientMask:
    """Index quadruples ``(i, j, k, l)`` of the coefficients ``|ij><kl|`` that may be nonzero."""

    d: int
    indices: frozenset

    def __post_init__(self):
        indices = frozenset(tuple(int(v) for v in q) for q in self.indices)
        object.__setattr__(self, "indices", indices)
        for q in indices:
            if len(q) != 4 or not all(0 <= v < self.d for v in q):
                raise ValueError(f"index {q} out of range for d={self.d}")
        for i, j, k, l in indices:
            if (k, l, i, j) not in indices:
                raise ValueError(f"mask is not closed under conjugation: {(i, j, k, l)} "
                                 f"present but {(k, l, i, j)} missing")

    def __len__(self) -> int:
        return len(self.indices)

    def __contains__(self, q) -> bool:
        return tuple(q) in self.indices

    def sorted(self) -> list[tuple[int, int, int, int]]:
        return sorted(self.indices)

    def matrix_positions(self) -> list[tuple[int, int]]:
        """``(row, col)`` of every masked entry in the ``d^2 x d^2`` matrix."""
        d = self.d
        return [(_idx(d, i, j), _idx(d, k, l)) for i, j, k, l in self.sorted()]

    def support_matrix(self) -> np.ndarray:
        n = self.d * self.d
        out = np.zeros((n, n), dtype=bool)
        for r, c in self.matrix_positions():
            out[r, c] = True
        return out

    @classmethod
    def full(cls, d: int) -> "CoefficientMask":
        return cls(d, frozenset(itertools.product(range(d), repeat=4)))

    @classmethod
    def from_operator(cls, op, atol: float = 0.0) -> "CoefficientMask":
        op = np.asarray(op)
        d = local_dim(op.shape[0])
        rows, cols = np.nonzero(np.abs(op) > atol)
        quads = {(r // d, r % d, c // d, c % d) for r, c in zip(rows, cols)}
        quads |= {(k, l, i, j) for i, j, k, l in quads}
        return cls(d, frozenset(quads))


def linear_mask(d: int) -> CoefficientMask:
    """The O(d) mask: ``|00><jj|``, ``|jj><00|``, and the diagonals ``|0j>``, ``|j0>``, ``|jj>``."""
    if d < 2:
        raise ValueError("linear_mask needs d >= 2")
    q = {(0, 0, j, j) for j in range(d)}
    for j in range(1, d):
        q |= {(j, j, 0, 0), (0, j, 0, j), (j, 0, j, 0), (j, j, j, j)}
    return CoefficientMask(d, frozenset(q))


def standard_witness(d: int, k: int) -> np.ndarray:
    """``1 - (d/k) |phi+><phi+|``."""
    if not 1 <= k <= d:
        raise ValueError(f"need 1 <= k <= d, got k={k}, d={d}")
    return hermitize(np.eye(d * d) - (d / k) * projector(phi_plus(d)).real)


def wtilde_fractions(d: int) -> dict[tuple[int, int, int, int], Fraction]:
    """Exact rational coefficients of the linear-mask witness operator."""
    if d < 3:
        raise ValueError("the witness operator is defined for d >= 3")
    c = 1 - Fraction(2, d)
    out = {(0, 0, 0, 0): c}
    for i in range(1, d):
        if d == 3:
            out[(0, i, 0, i)] = Fraction(1)
            out[(i, 0, i, 0)] = Fraction(1)
        out[(0, 0, i, i)] = -Fraction(2, d)
        out[(i, i, 0, 0)] = -Fraction(2, d)
        out[(i, i, i, i)] = -c
    return out


def build_Wtilde(d: int) -> np.ndarray:
    """The O(d)-measurement witness operator (before shifting).

    Its spectrum lies in ``[-1, 1]`` with ``|phi+>`` the eigenvector of ``-1``.
    """
    W = np.zeros((d * d, d * d))
    for (i, j, k, l), v in wtilde_fractions(d).items():
        W[_idx(d, i, j), _idx(d, k, l)] = float(v)
    return W


def is_wtilde(op, atol: float = 1e-12) -> bool:
    op = np.asarray(op)
    try:
        d = local_dim(op.shape[0])
    except ValueError:
        return False
    return d >= 3 and np.allclose(op, build_Wtilde(d), rtol=0.0, atol=atol)


def ck_threshold(d: int, k: int) -> float:
    """Conjectured minimal overlap magnitude ``sqrt((d^2 - 4d + 4k) / d^2)``."""
    if not 1 <= k <= d:
        raise ValueError(f"need 1 <= k <= d, got k={k}, d={d}")
    rad = (d * d - 4 * d + 4 * k) / (d * d)
    if rad < 0:
        raise ArithmeticError(f"negative radicand {rad} for d={d}, k={k}")
    return float(np.sqrt(rad))


def reduction_map_apply(rho_A, p: float) -> np.ndarray:
    """``R_p(X) = Tr(X) 1 - p X``."""
    if not 0 < p <= 1:
        raise ValueError(f"p must lie in (0, 1], got {p}")
    X = np.asarray(rho_A)
    return np.trace(X) * np.eye(X.shape[0]) - p * X


def one_tensor_R(op, p: float) -> np.ndarray:
    """``(1 (x) R_p)(X) = Tr_B(X) (x) 1 - p X`` on a ``d x d`` system."""
    if not 0 < p <= 1:
        raise ValueError(f"p must lie in (0, 1], got {p}")
    X = np.asarray(op)
    d = local_dim(X.shape[0])
    trB = np.einsum("ijkj->ik", X.reshape(d, d, d, d))
    return np.kron(trB, np.eye(d)) - p * X


def family_state(alpha: float, k: int, d: int) -> np.ndarray:
    """``alpha|00> + sqrt((1-alpha^2)/(k-1)) sum_{i=1}^{k-1} |ii>``; ``|00>`` for ``k = 1``."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    if not 1 <= k <= d:
        raise ValueError(f"need 1 <= k <= d, got k={k}, d={d}")
    if k == 1:
        return ket(d, 0, 0)
    psi = alpha * ket(d, 0, 0)
    beta = np.sqrt((1.0 - alpha * alpha) / (k - 1))
    for i in range(1, k):
        psi = psi + beta * ket(d, i, i)
    return normalize(psi)


@dataclass(frozen=True)
class FamilyMinimum:
    alpha: float
    value: float
    state: np.ndarray = field(repr=False)


def family_min_overlap(k: int, d: int, seesaw_opts: dict | None = None) -> FamilyMinimum:
    """Minimum of ``<phi_k(alpha)|W|phi_k(alpha)>`` over the family.

    The overlap equals ``A cos 2t - B sin 2t`` with ``alpha = cos t``,
    ``A = (d-2)/d`` and ``B = (2/d) sqrt(k-1)``, so the minimum is
    ``-sqrt(A^2 + B^2)`` at ``2t = pi - atan2(B, A)``.  For ``k = 1`` the family is a
    single product state and the product-state minimum is delegated to the
    see-saw minimizer.
    """
    if d < 3:
        raise ValueError("the witness operator is defined for d >= 3")
    if k == 1:
        from .seesaw import min_overlap_rank_k

        res = min_overlap_rank_k(build_Wtilde(d), 1, **(seesaw_opts or {}))
        return FamilyMinimum(float("nan"), res.best_value, res.best_state)
    A = (d - 2) / d
    B = 2.0 * np.sqrt(k - 1) / d
    theta = 0.5 * (np.pi - np.arctan2(B, A))
    alpha = float(np.cos(theta))
    value = -float(np.hypot(A, B))
    return FamilyMinimum(alpha, value, family_state(alpha, k, d))


def family_overlap(alpha: float, k: int, d: int) -> float:
    psi = family_state(alpha, k, d)
    return float(np.real(np.vdot(psi, build_Wtilde(d) @ psi)))


def family_min_numeric(k: int, d: int) -> float:
    """Bounded scalar minimization over ``alpha``; independent of the closed form."""
    res = minimize_scalar(lambda a: family_overlap(a, k, d), bounds=(0.0, 1.0),
                          method="bounded", options={"xatol": 1e-12})
    return float(res.fun)


@dataclass(frozen=True)
class WitnessCandidate:
    d: int
    k_target: int
    operator: np.ndarray = field(repr=False)
    mask: CoefficientMask = field(repr=False)
    threshold_C: float

    def __post_init__(self):
        op = as_hermitian(self.operator)
        object.__setattr__(self, "operator", op)
        if op.shape != (self.d ** 2, self.d ** 2):
            raise ValueError("operator dimension does not match d")
        outside = op[~self.mask.support_matrix()]
        if np.any(outside != 0):
            raise ValueError("operator has nonzero coefficients outside the mask")
        if np.max(np.abs(np.linalg.eigvalsh(op))) > 1 + 1e-8:
            raise ValueError("operator norm exceeds 1")
        if not -1.0 <= self.threshold_C <= 1.0:
            raise ValueError(f"threshold_C={self.threshold_C} outside [-1, 1]")

    @property
    def abs_threshold(self) -> float:
        return abs(self.threshold_C)


def shift_to_witness(cand: WitnessCandidate | np.ndarray, C: float | None = None) -> np.ndarray:
    """``W_k = W/(1+C) - C/(1+C) 1``: maps the threshold ``C`` to zero."""
    if isinstance(cand, WitnessCandidate):
        op, C = cand.operator, cand.threshold_C if C is None else C
    else:
        op = np.asarray(cand)
        if C is None:
            raise ValueError("threshold C is required for a bare operator")
    if not -1.0 < C <= 1.0:
        raise ValueError(f"threshold C must lie in (-1, 1], got {C}")
    n = op.shape[0]
    return hermitize(op / (1.0 + C) - (C / (1.0 + C)) * np.eye(n))
