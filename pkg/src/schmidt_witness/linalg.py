"""Dense Hermitian linear algebra and bipartite state primitives.

Operators are plain ``numpy`` arrays of shape ``(d*d, d*d)`` indexed as
``|ij><kl|`` -> ``[i*d + j, k*d + l]``; pure states are 1-D arrays of length
``d*d``.  Nothing here mutates its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RANK_TOL = 1e-9
NORM_TOL = 1e-12


class InternalConsistencyError(RuntimeError):
    """A numerical identity that must hold exactly was violated."""


def _require_finite(a: np.ndarray, what: str = "input") -> None:
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{what} contains non-finite entries")


def local_dim(n: int) -> int:
    """Return ``d`` for a bipartite space of dimension ``n = d*d``."""
    d = int(round(np.sqrt(n)))
    if d * d != n:
        raise ValueError(f"dimension {n} is not a perfect square")
    return d


def hermitize(a: np.ndarray) -> np.ndarray:
    """Return the exactly Hermitian matrix defined by the upper triangle of ``a``.

    The diagonal is made real; entries below the diagonal are replaced by the
    conjugates of their mirror images.
    """
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    _require_finite(a, "operator")
    upper = np.triu(a, 1)
    out = upper + upper.conj().T
    out = out.astype(np.result_type(a.dtype, np.float64))
    out[np.diag_indices_from(out)] = np.real(np.diag(a))
    return out


def as_hermitian(a, atol: float = 1e-10) -> np.ndarray:
    """Validate that ``a`` is Hermitian to ``atol`` and return its exact form."""
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    _require_finite(a, "operator")
    err = np.max(np.abs(a - a.conj().T)) if a.size else 0.0
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    if err > atol * scale:
        raise ValueError(f"operator is not Hermitian (max asymmetry {err:.3g})")
    return hermitize(a)


def as_pure_state(psi, d: int | None = None) -> np.ndarray:
    """Validate a normalized pure state of a ``d x d`` system."""
    psi = np.asarray(psi, dtype=complex).ravel()
    _require_finite(psi, "state")
    dd = local_dim(psi.size)
    if d is not None and dd != d:
        raise ValueError(f"state has local dimension {dd}, expected {d}")
    norm = np.linalg.norm(psi)
    if abs(norm - 1.0) > NORM_TOL:
        raise ValueError(f"state is not normalized (norm = {norm!r})")
    return psi


def normalize(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex).ravel()
    norm = np.linalg.norm(psi)
    if norm == 0.0:
        raise ValueError("cannot normalize the zero vector")
    return psi / norm


def as_density(rho, d: int | None = None, atol: float = 1e-10) -> np.ndarray:
    """Validate a density matrix: Hermitian, unit trace, PSD to ``atol``."""
    rho = as_hermitian(rho)
    dd = local_dim(rho.shape[0])
    if d is not None and dd != d:
        raise ValueError(f"density matrix has local dimension {dd}, expected {d}")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > atol:
        raise ValueError(f"trace is {tr!r}, expected 1")
    lmin = np.linalg.eigvalsh(rho)[0]
    if lmin < -atol:
        raise ValueError(f"density matrix has negative eigenvalue {lmin!r}")
    return rho


def hermitian_eig(op) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian operator.

    Returns ascending eigenvalues and a unitary whose columns are the
    corresponding eigenvectors.  Only the upper triangle of ``op`` is read.
    """
    h = hermitize(op)
    w, v = np.linalg.eigh(h, UPLO="U")
    return w, v


def lambda_min(op) -> float:
    return float(np.linalg.eigvalsh(hermitize(op), UPLO="U")[0])


def ket(d: int, *indices: int) -> np.ndarray:
    """Computational-basis state ``|i j ...>`` of local dimension ``d``."""
    psi = np.zeros(d ** len(indices), dtype=complex)
    pos = 0
    for i in indices:
        if not 0 <= i < d:
            raise ValueError(f"index {i} out of range for d={d}")
        pos = pos * d + i
    psi[pos] = 1.0
    return psi


def phi_plus(d: int) -> np.ndarray:
    psi = np.zeros(d * d, dtype=complex)
    psi[np.arange(d) * (d + 1)] = 1.0 / np.sqrt(d)
    return psi


def projector(psi) -> np.ndarray:
    psi = np.asarray(psi).ravel()
    return np.outer(psi, psi.conj())


def partial_trace_B(op, d: int) -> np.ndarray:
    """Trace out the second factor: ``(Tr_B X)_{ik} = sum_j X_{ij,kj}``."""
    op = np.asarray(op)
    if op.shape != (d * d, d * d):
        raise ValueError(f"operator of shape {op.shape} is not on a {d}x{d} system")
    return np.einsum("ijkj->ik", op.reshape(d, d, d, d))


def expectation(op, state) -> float:
    """``<psi|op|psi>`` for a vector or ``Tr(op rho)`` for a matrix."""
    op = np.asarray(op)
    state = np.asarray(state)
    if state.ndim == 1:
        if state.size != op.shape[0]:
            raise ValueError("dimension mismatch between operator and state")
        val = np.vdot(state, op @ state)
    else:
        if state.shape != op.shape:
            raise ValueError("dimension mismatch between operator and state")
        val = np.einsum("ij,ji->", op, state)
    scale = max(1.0, abs(val.real))
    if abs(val.imag) > 1e-9 * scale:
        raise InternalConsistencyError(
            f"expectation of a Hermitian operator has imaginary part {val.imag:.3g}"
        )
    return float(val.real)


def expectations(op, states) -> np.ndarray:
    """Vectorized ``<psi_n|op|psi_n>`` for the rows of ``states``."""
    states = np.asarray(states)
    vals = np.einsum("ni,ij,nj->n", states.conj(), op, states)
    return vals.real


@dataclass(frozen=True)
class SchmidtDecomposition:
    coefficients: np.ndarray
    basis_A: np.ndarray  # columns
    basis_B: np.ndarray  # columns
    rank_tol: float = RANK_TOL

    @property
    def rank(self) -> int:
        return int(np.sum(self.coefficients > self.rank_tol))

    def reconstruct(self) -> np.ndarray:
        return np.einsum("s,is,js->ij", self.coefficients, self.basis_A, self.basis_B).ravel()


def schmidt_decompose(psi, d: int | None = None, rank_tol: float = RANK_TOL) -> SchmidtDecomposition:
    """Schmidt decomposition via the SVD of the ``d x d`` amplitude matrix.

    Only coefficients above ``rank_tol`` are kept, so ``len(coefficients)``
    equals the Schmidt rank.
    """
    psi = as_pure_state(psi, d)
    d = local_dim(psi.size)
    u, s, vh = np.linalg.svd(psi.reshape(d, d))
    keep = s > rank_tol
    return SchmidtDecomposition(
        coefficients=s[keep], basis_A=u[:, keep], basis_B=vh[keep].T, rank_tol=rank_tol
    )


def schmidt_rank(psi, rank_tol: float = RANK_TOL) -> int:
    psi = np.asarray(psi).ravel()
    d = local_dim(psi.size)
    s = np.linalg.svd(psi.reshape(d, d), compute_uv=False)
    return int(np.sum(s > rank_tol * np.linalg.norm(psi)))


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def random_pure_state(d: int, seed=None) -> np.ndarray:
    """Haar-random pure state on ``C^d (x) C^d``."""
    rng = _rng(seed)
    z = rng.standard_normal(d * d) + 1j * rng.standard_normal(d * d)
    return z / np.linalg.norm(z)


def random_density(d: int, seed=None, n_mix: int | None = None) -> np.ndarray:
    """Random mixed state obtained by mixing ``n_mix`` Haar-random pure states."""
    rng = _rng(seed)
    n_mix = d * d if n_mix is None else n_mix
    weights = rng.dirichlet(np.ones(n_mix))
    rho = np.zeros((d * d, d * d), dtype=complex)
    for w in weights:
        rho += w * projector(random_pure_state(d, rng))
    return hermitize(rho)


def random_schmidt_rank_states(d: int, k: int, n: int, seed=None) -> np.ndarray:
    """``n`` random normalized states of Schmidt rank at most ``k`` (rows)."""
    rng = _rng(seed)
    shape = (n, k, d)
    a = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    b = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    psi = np.einsum("nsi,nsj->nij", a, b).reshape(n, d * d)
    return psi / np.linalg.norm(psi, axis=1, keepdims=True)
