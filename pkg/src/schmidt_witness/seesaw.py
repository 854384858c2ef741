"""See-saw minimization of ``<phi|W|phi>`` over states of Schmidt rank at most ``k``.

A rank-``k`` state is written as ``sum_s a_s (x) b_s`` with unnormalized local
vectors.  With the ``b`` vectors fixed the objective is a Rayleigh quotient in
the stacked ``a`` vectors, so each half-step is a generalized Hermitian
eigenproblem solved exactly; the value can therefore never increase.  All
restarts are advanced together as one batch.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .linalg import as_hermitian, local_dim, schmidt_rank

log = logging.getLogger(__name__)

RIDGE = 1e-12


class SeesawError(RuntimeError):
    pass


@dataclass(frozen=True)
class SchmidtAnsatz:
    """Local vector pairs; the assembled state has Schmidt rank at most ``k``."""

    d: int
    k: int
    a_vectors: np.ndarray  # (k, d)
    b_vectors: np.ndarray  # (k, d)

    def state(self) -> np.ndarray:
        psi = np.einsum("si,sj->ij", self.a_vectors, self.b_vectors).ravel()
        return psi / np.linalg.norm(psi)


@dataclass
class SeesawResult:
    best_state: np.ndarray = field(repr=False)
    best_value: float
    cycles_used: int
    restarts: int
    converged: bool
    values: np.ndarray = field(default=None, repr=False)  # final value per restart
    states: np.ndarray = field(default=None, repr=False)  # final state per restart


def _half_step(W4, fixed, side):
    """Optimal free vectors given the ``fixed`` ones, for a batch of restarts.

    ``W4`` is ``W`` reshaped to ``(d, d, d, d)``; ``fixed`` has shape
    ``(R, k, d)``.  Returns the new free vectors ``(R, k, d)``, the attained
    values ``(R,)`` and a mask of restarts whose Gram matrix was singular.
    """
    R, k, d = fixed.shape
    fc = fixed.conj()
    if side == "a":
        # H[(s,x),(t,x')] = sum_{y,y'} conj(b_s[y]) W[x,y,x',y'] b_t[y']
        H = np.einsum("rsy,xyzw,rtw->rsxtz", fc, W4, fixed, optimize=True)
    else:
        H = np.einsum("rsx,xyzw,rtz->rsytw", fc, W4, fixed, optimize=True)
    H = H.reshape(R, k * d, k * d)
    gram = np.einsum("rsy,rty->rst", fc, fixed)  # <f_s|f_t>
    G = np.einsum("rst,xz->rsxtz", gram, np.eye(d)).reshape(R, k * d, k * d)
    H = 0.5 * (H + H.conj().transpose(0, 2, 1))
    G = 0.5 * (G + G.conj().transpose(0, 2, 1))
    scale = np.max(np.abs(np.diagonal(G, axis1=1, axis2=2)), axis=1)
    bad = np.zeros(R, dtype=bool)
    try:
        L = np.linalg.cholesky(G)
    except np.linalg.LinAlgError:
        L = np.empty_like(G)
        for r in range(R):
            g = G[r]
            try:
                L[r] = np.linalg.cholesky(g)
            except np.linalg.LinAlgError:
                try:
                    L[r] = np.linalg.cholesky(g + RIDGE * max(scale[r], 1.0) * np.eye(k * d))
                except np.linalg.LinAlgError:
                    L[r] = np.eye(k * d)
                    bad[r] = True
    # whitened problem: L^-1 H L^-H
    Linv = np.linalg.inv(L)
    Hw = Linv @ H @ Linv.conj().transpose(0, 2, 1)
    Hw = 0.5 * (Hw + Hw.conj().transpose(0, 2, 1))
    w, V = np.linalg.eigh(Hw)
    v = Linv.conj().transpose(0, 2, 1) @ V[:, :, :1]
    cond = np.linalg.cond(G) if k > 1 else np.ones(R)
    bad |= ~np.isfinite(cond) | (cond > 1e12)
    return v[:, :, 0].reshape(R, k, d), w[:, 0], bad


def _assemble(a, b):
    psi = np.einsum("rsi,rsj->rij", a, b).reshape(a.shape[0], -1)
    return psi / np.linalg.norm(psi, axis=1, keepdims=True)


def _random_vectors(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def min_overlap_rank_k(W, k: int, restarts: int = 50, max_cycles: int = 200,
                       conv_tol: float = 1e-9, seed=0, init_states=None) -> SeesawResult:
    """Locally minimize ``<phi|W|phi>`` over normalized states of Schmidt rank ``<= k``.

    Parameters
    ----------
    W : array_like
        Hermitian operator on ``C^d (x) C^d``.
    k : int
        Schmidt-rank bound, ``1 <= k <= d``.
    restarts : int
        Number of random initializations (complex Gaussian local vectors).
    max_cycles : int
        Maximum number of full cycles (one ``a`` and one ``b`` half-step).
    conv_tol : float
        A restart stops once a full cycle lowers its value by less than this.
    seed : int or numpy Generator
        Makes the result deterministic.
    init_states : array_like, optional
        Extra starting states (rows); their leading ``k`` Schmidt terms seed
        additional restarts.

    Returns
    -------
    SeesawResult
        The best value is an upper bound on the true minimum; only local
        optimality is guaranteed.
    """
    W = as_hermitian(W)
    d = local_dim(W.shape[0])
    if not 1 <= k <= d:
        raise ValueError(f"need 1 <= k <= d, got k={k}, d={d}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    W4 = W.reshape(d, d, d, d)

    a = _random_vectors(rng, (restarts, k, d))
    b = _random_vectors(rng, (restarts, k, d))
    if init_states is not None and len(init_states):
        a0, b0 = _split_states(np.asarray(init_states), d, k, rng)
        a = np.concatenate([a0, a])
        b = np.concatenate([b0, b])
    R = a.shape[0]

    values = np.full(R, np.inf)
    active = np.ones(R, dtype=bool)
    converged = np.zeros(R, dtype=bool)
    cycles = 0
    redraws = 0
    for cycles in range(1, max_cycles + 1):
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            cycles -= 1
            break
        prev = values[idx]
        na, va, bad_a = _half_step(W4, b[idx], "a")
        a[idx] = na
        nb, vb, bad_b = _half_step(W4, a[idx], "b")
        b[idx] = nb
        bad = bad_a | bad_b
        # each half-step solves its subproblem globally, so values cannot rise
        tol = 1e-9 * np.maximum(1.0, np.abs(va))
        ok = ~bad & np.isfinite(prev)
        if np.any(ok & ((va > prev + tol) | (vb > va + tol))):
            raise SeesawError("see-saw value increased within a cycle")
        if np.any(bad):
            redraws += int(bad.sum())
            if redraws > 10 * R:
                raise SeesawError("all see-saw restarts degenerate")
            r = idx[bad]
            a[r] = _random_vectors(rng, (r.size, k, d))
            b[r] = _random_vectors(rng, (r.size, k, d))
            vb = vb.copy()
            vb[bad] = np.inf
        # rescale to keep the local vectors well conditioned
        norm = np.sqrt(np.linalg.norm(a[idx], axis=(1, 2)) * np.linalg.norm(b[idx], axis=(1, 2)))
        a[idx] /= (np.linalg.norm(a[idx], axis=(1, 2)) / norm)[:, None, None]
        b[idx] /= (np.linalg.norm(b[idx], axis=(1, 2)) / norm)[:, None, None]
        values[idx] = vb
        done = (~bad) & (prev - vb < conv_tol)
        converged[idx[done]] = True
        active[idx[done]] = False

    states = _assemble(a, b)
    exact = np.einsum("ri,ij,rj->r", states.conj(), W, states).real
    best = int(np.argmin(exact))  # argmin picks the lowest index on ties
    return SeesawResult(
        best_state=states[best],
        best_value=float(exact[best]),
        cycles_used=cycles,
        restarts=R,
        converged=bool(converged.all()),
        values=exact,
        states=states,
    )


def _split_states(states, d, k, rng):
    """Seed local vectors from the leading Schmidt terms of given states."""
    n = states.shape[0]
    a = np.empty((n, k, d), dtype=complex)
    b = np.empty((n, k, d), dtype=complex)
    for r, psi in enumerate(states):
        u, s, vh = np.linalg.svd(psi.reshape(d, d))
        s = s[:k] + 1e-6 * rng.random(k)  # keep the Gram matrix invertible
        a[r] = (u[:, :k] * np.sqrt(s)).T
        b[r] = vh[:k] * np.sqrt(s)[:, None]
    return a, b


def check_result(res: SeesawResult, W, k: int) -> None:
    """Assert the documented invariants of a see-saw result."""
    if schmidt_rank(res.best_state) > k:
        raise AssertionError("see-saw state exceeds the Schmidt-rank bound")
    val = float(np.real(np.vdot(res.best_state, np.asarray(W) @ res.best_state)))
    if abs(val - res.best_value) > 1e-10:
        raise AssertionError("stored value does not match the state")
