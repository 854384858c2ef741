"""Iterative construction of a witness operator restricted to a coefficient mask.

For a fixed threshold ``C`` the inner loop alternates between an SDP that
proposes an operator ``W`` (supported on the mask, ``-1 <= W <= 1``,
``<psi0|W|psi0> = -1`` and ``<phi|W|phi> >= C`` for every cut state found so
far) and a see-saw search for a Schmidt-rank-``k`` state violating
``<phi|W|phi> >= C``.  The outer loop bisects ``C``.

Two reformulations keep the SDP well posed.  ``<psi0|W|psi0> = -1`` together
with ``W >= -1`` forces ``W psi0 = -psi0``, so this is imposed as linear
equalities and ``W + 1 >= 0`` is only required on the orthogonal complement
of ``psi0`` (the full block would have no interior).  Coefficients outside
the mask are not variables at all.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import sdp
from .linalg import as_density, as_hermitian, schmidt_rank
from .seesaw import min_overlap_rank_k
from .witnesses import CoefficientMask, WitnessCandidate, shift_to_witness

log = logging.getLogger(__name__)


class ForgeError(RuntimeError):
    def __init__(self, msg: str, trace: "ForgeTrace | None" = None):
        super().__init__(msg)
        self.trace = trace


@dataclass
class ForgeOptions:
    d: int
    k: int
    target_state: np.ndarray
    mask: CoefficientMask
    c_bisect_tol: float = 1e-3
    cut_violation_tol: float = 1e-6
    max_outer_iters: int = 200
    keep_cuts: bool = True
    cuts_per_iter: int = 4
    real: bool | None = None  # None: real operator iff the target is real
    feas_tol: float = 1e-8
    seesaw_restarts: int = 20
    seesaw_cycles: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.c_bisect_tol <= 0:
            raise ValueError("c_bisect_tol must be positive")
        if self.mask.d != self.d:
            raise ValueError("mask dimension does not match d")
        if not 1 <= self.k < self.d:
            # Schmidt number never exceeds d, so k = d admits no witness
            raise ValueError(f"need 1 <= k < d, got k={self.k}, d={self.d}")
        t = np.asarray(self.target_state)
        n = self.d * self.d
        if t.shape not in ((n,), (n, n)):
            raise ValueError(f"target state has shape {t.shape}, expected ({n},) or ({n}, {n})")


@dataclass
class ForgeRecord:
    C_min: float
    C_max: float
    C: float
    cut_states: list
    sdp_status: str
    margin: float
    candidate: np.ndarray | None

    def to_dict(self, with_operator: bool = True) -> dict:
        out = {
            "C_min": self.C_min, "C_max": self.C_max, "C": self.C,
            "sdp_status": self.sdp_status, "margin": self.margin,
            "cut_states": [_cplx_list(s) for s in self.cut_states],
        }
        if with_operator and self.candidate is not None:
            out["candidate"] = _cplx_list(self.candidate)
        return out


def _cplx_list(a):
    a = np.asarray(a)
    return {"re": np.real(a).tolist(), "im": np.imag(a).tolist()}


@dataclass
class ForgeTrace:
    records: list[ForgeRecord] = field(default_factory=list)

    def to_dict(self, with_operators: bool = True) -> dict:
        return {"records": [r.to_dict(with_operators) for r in self.records]}

    def tail(self, n: int = 3) -> list[dict]:
        return [r.to_dict(False) for r in self.records[-n:]]


@dataclass
class ForgeResult:
    candidate: WitnessCandidate
    shifted_witness: np.ndarray | None  # None when only C = -1 was reachable
    trace: ForgeTrace
    cuts: list
    certified: bool = False


class _Parametrization:
    """Real coordinates for Hermitian operators supported on a mask."""

    def __init__(self, mask: CoefficientMask, real: bool):
        d = mask.d
        n = d * d
        pos = sorted({(min(r, c), max(r, c)) for r, c in mask.matrix_positions()})
        mats = []
        labels = []
        for r, c in pos:
            E = np.zeros((n, n), dtype=float if real else complex)
            if r == c:
                E[r, r] = 1.0
                mats.append(E)
                labels.append((r, c, "re"))
                continue
            E[r, c] = E[c, r] = 1.0
            mats.append(E)
            labels.append((r, c, "re"))
            if not real:
                F = np.zeros((n, n), dtype=complex)
                F[r, c], F[c, r] = 1j, -1j
                mats.append(F)
                labels.append((r, c, "im"))
        self.basis = np.array(mats)
        self.labels = labels
        self.real = real
        self.n = n

    def __len__(self):
        return len(self.basis)

    def operator(self, x) -> np.ndarray:
        return np.tensordot(np.asarray(x, dtype=float), self.basis, axes=1)


def _target_range(target, d):
    t = np.asarray(target)
    if t.ndim == 1:
        psi = t / np.linalg.norm(t)
        return psi[:, None]
    rho = as_density(t, d)
    w, V = np.linalg.eigh(rho)
    return V[:, w > 1e-10 * w[-1]]


class _InnerSDP:
    """The SDP of one inner-loop iteration, rebuilt as cuts are added."""

    def __init__(self, opts: ForgeOptions):
        d = opts.d
        t = np.asarray(opts.target_state)
        real = opts.real if opts.real is not None else bool(np.all(np.imag(t) == 0))
        self.par = _Parametrization(opts.mask, real)
        dtype = float if real else complex
        R = _target_range(t, d)
        n = d * d
        # W r = -r for every r in range(target): one real equation per re/im part
        img = np.einsum("mij,jr->mir", self.par.basis, R)  # (m, n, rank)
        rows = [np.real(img).reshape(len(self.par), -1).T]
        rhs = [np.real(-R).ravel()]
        if not real or np.iscomplexobj(R) and np.any(np.imag(R)):
            rows.append(np.imag(img).reshape(len(self.par), -1).T)
            rhs.append(np.imag(-R).ravel())
        self.eq = np.vstack(rows)
        self.eq_rhs = np.concatenate(rhs)
        # orthonormal complement of the target range
        Q, _ = np.linalg.qr(np.hstack([R, np.eye(n)]))
        V = Q[:, R.shape[1]:]
        if real:
            V = np.real(V)
        self.V = V.astype(dtype)
        self.dtype = dtype
        self.n = n

    def problem(self, C: float, cuts: list) -> sdp.LMIProblem:
        B = self.par.basis
        m = len(self.par)
        VB = np.einsum("ai,mij,jb->mab", self.V.conj().T, B, self.V)
        blocks = [
            sdp.LMIBlock(np.eye(self.n, dtype=self.dtype), -B, "psd", "upper"),
            sdp.LMIBlock(np.eye(self.V.shape[1], dtype=self.dtype), VB, "psd", "lower"),
        ]
        if cuts:
            P = np.array(cuts)
            F = np.real(np.einsum("ci,mij,cj->mc", P.conj(), B, P)).reshape(m, len(cuts))
            blocks.append(sdp.LMIBlock(np.full(len(cuts), -C), F, "nonneg", "cuts"))
        return sdp.LMIProblem(m, tuple(blocks), None, self.eq, self.eq_rhs, "feasibility")


def _distinct(states, limit, overlap=0.99):
    kept = []
    for s in states:
        if all(abs(np.vdot(s, t)) < overlap for t in kept):
            kept.append(s)
        if len(kept) == limit:
            break
    return kept


def inner_loop(C: float, cuts: list, opts: ForgeOptions, trace: ForgeTrace | None = None,
               C_min: float = -1.0, C_max: float = 1.0, _sdp: _InnerSDP | None = None):
    """Run the SDP / see-saw alternation at fixed ``C``.

    ``cuts`` is extended in place.  Returns ``(W, margin)`` when no violating
    state is found any more, or ``None`` when the SDP becomes infeasible.
    A marginal SDP counts as infeasible.
    """
    if not -1.0 <= C <= 1.0:
        raise ValueError(f"C must lie in [-1, 1], got {C}")
    trace = ForgeTrace() if trace is None else trace
    inner = _sdp or _InnerSDP(opts)
    rng = np.random.default_rng(opts.seed)
    if C <= -1.0:
        # every cut holds automatically since -1 <= W; keeping them would only
        # remove the interior of the feasible set
        res = sdp.phase1_feasible(inner.problem(C, []), feas_tol=opts.feas_tol)
        W = inner.par.operator(res.x) if res.status == "feasible" else None
        trace.records.append(ForgeRecord(C_min, C_max, C, [], res.status, res.margin, W))
        return None if W is None else (W, res.margin)
    for _ in range(opts.max_outer_iters):
        res = sdp.phase1_feasible(inner.problem(C, cuts), feas_tol=opts.feas_tol)
        if res.status != "feasible":
            trace.records.append(ForgeRecord(C_min, C_max, C, [], res.status, res.margin, None))
            return None
        W = inner.par.operator(res.x)
        init = np.array(cuts[-opts.cuts_per_iter:]) if cuts else None
        ss = min_overlap_rank_k(W, opts.k, restarts=opts.seesaw_restarts,
                                max_cycles=opts.seesaw_cycles, seed=rng, init_states=init)
        order = np.argsort(ss.values, kind="stable")
        violating = [ss.states[i] for i in order if ss.values[i] < C - opts.cut_violation_tol]
        new = _distinct(violating, opts.cuts_per_iter)
        for s in new:
            if schmidt_rank(s) > opts.k:
                raise ForgeError("see-saw returned a state above the Schmidt-rank bound", trace)
        cuts.extend(new)
        trace.records.append(ForgeRecord(C_min, C_max, C, new, "feasible", res.margin, W))
        if not new:
            return W, res.margin
    raise ForgeError(f"inner loop did not converge in {opts.max_outer_iters} iterations at C={C}",
                     trace)


def forge_witness(opts: ForgeOptions) -> ForgeResult:
    """Bisect the threshold ``C`` on ``[-1, 1]`` around the inner loop.

    The returned candidate is the last converged operator, with threshold
    ``C_min``.  It is not certified: see-saw only finds local minima.
    """
    d = opts.d
    inner = _InnerSDP(opts)
    if sdp._eliminate_equalities(inner.problem(-1.0, [])) is None:
        raise ForgeError("the target state cannot be a -1 eigenvector of any operator on this mask")
    trace = ForgeTrace()
    cuts: list = []
    C_min, C_max = -1.0, 1.0
    best = None
    while C_max - C_min > opts.c_bisect_tol:
        C = 0.5 * (C_min + C_max)
        level_cuts = cuts if opts.keep_cuts else []
        out = inner_loop(C, level_cuts, opts, trace, C_min, C_max, inner)
        if out is None:
            C_max = C
        else:
            C_min, best = C, out[0]
        if opts.keep_cuts:
            cuts = level_cuts
        else:
            cuts = cuts + level_cuts
    if best is None:
        out = inner_loop(-1.0, cuts if opts.keep_cuts else [], opts, trace, C_min, C_max, inner)
        if out is None:
            raise ForgeError("no feasible operator even at C = -1", trace)
        best = out[0]
    # exact zeros outside the mask and exact Hermiticity
    best = as_hermitian(np.where(opts.mask.support_matrix(), best, 0))
    cand = WitnessCandidate(d, opts.k, best, opts.mask, float(C_min))
    shifted = shift_to_witness(cand) if C_min > -1.0 else None
    return ForgeResult(cand, shifted, trace, cuts)
