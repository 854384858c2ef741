"""Small dense linear-matrix-inequality solver.

Problems are stated in LMI form over real decision variables ``x``::

    maximize    c . x
    subject to  F0_b + sum_i x_i F_ib  >= 0     for every block b
                G x = h

Blocks are either Hermitian PSD blocks or a nonnegative-orthant block
(componentwise ``>= 0``; used for scalar cut constraints).  Equalities are
removed by null-space elimination, after which the problem is the dual of a
standard-form SDP and is solved with an infeasible primal-dual path-following
method (HKM search direction, Mehrotra predictor-corrector).  Complex
Hermitian blocks are handled directly in complex arithmetic.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

log = logging.getLogger(__name__)

FEAS_TOL = 1e-8
GAP_TOL = 1e-7
MAX_ITERS = 200


class SolverError(RuntimeError):
    """Newton system could not be solved; carries conditioning diagnostics."""

    def __init__(self, msg: str, diagnostics: dict | None = None):
        super().__init__(msg)
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True)
class LMIBlock:
    """``F0 + sum_i x_i F[i]``.

    For ``kind="psd"`` ``F0`` has shape ``(n, n)`` and ``F`` shape
    ``(num_vars, n, n)``; for ``kind="nonneg"`` the shapes are ``(n,)`` and
    ``(num_vars, n)``.
    """

    F0: np.ndarray
    F: np.ndarray
    kind: str = "psd"
    name: str = ""

    @property
    def size(self) -> int:
        return self.F0.shape[0]

    def evaluate(self, x) -> np.ndarray:
        return self.F0 + np.tensordot(np.asarray(x, dtype=float), self.F, axes=1)


@dataclass(frozen=True)
class LMIProblem:
    num_vars: int
    blocks: tuple[LMIBlock, ...]
    objective: np.ndarray | None = None
    eq_matrix: np.ndarray | None = None
    eq_rhs: np.ndarray | None = None
    sense: str = "maximize"

    def __post_init__(self):
        if self.sense not in ("maximize", "feasibility"):
            raise ValueError(f"unknown sense {self.sense!r}")
        for blk in self.blocks:
            if blk.kind not in ("psd", "nonneg"):
                raise ValueError(f"unknown block kind {blk.kind!r}")
            if blk.F.shape[0] != self.num_vars:
                raise ValueError(f"block {blk.name!r} has {blk.F.shape[0]} coefficient "
                                 f"matrices, expected {self.num_vars}")
            if blk.kind == "psd":
                n = blk.F0.shape[0]
                if blk.F0.shape != (n, n) or blk.F.shape[1:] != (n, n):
                    raise ValueError(f"block {blk.name!r} has inconsistent shapes")
                herm = max(np.max(np.abs(blk.F0 - blk.F0.conj().T), initial=0.0),
                           np.max(np.abs(blk.F - blk.F.conj().transpose(0, 2, 1)), initial=0.0))
                if herm > 1e-12 * max(1.0, np.max(np.abs(blk.F), initial=0.0)):
                    raise ValueError(f"block {blk.name!r} is not Hermitian")
            elif blk.F.shape[1:] != blk.F0.shape:
                raise ValueError(f"block {blk.name!r} has inconsistent shapes")

    @property
    def c(self) -> np.ndarray:
        if self.objective is None:
            return np.zeros(self.num_vars)
        return np.asarray(self.objective, dtype=float)

    def block_values(self, x) -> list[np.ndarray]:
        return [blk.evaluate(x) for blk in self.blocks]

    def min_eigenvalues(self, x) -> list[float]:
        out = []
        for blk, val in zip(self.blocks, self.block_values(x)):
            if blk.kind == "psd":
                out.append(float(np.linalg.eigvalsh(val)[0]) if val.size else np.inf)
            else:
                out.append(float(np.min(val)) if val.size else np.inf)
        return out


@dataclass
class LMISolution:
    x_star: np.ndarray
    objective_value: float
    dual_certificate: list[np.ndarray]
    duality_gap: float  # relative: |pobj - dobj| / (1 + |pobj| + |dobj|)
    status: str  # optimal | infeasible | max_iters | singular
    iterations: int = 0
    primal_infeasibility: float = 0.0
    dual_infeasibility: float = 0.0
    diagnostics: dict = field(default_factory=dict)


@dataclass
class PhaseOneResult:
    status: str  # feasible | infeasible | marginal
    x: np.ndarray | None
    margin: float
    solution: LMISolution | None = None


# -- cone blocks used inside the interior-point iteration ----------------------

class _PSD:
    def __init__(self, C, A):
        self.C = C
        self.A = A
        self.n = C.shape[0]
        self.m = A.shape[0]
        self.Aflat = A.reshape(self.m, -1)
        self.Aconj = self.Aflat.conj()

    def identity(self, scale):
        return scale * np.eye(self.n, dtype=self.C.dtype)

    def op(self, X):
        """``(<A_i, X>)_i``"""
        return np.real(self.Aconj @ X.ravel())

    def adj(self, y):
        return np.tensordot(y, self.A, axes=1)

    def inner(self, U, V):
        return float(np.real(np.vdot(U, V)))

    def nu(self):
        return self.n

    def inv(self, S):
        L = np.linalg.cholesky(S)
        Linv = scipy.linalg.solve_triangular(L, np.eye(self.n), lower=True)
        return Linv.conj().T @ Linv

    def schur(self, X, Sinv):
        G = X[None] @ self.A @ Sinv[None]
        return np.real(self.Aconj @ G.reshape(self.m, -1).T)

    def sym(self, U):
        return 0.5 * (U + U.conj().T)

    def mul(self, U, V):
        return U @ V

    def max_step(self, X, dX):
        try:
            L = np.linalg.cholesky(X)
        except np.linalg.LinAlgError:
            return 0.0
        T = scipy.linalg.solve_triangular(L, dX, lower=True)
        T = scipy.linalg.solve_triangular(L, T.conj().T, lower=True)
        lmin = np.linalg.eigvalsh(0.5 * (T + T.conj().T))[0]
        return np.inf if lmin >= 0 else -1.0 / lmin

    def norm(self, U):
        return float(np.linalg.norm(U))


class _Nonneg:
    def __init__(self, C, A):
        self.C = C
        self.A = A
        self.n = C.shape[0]
        self.m = A.shape[0]

    def identity(self, scale):
        return scale * np.ones(self.n)

    def op(self, X):
        return self.A @ X

    def adj(self, y):
        return y @ self.A

    def inner(self, U, V):
        return float(U @ V)

    def nu(self):
        return self.n

    def inv(self, S):
        if np.any(S <= 0):
            raise np.linalg.LinAlgError("nonpositive slack")
        return 1.0 / S

    def schur(self, X, Sinv):
        return (self.A * (X * Sinv)) @ self.A.T

    def sym(self, U):
        return U

    def mul(self, U, V):
        return U * V

    def max_step(self, X, dX):
        neg = dX < 0
        if not np.any(neg):
            return np.inf
        return float(np.min(-X[neg] / dX[neg]))

    def norm(self, U):
        return float(np.linalg.norm(U))


def _eliminate_equalities(problem: LMIProblem, tol: float = 1e-10):
    """Return ``(x0, N)`` with ``{x : Gx = h} = {x0 + N z}``, or ``None`` if inconsistent."""
    m = problem.num_vars
    if problem.eq_matrix is None or len(problem.eq_matrix) == 0:
        return np.zeros(m), np.eye(m)
    G = np.atleast_2d(np.asarray(problem.eq_matrix, dtype=float))
    h = np.asarray(problem.eq_rhs, dtype=float).ravel()
    U, s, Vh = np.linalg.svd(G, full_matrices=True)
    rank = int(np.sum(s > tol * max(1.0, s[0] if s.size else 0.0)))
    x0 = Vh[:rank].T @ ((U[:, :rank].T @ h) / s[:rank])
    resid = np.linalg.norm(G @ x0 - h)
    if resid > 1e-8 * max(1.0, np.linalg.norm(h)):
        return None
    return x0, Vh[rank:].T


def _reduced_cones(problem: LMIProblem, x0, N):
    cones = []
    for blk in problem.blocks:
        F0 = blk.F0 + np.tensordot(x0, blk.F, axes=1)
        Fz = np.tensordot(N.T, blk.F, axes=1)
        cls = _PSD if blk.kind == "psd" else _Nonneg
        if blk.kind == "psd":
            dtype = np.result_type(F0.dtype, Fz.dtype, np.float64)
            cones.append(cls(F0.astype(dtype), -Fz.astype(dtype)))
        else:
            cones.append(cls(F0.astype(float), -Fz.astype(float)))
    return cones


def solve(problem: LMIProblem, feas_tol: float = FEAS_TOL, gap_tol: float = GAP_TOL,
          max_iters: int = MAX_ITERS, check_infeasible: bool = True) -> LMISolution:
    """Solve an :class:`LMIProblem` to the requested tolerances.

    ``feas_tol`` bounds the relative primal and dual residuals and ``gap_tol``
    the relative duality gap.  When the iteration does not converge and
    ``check_infeasible`` is set, a phase-1 margin problem decides whether the
    LMI is infeasible.
    """
    red = _eliminate_equalities(problem)
    if red is None:
        return LMISolution(np.full(problem.num_vars, np.nan), -np.inf, [], np.inf,
                           "infeasible", diagnostics={"reason": "inconsistent equalities"})
    x0, N = red
    c = problem.c if problem.sense == "maximize" else np.zeros(problem.num_vars)
    b = N.T @ c
    const = float(c @ x0)
    if not problem.blocks:
        if np.linalg.norm(b) > 0:
            return LMISolution(x0, np.inf, [], np.inf, "unbounded")
        return LMISolution(x0, const, [], 0.0, "optimal")
    cones = _reduced_cones(problem, x0, N)
    sol = _ipm(cones, b, feas_tol, gap_tol, max_iters)
    z, Xs, status, info = sol
    x = x0 + N @ z
    info["num_reduced_vars"] = N.shape[1]
    if "pobj" in info:
        info["upper_bound"] = info["pobj"] + const
    out = LMISolution(
        x_star=x,
        objective_value=float(c @ x),
        dual_certificate=Xs,
        duality_gap=info.get("relgap", np.inf),
        status=status,
        iterations=info.get("iterations", 0),
        primal_infeasibility=info.get("pinf", np.inf),
        dual_infeasibility=info.get("dinf", np.inf),
        diagnostics=info,
    )
    if status != "optimal" and check_infeasible:
        ph1 = phase1_feasible(problem, feas_tol=feas_tol, max_iters=max_iters)
        out.diagnostics["phase1_margin"] = ph1.margin
        if ph1.status == "infeasible":
            out.status = "infeasible"
    return out


def _ipm(cones, b, feas_tol, gap_tol, max_iters):
    """Primal-dual path following on ``min <C,X> s.t. A(X)=b, X>=0`` and its dual
    ``max b.y s.t. A^T y + S = C, S>=0``.  Returns ``(y, X, status, info)``."""
    m = b.size
    nu = sum(k.nu() for k in cones)
    normC = max(k.norm(k.C) for k in cones)
    normA = max(np.max(np.abs(k.A)) if k.A.size else 0.0 for k in cones)
    normb = float(np.linalg.norm(b))
    xi = max(10.0, np.sqrt(nu), normC, normA * np.sqrt(nu))
    X = [k.identity(xi) for k in cones]
    S = [k.identity(xi) for k in cones]
    y = np.zeros(m)
    info: dict = {}
    best = None
    status = "max_iters"
    stall = 0
    it = 0
    for it in range(max_iters + 1):
        AX = sum(k.op(Xk) for k, Xk in zip(cones, X))
        rp = b - AX
        Rd = [k.C - Sk - k.adj(y) for k, Sk in zip(cones, S)]
        pobj = sum(k.inner(k.C, Xk) for k, Xk in zip(cones, X))
        dobj = float(b @ y)
        mu = sum(k.inner(Xk, Sk) for k, Xk, Sk in zip(cones, X, S)) / nu
        pinf = float(np.linalg.norm(rp)) / (1.0 + normb)
        dinf = max(k.norm(R) for k, R in zip(cones, Rd)) / (1.0 + normC)
        gap = abs(pobj - dobj)
        relgap = gap / (1.0 + abs(pobj) + abs(dobj))
        info.update(iterations=it, pinf=pinf, dinf=dinf, gap=gap, relgap=relgap,
                    pobj=pobj, dobj=dobj, mu=mu)
        score = max(pinf / feas_tol, dinf / feas_tol, relgap / gap_tol)
        if best is None or score < best[0]:
            best = (score, y.copy(), [Xk.copy() for Xk in X], dict(info))
        if pinf <= feas_tol and dinf <= feas_tol and relgap <= gap_tol:
            status = "optimal"
            break
        if it == max_iters:
            break
        try:
            Sinv = [k.inv(Sk) for k, Sk in zip(cones, S)]
        except np.linalg.LinAlgError:
            status = "singular"
            break
        M = sum(k.schur(Xk, Si) for k, Xk, Si in zip(cones, X, Sinv))
        M = 0.5 * (M + M.T)
        try:
            cho = scipy.linalg.cho_factor(M, lower=True)
            solveM = lambda r: scipy.linalg.cho_solve(cho, r)  # noqa: E731
        except np.linalg.LinAlgError:
            w, V = np.linalg.eigh(M)
            cond = w[-1] / w[0] if w[0] > 0 else np.inf
            info["schur_condition"] = float(cond)
            info["schur_min_eig"] = float(w[0])
            if not np.isfinite(w).all() or w[-1] <= 0:
                status = "singular"
                break
            wi = np.where(w > 1e-14 * w[-1], 1.0 / np.where(w > 0, w, 1.0), 0.0)
            solveM = lambda r: V @ (wi * (V.T @ r))  # noqa: E731

        def direction(sigma_mu, corr):
            # dX = sigma*mu*S^-1 - X - X dS S^-1 - corr S^-1,  dS = Rd - A^T dy
            base = []
            for k, Xk, Si, Rk, ck in zip(cones, X, Sinv, Rd, corr):
                t = sigma_mu * Si - Xk - k.mul(k.mul(Xk, Rk), Si)
                if ck is not None:
                    t = t - k.mul(ck, Si)
                base.append(t)
            rhs = rp - sum(k.op(k.sym(t)) for k, t in zip(cones, base))
            dy = solveM(rhs)
            dS = [Rk - k.adj(dy) for k, Rk in zip(cones, Rd)]
            dX = []
            for k, Xk, Si, dSk, ck in zip(cones, X, Sinv, dS, corr):
                t = sigma_mu * Si - Xk - k.mul(k.mul(Xk, dSk), Si)
                if ck is not None:
                    t = t - k.mul(ck, Si)
                dX.append(k.sym(t))
            return dX, dy, dS

        def steps(dX, dS):
            ap = min(k.max_step(Xk, d) for k, Xk, d in zip(cones, X, dX))
            ad = min(k.max_step(Sk, d) for k, Sk, d in zip(cones, S, dS))
            return ap, ad

        # predictor
        dXa, dya, dSa = direction(0.0, [None] * len(cones))
        ap, ad = steps(dXa, dSa)
        ap, ad = min(1.0, ap), min(1.0, ad)
        mu_aff = sum(k.inner(Xk + ap * dx, Sk + ad * ds)
                     for k, Xk, Sk, dx, ds in zip(cones, X, S, dXa, dSa)) / nu
        sigma = min(1.0, max(0.0, mu_aff / mu)) ** 3 if mu > 0 else 0.0
        # corrector
        corr = [k.mul(dx, ds) for k, dx, ds in zip(cones, dXa, dSa)]
        dX, dy, dS = direction(sigma * mu, corr)
        ap, ad = steps(dX, dS)
        gamma = 0.9 + 0.09 * min(1.0, 1.0 - sigma)
        ap = min(1.0, gamma * ap)
        ad = min(1.0, gamma * ad)
        if ap < 1e-10 and ad < 1e-10:
            stall += 1
            if stall >= 3:
                break
        else:
            stall = 0
        X = [Xk + ap * d for Xk, d in zip(X, dX)]
        y = y + ad * dy
        S = [Sk + ad * d for Sk, d in zip(S, dS)]
        # an infeasible side shows up as iterates running off to infinity
        big = max(max(k.norm(Xk) for k, Xk in zip(cones, X)), float(np.linalg.norm(y)))
        if not np.isfinite(big) or big > 1e14 * (1.0 + xi):
            info["diverged"] = True
            break
    if status != "optimal" and best is not None:
        _, y, X, binfo = best
        info = binfo
        if status == "max_iters" and it < max_iters:
            status = "max_iters"
    info["iterations"] = it
    return y, X, status, info


def phase1_feasible(problem: LMIProblem, feas_tol: float = FEAS_TOL,
                    margin_cap: float = 1.0, max_iters: int = MAX_ITERS) -> PhaseOneResult:
    """Find a strictly feasible point by maximizing the uniform margin ``t``.

    Solves ``max t`` subject to every block ``>= t I`` (and ``t <= margin_cap``
    to keep the problem bounded).  ``margin > feas_tol`` means strictly
    feasible, ``margin < -feas_tol`` infeasible, anything in between marginal.
    """
    red = _eliminate_equalities(problem)
    if red is None:
        return PhaseOneResult("infeasible", None, -np.inf)
    if not problem.blocks:
        return PhaseOneResult("feasible", red[0], np.inf)
    m = problem.num_vars
    blocks = []
    for blk in problem.blocks:
        if blk.kind == "psd":
            ident = -np.eye(blk.size, dtype=blk.F0.dtype)[None]
        else:
            ident = -np.ones((1, blk.size))
        blocks.append(LMIBlock(blk.F0, np.concatenate([blk.F, ident]), blk.kind, blk.name))
    cap_F = np.zeros((m + 1, 1))
    cap_F[m, 0] = -1.0
    blocks.append(LMIBlock(np.array([margin_cap]), cap_F, "nonneg", "margin_cap"))
    eqm = None
    if problem.eq_matrix is not None and len(problem.eq_matrix):
        G = np.atleast_2d(np.asarray(problem.eq_matrix, dtype=float))
        eqm = np.hstack([G, np.zeros((G.shape[0], 1))])
    obj = np.zeros(m + 1)
    obj[m] = 1.0
    aux = LMIProblem(m + 1, tuple(blocks), obj, eqm, problem.eq_rhs, "maximize")
    sol = solve(aux, feas_tol=feas_tol, gap_tol=max(feas_tol, 1e-9), max_iters=max_iters,
                check_infeasible=False)
    if not np.all(np.isfinite(sol.x_star)):
        return PhaseOneResult("infeasible", None, -np.inf, sol)
    x = sol.x_star[:m]
    achieved = min(problem.min_eigenvalues(x))
    if sol.status == "optimal":
        margin = float(sol.objective_value)
    else:
        margin = float(achieved)
    if achieved > feas_tol and margin > feas_tol:
        status = "feasible"
    elif sol.status == "optimal" and margin < -feas_tol:
        status = "infeasible"
    elif sol.status != "optimal" and sol.diagnostics.get("upper_bound", np.inf) < -feas_tol:
        status = "infeasible"
    else:
        status = "marginal"
    return PhaseOneResult(status, x, margin, sol)
