"""Lower bounds on ``min Tr(W rho)`` over Schmidt-number-``k`` states.

Every bound here is a bound over the outer approximation defined by
``(1 (x) R_{1/k})(rho) >= 0``, which contains all states of Schmidt number at
most ``k``.  Three routes are available: the full primal/dual SDP, and for the
linear-mask witness operator a two-parameter dual ansatz
``S = |x(a,b)><x(a,b)|`` with ``|x> = a|00> + b sum_{i>=1} |ii>`` whose
spectrum is known in closed form.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from . import sdp
from .linalg import InternalConsistencyError, as_hermitian, local_dim
from .witnesses import build_Wtilde, ck_threshold, is_wtilde, one_tensor_R

log = logging.getLogger(__name__)

SDP_MAX_D = 5
CERT_TOL = 1e-6
SDP_OPTS = {"feas_tol": 1e-9, "gap_tol": 1e-9, "max_iters": 100}

METHODS = ("full_sdp", "symmetric_closed_form", "quartic_root", "lagrange_k1", "min_eigenvalue")


def hermitian_basis(n: int, real: bool = False) -> np.ndarray:
    """Orthonormal basis (trace inner product) of Hermitian ``n x n`` matrices.

    With ``real=True`` only the real symmetric part is spanned.
    """
    m = n * (n + 1) // 2 if real else n * n
    out = np.zeros((m, n, n), dtype=float if real else complex)
    r = 0
    for a in range(n):
        out[r, a, a] = 1.0
        r += 1
    s = 1.0 / np.sqrt(2.0)
    for a in range(n):
        for b in range(a + 1, n):
            out[r, a, b] = out[r, b, a] = s
            r += 1
            if not real:
                out[r, a, b] = 1j * s
                out[r, b, a] = -1j * s
                r += 1
    return out


def _reduction_images(basis, k):
    return np.array([one_tensor_R(E, 1.0 / k) for E in basis])


def _use_real(W, real):
    # for real W the optimum of either SDP is attained at a real point, since
    # complex conjugation maps feasible points to feasible points
    if real is not None:
        return real
    return bool(np.isrealobj(W) or np.max(np.abs(np.imag(W))) == 0)


def primal_problem(W, k: int, real: bool | None = None) -> tuple[sdp.LMIProblem, np.ndarray]:
    """``max -Tr(W rho)`` over unit-trace ``rho >= 0`` with ``(1 (x) R_{1/k})(rho) >= 0``."""
    W = as_hermitian(W)
    n = W.shape[0]
    basis = hermitian_basis(n, _use_real(W, real))
    if basis.dtype == float:
        W = W.real
    blocks = (
        sdp.LMIBlock(np.zeros((n, n), basis.dtype), basis, "psd", "state"),
        sdp.LMIBlock(np.zeros((n, n), basis.dtype), _reduction_images(basis, k), "psd", "reduction"),
    )
    c = -np.real(np.einsum("ij,mji->m", W, basis))
    trace_row = np.real(np.einsum("mii->m", basis))[None]
    return sdp.LMIProblem(len(basis), blocks, c, trace_row, np.array([1.0])), basis


def dual_problem(W, k: int, real: bool | None = None) -> tuple[sdp.LMIProblem, np.ndarray]:
    """``max y`` over ``S >= 0`` with ``W - (1 (x) R_{1/k})(S) >= y 1``."""
    W = as_hermitian(W)
    n = W.shape[0]
    basis = hermitian_basis(n, _use_real(W, real))
    if basis.dtype == float:
        W = W.real
    m = len(basis)
    zero = np.zeros((1, n, n), basis.dtype)
    blocks = (
        sdp.LMIBlock(np.zeros((n, n), basis.dtype), np.concatenate([basis, zero]), "psd", "S"),
        sdp.LMIBlock(W, np.concatenate([-_reduction_images(basis, k), -np.eye(n)[None]]),
                     "psd", "bound"),
    )
    c = np.zeros(m + 1)
    c[m] = 1.0
    return sdp.LMIProblem(m + 1, blocks, c), basis


def _check(sol: sdp.LMISolution, what: str):
    if sol.status != "optimal":
        raise sdp.SolverError(f"{what} SDP ended with status {sol.status}", sol.diagnostics)


def primal_bound_sdp(W, k: int, real: bool | None = None, return_state: bool = False, **opts):
    """Minimum of ``Tr(W rho)`` over the reduction-map outer approximation."""
    problem, basis = primal_problem(W, k, real)
    sol = sdp.solve(problem, **{**SDP_OPTS, **opts})
    _check(sol, "primal")
    value = -sol.objective_value
    if return_state:
        return value, np.tensordot(sol.x_star, basis, axes=1)
    return value


def dual_bound_value(W, S, k: int) -> float:
    """Bound certified by a dual point: ``lambda_min(W - (1 (x) R_{1/k})(S))`` with ``S`` made PSD."""
    w, V = np.linalg.eigh(as_hermitian(S))
    S_psd = (V * np.clip(w, 0.0, None)) @ V.conj().T
    return float(np.linalg.eigvalsh(as_hermitian(W) - one_tensor_R(S_psd, 1.0 / k))[0])


def dual_bound_sdp(W, k: int, real: bool | None = None, **opts) -> tuple[float, np.ndarray]:
    """Optimal dual bound and the optimal ``S``.

    The returned value is re-evaluated from ``S`` (projected onto the PSD
    cone), so it is a valid lower bound regardless of solver tolerance.
    """
    problem, basis = dual_problem(W, k, real)
    sol = sdp.solve(problem, **{**SDP_OPTS, **opts})
    _check(sol, "dual")
    S = np.tensordot(sol.x_star[:-1], basis, axes=1)
    return dual_bound_value(W, S, k), S


# -- symmetric two-parameter ansatz --------------------------------------------

@dataclass(frozen=True)
class DualAnsatzPoint:
    a: float
    b: float

    def __post_init__(self):
        if not (np.isfinite(self.a) and np.isfinite(self.b)):
            raise ValueError("ansatz parameters must be finite")

    def vector(self, d: int) -> np.ndarray:
        x = np.zeros(d * d)
        x[0] = self.a
        x[np.arange(1, d) * (d + 1)] = self.b
        return x

    def operator(self, d: int) -> np.ndarray:
        x = self.vector(d)
        return np.outer(x, x)


@dataclass(frozen=True)
class ClosedFormSpectrum:
    """Distinct closed-form eigenvalues with multiplicities.

    ``labels`` name each entry (``lambda1`` ... ``lambda5``; for ``d = 3`` the
    extra diagonal terms split off ``lambda1`` and ``lambda2b``).
    """

    labels: tuple[str, ...]
    values: tuple[float, ...]
    multiplicities: tuple[int, ...]

    def __getitem__(self, label: str) -> float:
        return self.values[self.labels.index(label)]

    def multiset(self) -> np.ndarray:
        return np.sort(np.repeat(self.values, self.multiplicities))

    @property
    def minimum(self) -> float:
        return float(min(v for v, m in zip(self.values, self.multiplicities) if m > 0))


def _pq(d, k, a, b):
    p = d * ((1 - k) * a * a + (d - 1 - k) * b * b)
    q = d * k * (d * (k - d) * a * a * b * b + (d - 2) * (k - 1) * a * a
                 + (d - 2) * (d - 1 - k) * b * b + 4 * (d - 1) * a * b - d * k)
    return p, q


def _lambda45(d, k, a, b):
    p, q = _pq(d, k, a, b)
    disc = p * p - 4 * q
    if disc < 0:
        if disc < -1e-9 * max(1.0, p * p):
            raise InternalConsistencyError(f"negative discriminant {disc:.3g}")
        disc = 0.0
    root = np.sqrt(disc)
    return (p + root) / (2 * d * k), (p - root) / (2 * d * k)


def closed_form_eigenvalues(d: int, k: int, point: DualAnsatzPoint) -> ClosedFormSpectrum:
    """Spectrum of ``W - (1 (x) R_{1/k})(|x(a,b)><x(a,b)|)`` for the linear-mask operator ``W``.

    ``lambda1 = -a^2`` (states ``|0j>``), ``lambda2 = -b^2`` (``|ij>``, ``i >= 1``),
    ``lambda3 = -b^2 - (d-2)/d`` (the part of ``span{|ii>, i >= 1}``
    orthogonal to their sum), and ``lambda4,5`` from the remaining ``2 x 2``
    block.  For ``d = 3`` the diagonal ``|0j>``, ``|j0>`` entries of ``W`` add
    one to ``lambda1`` and to the ``|j0>`` part of ``lambda2``.
    """
    if d < 3 or k < 1:
        raise ValueError(f"need d >= 3 and k >= 1, got d={d}, k={k}")
    a, b = point.a, point.b
    c0 = (d - 2) / d
    l4, l5 = _lambda45(d, k, a, b)
    if d == 3:
        return ClosedFormSpectrum(
            ("lambda1", "lambda2", "lambda2b", "lambda3", "lambda4", "lambda5"),
            (1.0 - a * a, -b * b, 1.0 - b * b, -b * b - c0, l4, l5),
            (d - 1, (d - 1) * (d - 2), d - 1, d - 2, 1, 1),
        )
    return ClosedFormSpectrum(
        ("lambda1", "lambda2", "lambda3", "lambda4", "lambda5"),
        (-a * a, -b * b, -b * b - c0, l4, l5),
        (d - 1, (d - 1) ** 2, d - 2, 1, 1),
    )


def ansatz_operator(d: int, k: int, point: DualAnsatzPoint) -> np.ndarray:
    return build_Wtilde(d) - one_tensor_R(point.operator(d), 1.0 / k)


def symmetric_point(d: int, k: int) -> DualAnsatzPoint:
    c = ck_threshold(d, k)
    c0 = (d - 2) / d
    return DualAnsatzPoint(np.sqrt((c + c0) / (k - 1)), np.sqrt(c - c0))


def symmetric_bound(d: int, k: int) -> tuple[DualAnsatzPoint, float]:
    """Closed-form optimal ansatz point for ``k >= 3``, ``d >= 4``; the bound is ``-|C|_k``."""
    if k < 3:
        raise ValueError("the closed-form ansatz point needs k >= 3; use quartic_bound")
    if d < 4:
        raise ValueError("the closed-form ansatz point needs d >= 4")
    if k > d:
        raise ValueError(f"k={k} exceeds d={d}")
    point = symmetric_point(d, k)
    spec = closed_form_eigenvalues(d, k, point)
    l1, l3, l5 = spec["lambda1"], spec["lambda3"], spec["lambda5"]
    if abs(l3 - l5) > 1e-9:
        raise InternalConsistencyError(f"lambda3 != lambda5 at the optimum ({l3} vs {l5})")
    gap = (2 - d + (k - 2) * np.sqrt(d * d - 4 * d + 4 * k)) / (d * (k - 1))
    if abs((l1 - l3) - gap) > 1e-9 or gap < -1e-12:
        raise InternalConsistencyError("lambda1 - lambda3 disagrees with its closed form")
    if spec.minimum < l3 - 1e-12:
        raise InternalConsistencyError("lambda3 is not the smallest eigenvalue")
    return point, float(l3)


# -- k in {1, 2}: triple coincidence -------------------------------------------

@dataclass(frozen=True)
class QuarticBound:
    bound: float
    method: str  # quartic_root | full_sdp
    point: DualAnsatzPoint | None
    ansatz_bound: float | None
    sdp_bound: float | None = None
    polynomial_residual: float | None = None


def quartic_polynomial(d: int, k: int) -> np.poly1d:
    """Polynomial in ``u = b^2`` whose roots include the triple-coincidence point.

    On ``a^2 = u + (d-2)/d`` (``lambda1 = lambda3``, ``d >= 4``) the condition
    ``lambda3 = lambda5`` reads ``E(u) = -4dk(d-1) a b``; squaring removes the
    odd ``ab`` term and leaves ``E(u)^2 - 16 d^2 k^2 (d-1)^2 u (u + (d-2)/d)``.
    """
    c0 = (d - 2) / d
    u = np.poly1d([1.0, 0.0])
    a2 = u + c0
    lam = -(u + c0)
    p = d * ((1 - k) * a2 + (d - 1 - k) * u)
    E = (d * k) ** 2 * lam * lam - d * k * p * lam + d * k * (
        d * (k - d) * a2 * u + (d - 2) * (k - 1) * a2 + (d - 2) * (d - 1 - k) * u - d * k)
    return E * E - 16 * (d * k * (d - 1)) ** 2 * u * a2


def _coincidence_gap(d, k, u):
    c0 = (d - 2) / d
    shift = 1.0 if d == 3 else 0.0
    a = np.sqrt(u + c0 + shift)
    b = np.sqrt(u)
    _, l5 = _lambda45(d, k, a, b)
    return l5 - (-u - c0), DualAnsatzPoint(float(a), float(b))


def quartic_bound(d: int, k: int, cross_check: bool = True, sdp_max_d: int = SDP_MAX_D) -> QuarticBound:
    """Best ansatz bound for ``k in {1, 2}`` where ``lambda1 = lambda3 = lambda5``.

    The root in ``u = b^2`` is bracketed on ``[0, 1]`` and found by bisection
    of ``lambda5 - lambda3``.  For ``d <= sdp_max_d`` the full dual SDP is run
    as a cross-check; when it gives a strictly better bound (the rank-one
    ansatz is not always optimal) that bound is returned with
    ``method="full_sdp"``.
    """
    if k not in (1, 2):
        raise ValueError("quartic_bound handles k in {1, 2}")
    if d < 3:
        raise ValueError("need d >= 3")
    ansatz = point = residual = None
    try:
        lo, hi = 0.0, 1.0
        glo, _ = _coincidence_gap(d, k, lo)
        ghi, _ = _coincidence_gap(d, k, hi)
        if not glo < 0 < ghi:
            raise ArithmeticError(f"no sign change on [0, 1] ({glo}, {ghi})")
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            gm, _ = _coincidence_gap(d, k, mid)
            if gm < 0:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-16:
                break
        u = 0.5 * (lo + hi)
        _, point = _coincidence_gap(d, k, u)
        # every eigenvalue counts, not only the three that coincide
        ansatz = closed_form_eigenvalues(d, k, point).minimum
        if d >= 4:
            poly = quartic_polynomial(d, k)
            residual = float(abs(poly(u)) / max(1.0, np.max(np.abs(poly.coeffs))))
    except (ArithmeticError, InternalConsistencyError) as exc:
        log.warning("quartic root failed for d=%d, k=%d: %s", d, k, exc)

    sdp_value = None
    if (cross_check and d <= sdp_max_d) or ansatz is None:
        sdp_value, _ = dual_bound_sdp(build_Wtilde(d), k)
    if ansatz is not None and (sdp_value is None or sdp_value <= ansatz + 1e-7):
        return QuarticBound(ansatz, "quartic_root", point, ansatz, sdp_value, residual)
    return QuarticBound(sdp_value, "full_sdp", point, ansatz, sdp_value, residual)


def proven_threshold(d: int, k: int, sdp_max_d: int = SDP_MAX_D) -> tuple[float, str]:
    """``(|C|_k^R, method)`` for the linear-mask operator."""
    if k == d:
        if d >= 4:
            return -symmetric_bound(d, k)[1], "symmetric_closed_form"
        return -dual_bound_sdp(build_Wtilde(d), k)[0], "full_sdp"
    if k >= 3 and d >= 4:
        return -symmetric_bound(d, k)[1], "symmetric_closed_form"
    if k <= 2:
        qb = quartic_bound(d, k, sdp_max_d=sdp_max_d)
        return -qb.bound, qb.method
    return -dual_bound_sdp(build_Wtilde(d), k)[0], "full_sdp"


# -- certificates --------------------------------------------------------------

@dataclass
class CertificateReport:
    d: int
    k: int
    proven_bound: float
    conjectured_bound: float
    method: str
    status: str  # proved | conjectured
    gap: float
    notes: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.proven_bound > self.conjectured_bound + 1e-7:
            raise InternalConsistencyError(
                f"lower bound {self.proven_bound} exceeds upper bound {self.conjectured_bound}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "CertificateReport":
        return cls(**data)


def certify(W, k: int, conjectured: float | None = None, sdp_max_d: int = SDP_MAX_D,
            seesaw_opts: dict | None = None) -> CertificateReport:
    """Prove a lower bound on ``min Tr(W rho)`` over Schmidt number ``<= k``.

    ``conjectured`` is the threshold the witness is meant to use (an upper
    bound on that minimum, e.g. from see-saw); when omitted it is computed by
    see-saw.  The status is ``proved`` when the proven bound reaches the
    conjectured one within ``CERT_TOL``.
    """
    W = as_hermitian(W)
    d = local_dim(W.shape[0])
    if not 1 <= k <= d:
        raise ValueError(f"need 1 <= k <= d, got k={k}, d={d}")
    notes: list[str] = []
    wt = is_wtilde(W)
    if conjectured is None:
        if wt:
            conjectured = -ck_threshold(d, k)
        else:
            from .seesaw import min_overlap_rank_k

            conjectured = min_overlap_rank_k(W, k, **(seesaw_opts or {})).best_value
            notes.append("conjectured bound from see-saw")

    if wt and k >= 3 and d >= 4:
        proven = symmetric_bound(d, k)[1]
        method = "symmetric_closed_form"
    elif wt and k <= 2:
        qb = quartic_bound(d, k, sdp_max_d=sdp_max_d)
        proven, method = qb.bound, qb.method
        if qb.method == "full_sdp" and qb.ansatz_bound is not None:
            notes.append(f"rank-one ansatz gives {qb.ansatz_bound:.6f}; full SDP is tighter")
    elif d <= sdp_max_d:
        proven = dual_bound_sdp(W, k)[0]
        method = "full_sdp"
    else:
        proven = float(np.linalg.eigvalsh(W)[0])
        method = "min_eigenvalue"
        notes.append(f"d={d} exceeds the full-SDP limit {sdp_max_d}; used the S=0 dual point")

    if proven > conjectured + 1e-7:
        # the conjectured value is not a valid upper bound; the proof is what counts
        notes.append(f"conjectured value {conjectured:.9f} was below the proven bound")
        conjectured = proven
    gap = float(conjectured - proven)
    status = "proved" if gap <= CERT_TOL else "conjectured"
    if wt and k == 1 and d >= 4:
        method = "lagrange_k1"
        status = "proved"
        notes.append("threshold -|C|_1 rests on the analytic product-state (Lagrange) optimum, "
                     "not on an in-repo proof; proven_bound is the reduction-map bound")
    return CertificateReport(d, k, float(proven), float(conjectured), method, status, max(gap, 0.0),
                             notes)
