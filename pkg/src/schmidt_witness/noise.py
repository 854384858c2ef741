"""White-noise robustness of witness operators."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .linalg import as_hermitian, expectation, phi_plus, projector
from .witnesses import build_Wtilde, ck_threshold, standard_witness


def noisy_state(d: int, epsilon: float) -> np.ndarray:
    """``(1 - eps) |phi+><phi+| + eps 1/d^2``."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")
    n = d * d
    return (1.0 - epsilon) * projector(phi_plus(d)).real + epsilon * np.eye(n) / n


def _value(W, d, eps):
    return expectation(W, noisy_state(d, eps))


@dataclass(frozen=True)
class CriticalEpsilon:
    epsilon: float
    bracketed: bool  # False: no sign change on [0, 1], epsilon is 0 or 1


def critical_epsilon(W, detection_threshold: float, d: int) -> CriticalEpsilon:
    """Noise level at which ``Tr(W rho(eps))`` reaches ``detection_threshold``.

    The value is affine in ``eps``, so the root follows from the two endpoint
    values.  Without a sign change the result is clamped to 0 (no detection
    even without noise) or 1 (detection at every noise level).
    """
    W = as_hermitian(W)
    v0 = _value(W, d, 0.0) - detection_threshold
    v1 = _value(W, d, 1.0) - detection_threshold
    if v0 < 0 <= v1 and v1 > v0:
        return CriticalEpsilon(float(-v0 / (v1 - v0)), True)
    if v0 >= 0:
        return CriticalEpsilon(0.0, False)
    return CriticalEpsilon(1.0, False)


def epsilon_standard(d: int, k: int) -> float:
    """Closed form for ``1 - (d/k)|phi+><phi+|`` at threshold 0."""
    return d * (d - k) / (d * d - 1)


def epsilon_wtilde(d: int, abs_threshold: float) -> float:
    """Closed form for the linear-mask operator at threshold ``-abs_threshold``.

    Uses ``Tr(W rho(0)) = -1`` and ``Tr(W rho(1)) = -(d-2)^2/d^3`` (for ``d >= 4``).
    """
    return (1.0 - abs_threshold) / (1.0 - (d - 2) ** 2 / d ** 3)


@dataclass(frozen=True)
class NoiseCurvePoint:
    epsilon: float
    witness_value: float
    detects: bool


def sweep(W, detection_threshold: float, d: int, grid: int = 101) -> list[NoiseCurvePoint]:
    """Witness values on an even ``eps`` grid over ``[0, 1]``."""
    W = as_hermitian(W)
    # affine in eps: evaluate the endpoints once and check the midpoint
    v0, vh, v1 = (_value(W, d, e) for e in (0.0, 0.5, 1.0))
    if abs(vh - 0.5 * (v0 + v1)) > 1e-12 * max(1.0, abs(v0), abs(v1)):
        raise ArithmeticError("witness value is not affine in the noise level")
    eps = np.linspace(0.0, 1.0, grid)
    vals = (1.0 - eps) * v0 + eps * v1
    return [NoiseCurvePoint(float(e), float(v), bool(v < detection_threshold))
            for e, v in zip(eps, vals)]


def wtilde_thresholds(d: int, mode: str = "proven") -> dict[int, float]:
    """Detection thresholds ``-|C|_k^R`` (``proven``) or ``-|C|_k`` (``conjectured``) for ``k < d``."""
    if mode == "proven":
        from .certify import proven_threshold

        return {k: -proven_threshold(d, k)[0] for k in range(1, d)}
    if mode == "conjectured":
        return {k: -ck_threshold(d, k) for k in range(1, d)}
    raise ValueError(f"unknown threshold mode {mode!r}")


CSV_COLUMNS = ["d", "k", "epsilon", "value_standard", "value_wtilde", "detect_standard",
               "detect_wtilde", "threshold_mode"]


def noise_table(d: int, grid: int = 101, modes=("proven", "conjectured")) -> list[dict]:
    """Rows for every ``k < d`` and grid point, comparing the two witnesses."""
    Wt = build_Wtilde(d)
    rows = []
    for mode in modes:
        thr = wtilde_thresholds(d, mode)
        for k in range(1, d):
            std = sweep(standard_witness(d, k), 0.0, d, grid)
            wt = sweep(Wt, thr[k], d, grid)
            for a, b in zip(std, wt):
                rows.append({
                    "d": d, "k": k, "epsilon": a.epsilon,
                    "value_standard": a.witness_value, "value_wtilde": b.witness_value,
                    "detect_standard": int(a.detects), "detect_wtilde": int(b.detects),
                    "threshold_mode": mode,
                })
    return rows


def rows_to_csv(rows: list[dict], path=None) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({key: (repr(float(v)) if isinstance(v, float) else v) for key, v in r.items()})
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def critical_table(d: int, mode: str = "proven") -> list[dict]:
    """``eps*`` per ``k`` for both witnesses."""
    thr = wtilde_thresholds(d, mode)
    Wt = build_Wtilde(d)
    out = []
    for k in range(1, d):
        out.append({
            "d": d, "k": k,
            "eps_standard": critical_epsilon(standard_witness(d, k), 0.0, d).epsilon,
            "eps_wtilde": critical_epsilon(Wt, thr[k], d).epsilon,
            "threshold_mode": mode,
        })
    return out
