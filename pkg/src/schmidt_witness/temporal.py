"""Simulated pulse-gate measurements on temporal-mode qudit pairs.

A setting ``(m, n, p, q, c_A, c_B, phi_A, phi_B)`` returns a fixed linear
functional of the density-matrix elements ``C_ijkl = <ij|rho|kl>``.  Plans
list the settings needed to evaluate a witness supported on the diagonal
elements ``C_iiii`` and the real parts of ``C_iijj``.
"""

from __future__ import annotations

import csv
import io
import logging
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .linalg import as_density, as_hermitian, local_dim

log = logging.getLogger(__name__)

HALF = 1.0 / np.sqrt(2.0)
HARDWARE_AMPLITUDES = (0.0, HALF, 1.0)
HARDWARE_PHASES = (0.0, np.pi / 2)
_warned: set = set()
# (indices, phases, sign) of the four settings giving 2 Re C_iijj
_RE_RECIPE = (
    ("jiswap", (0.0, 0.0), 1.0),
    ("jiswap", (np.pi, np.pi), 1.0),
    ("ij", (np.pi / 2, np.pi / 2), -1.0),
    ("ij", (3 * np.pi / 2, 3 * np.pi / 2), -1.0),
)
_IM_RECIPE = (
    ("jiswap", (np.pi / 2, 0.0), -1.0),
    ("jiswap", (3 * np.pi / 2, np.pi), -1.0),
    ("ij", (np.pi, np.pi / 2), 1.0),
    ("ij", (0.0, 3 * np.pi / 2), 1.0),
)


@dataclass(frozen=True)
class MeasurementSetting:
    m: int
    n: int
    p: int
    q: int
    c_A: float
    c_B: float
    phi_A: float = 0.0
    phi_B: float = 0.0

    def __post_init__(self):
        for name in ("m", "n", "p", "q"):
            if getattr(self, name) < 0:
                raise ValueError(f"mode index {name} must be nonnegative")
        for name in ("c_A", "c_B"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        # phases are stored reduced to [0, 2 pi)
        object.__setattr__(self, "phi_A", float(np.mod(self.phi_A, 2 * np.pi)))
        object.__setattr__(self, "phi_B", float(np.mod(self.phi_B, 2 * np.pi)))

    @property
    def s_A(self) -> float:
        return float(np.sqrt(1.0 - self.c_A ** 2))

    @property
    def s_B(self) -> float:
        return float(np.sqrt(1.0 - self.c_B ** 2))

    def check_range(self, d: int) -> None:
        if max(self.m, self.n, self.p, self.q) >= d:
            raise ValueError(f"setting {self} has a mode index outside [0, {d})")

    def in_hardware_set(self) -> bool:
        amp = all(np.isclose(c, HARDWARE_AMPLITUDES).any() for c in (self.c_A, self.c_B))
        phase = all(np.isclose(f, HARDWARE_PHASES).any() for f in (self.phi_A, self.phi_B))
        return bool(amp and phase)

    def key(self) -> tuple:
        return (self.m, self.n, self.p, self.q, round(self.c_A, 12), round(self.c_B, 12),
                round(self.phi_A, 12), round(self.phi_B, 12))


def simulate_A(rho, s: MeasurementSetting) -> float:
    """Noiseless value of the pulse-gate functional for setting ``s``."""
    rho = np.asarray(rho)
    d = local_dim(rho.shape[0])
    s.check_range(d)

    def C(i, j, k, l):
        return rho[i * d + j, k * d + l]

    m, n, p, q = s.m, s.n, s.p, s.q
    cA, cB, sA, sB = s.c_A, s.c_B, s.s_A, s.s_B
    eA, eB = np.exp(1j * s.phi_A), np.exp(1j * s.phi_B)
    val = (cA ** 2 * cB ** 2 * C(m, p, m, p) + sA ** 2 * sB ** 2 * C(n, q, n, q)
           + cA ** 2 * sB ** 2 * C(m, q, m, q) + sA ** 2 * cB ** 2 * C(n, p, n, p))
    cross = (eA * cA * sA * (cB ** 2 * C(m, p, n, p) + sB ** 2 * C(m, q, n, q))
             + eB * cB * sB * (cA ** 2 * C(m, p, m, q) + sA ** 2 * C(n, p, n, q))
             + cA * sA * cB * sB * (eA * eB * C(m, p, n, q) + eA / eB * C(m, q, n, p)))
    return float(np.real(val) + 2.0 * np.real(cross))


def _recipe_settings(i, j, recipe):
    out = []
    for kind, (fa, fb), sign in recipe:
        idx = (i, j, j, i) if kind == "jiswap" else (i, j, i, j)
        out.append((MeasurementSetting(*idx, HALF, HALF, fa, fb), sign))
    return out


def diagonal_setting(i: int, j: int) -> MeasurementSetting:
    """``c_A = c_B = 1`` reads ``C_ijij`` directly."""
    return MeasurementSetting(i, i, j, j, 1.0, 1.0)


def reconstruct_Ciijj(rho, i: int, j: int) -> complex:
    """``<ii|rho|jj>`` from eight simulated settings (four per real/imaginary part)."""
    if i == j:
        raise ValueError("i == j: read C_iiii with diagonal_setting(i, i)")
    re = sum(sign * simulate_A(rho, st) for st, sign in _recipe_settings(i, j, _RE_RECIPE))
    im = sum(sign * simulate_A(rho, st) for st, sign in _recipe_settings(i, j, _IM_RECIPE))
    return complex(0.5 * re, 0.5 * im)


@dataclass
class MeasurementPlan:
    """Ordered settings, each tagged with the element it feeds.

    Tags are ``"diag:i,j"`` (``C_ijij``) or ``"re:i,j"`` (``Re C_iijj``, with
    the sign of the setting in the four-term sum stored in ``signs``).
    """

    d: int
    kind: str
    settings: list[MeasurementSetting]
    purposes: list[str]
    signs: list[float] = field(default_factory=list)

    def __post_init__(self):
        if len(self.settings) != len(self.purposes):
            raise ValueError("every setting needs a purpose tag")
        if not self.signs:
            self.signs = [1.0] * len(self.settings)
        for s in self.settings:
            s.check_range(self.d)
        off = [s for s in self.settings if not s.in_hardware_set()]
        if off and self.kind not in _warned:
            _warned.add(self.kind)
            log.warning("%d of %d settings use amplitudes or phases outside the quoted hardware set",
                        len(off), len(self.settings))

    @property
    def count(self) -> int:
        """Settings as listed, one per term of every reconstruction formula."""
        return len(self.settings)

    @property
    def distinct_count(self) -> int:
        """Settings counted once even when shared between reconstructions."""
        return len({s.key() for s in self.settings})

    def covered(self) -> tuple[set, set]:
        """``(diagonal (i, j) pairs, real-part (i, j) pairs)`` with ``i < j`` for the latter."""
        diag, re = set(), set()
        for tag in self.purposes:
            kind, idx = tag.split(":")
            i, j = (int(v) for v in idx.split(","))
            (diag if kind == "diag" else re).add((i, j))
        return diag, re

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["m", "n", "p", "q", "cA", "cB", "phiA", "phiB", "purpose"])
        for s, tag in zip(self.settings, self.purposes):
            w.writerow([s.m, s.n, s.p, s.q, repr(float(s.c_A)), repr(float(s.c_B)),
                        repr(float(s.phi_A)), repr(float(s.phi_B)), tag])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def _build(d, kind, diag_pairs, re_pairs):
    settings, purposes, signs = [], [], []
    for i, j in diag_pairs:
        settings.append(diagonal_setting(i, j))
        purposes.append(f"diag:{i},{j}")
        signs.append(1.0)
    for i, j in re_pairs:
        for st, sign in _recipe_settings(i, j, _RE_RECIPE):
            settings.append(st)
            purposes.append(f"re:{i},{j}")
            signs.append(sign)
    return MeasurementPlan(d, kind, settings, purposes, signs)


def plan_standard(d: int) -> MeasurementPlan:
    """Settings for the fidelity with ``|phi+>``: ``2d^2 - d`` of them."""
    if d < 2:
        raise ValueError("need d >= 2")
    plan = _build(d, "standard", [(i, i) for i in range(d)],
                  [(i, j) for i in range(d) for j in range(i + 1, d)])
    assert plan.count == 2 * d * d - d
    return plan


def plan_forged(d: int) -> MeasurementPlan:
    """Settings for the linear-mask witness: ``5d - 4`` of them (``d >= 4``)."""
    if d == 3:
        raise ValueError("d = 3: the linear-mask operator also has |0j><0j| and |j0><j0| "
                         "diagonal terms, so the 5d - 4 plan does not cover it")
    if d < 4:
        raise ValueError("need d >= 4")
    plan = _build(d, "forged", [(i, i) for i in range(d)], [(0, i) for i in range(1, d)])
    assert plan.count == 5 * d - 4
    return plan


def plan_count_formula(d: int, kind: str) -> int:
    return 2 * d * d - d if kind == "standard" else 5 * d - 4


def evaluate_from_measurements(rho, W, plan: MeasurementPlan) -> float:
    """``Tr(W rho)`` computed only from simulated settings of ``plan``.

    ``W`` may carry an identity component outside the covered diagonal: if all
    uncovered diagonal entries share one value ``c``, they contribute ``c``
    times the unmeasured population, and ``Tr(rho) = 1`` turns that into
    ``c`` minus the measured populations.
    """
    rho = as_density(rho)
    W = as_hermitian(W)
    d = plan.d
    if W.shape != (d * d, d * d) or rho.shape != W.shape:
        raise ValueError("dimension mismatch between operator, state and plan")
    diag_cov, re_cov = plan.covered()

    missing = []
    n = d * d
    uncovered_diag = [r for r in range(n) if (r // d, r % d) not in diag_cov]
    c = W[uncovered_diag[0], uncovered_diag[0]].real if uncovered_diag else 0.0
    for r in uncovered_diag:
        if abs(W[r, r] - c) > 1e-12:
            missing.append((r // d, r % d, r // d, r % d))
    rows, cols = np.nonzero(np.abs(W) > 0)
    for r, cc in zip(rows, cols):
        if r >= cc:
            continue
        i, j, k, l = r // d, r % d, cc // d, cc % d
        if not (i == j and k == l and (i, k) in re_cov):
            missing.append((i, j, k, l))
        elif abs(W[r, cc].imag) > 0:
            # only real parts are measured
            missing.append((i, j, k, l))
    if missing:
        raise ValueError(f"operator support not covered by the {plan.kind} plan: "
                         f"{sorted(set(missing))}")

    diag_val: dict[tuple, float] = {}
    re_val: dict[tuple, float] = defaultdict(float)
    for s, tag, sign in zip(plan.settings, plan.purposes, plan.signs):
        kind, idx = tag.split(":")
        key = tuple(int(v) for v in idx.split(","))
        a = simulate_A(rho, s)
        if kind == "diag":
            diag_val[key] = a
        else:
            re_val[key] += 0.5 * sign * a

    total = c
    for (i, j), pop in diag_val.items():
        total += (W[i * d + j, i * d + j].real - c) * pop
    for (i, k), re in re_val.items():
        total += 2.0 * W[i * d + i, k * d + k].real * re
    return float(total)
