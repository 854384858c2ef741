"""JSON storage of witness operators.

Layout::

    {
      "format": "schmidt-witness/1",
      "d": 4, "k": 3,
      "threshold_C": -0.866,
      "coefficients": [{"i": 0, "j": 0, "k": 0, "l": 0, "re": 0.5, "im": 0.0,
                        "re_frac": [1, 2]}, ...],
      "certificate": {...} | null
    }

Each coefficient is the matrix element ``<ij|W|kl>``; entries not listed are
zero.  ``re_frac`` is present when the real part is an exact rational with a
small denominator and then takes precedence over ``re``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from pathlib import Path

import numpy as np

from .linalg import as_hermitian, local_dim
from .witnesses import wtilde_fractions

FORMAT = "schmidt-witness/1"
MAX_DENOMINATOR = 1000


class WitnessSchemaError(ValueError):
    def __init__(self, path: str, msg: str):
        super().__init__(f"{path}: {msg}")
        self.path = path


@dataclass
class WitnessFile:
    operator: np.ndarray
    d: int
    k: int | None = None
    threshold_C: float | None = None
    certificate: dict | None = None
    fractions: dict | None = None  # (i, j, k, l) -> Fraction


def _exact_fraction(x: float) -> Fraction | None:
    f = Fraction(x).limit_denominator(MAX_DENOMINATOR)
    return f if float(f) == x else None


def to_dict(wf: WitnessFile) -> dict:
    W = np.asarray(wf.operator)
    d = local_dim(W.shape[0])
    coeffs = []
    for r, c in zip(*np.nonzero(W)):
        i, j, k, l = int(r // d), int(r % d), int(c // d), int(c % d)
        re, im = float(np.real(W[r, c])), float(np.imag(W[r, c]))
        entry = {"i": i, "j": j, "k": k, "l": l, "re": re, "im": im}
        frac = (wf.fractions or {}).get((i, j, k, l))
        if frac is None and im == 0.0:
            frac = _exact_fraction(re)
        if frac is not None:
            entry["re_frac"] = [frac.numerator, frac.denominator]
        coeffs.append(entry)
    return {
        "format": FORMAT,
        "d": d,
        "k": wf.k,
        "threshold_C": wf.threshold_C,
        "coefficients": coeffs,
        "certificate": wf.certificate,
    }


def save_witness(wf: WitnessFile, path) -> None:
    Path(path).write_text(json.dumps(to_dict(wf), indent=1) + "\n")


def _need(obj, key, types, path):
    if not isinstance(obj, dict):
        raise WitnessSchemaError(path, "expected an object")
    if key not in obj:
        raise WitnessSchemaError(f"{path}.{key}" if path else key, "missing")
    val = obj[key]
    if isinstance(val, bool) or not isinstance(val, types):
        raise WitnessSchemaError(f"{path}.{key}" if path else key,
                                 f"expected {'/'.join(t.__name__ for t in types)}, "
                                 f"got {type(val).__name__}")
    return val


def from_dict(data: dict) -> WitnessFile:
    if not isinstance(data, dict):
        raise WitnessSchemaError("$", "expected an object")
    fmt = data.get("format", FORMAT)
    if fmt != FORMAT:
        raise WitnessSchemaError("format", f"unsupported format {fmt!r}")
    d = _need(data, "d", (int,), "")
    if d < 2:
        raise WitnessSchemaError("d", "must be at least 2")
    k = data.get("k")
    if k is not None and (isinstance(k, bool) or not isinstance(k, int) or not 1 <= k <= d):
        raise WitnessSchemaError("k", f"expected an integer in [1, {d}] or null")
    C = data.get("threshold_C")
    if C is not None and (isinstance(C, bool) or not isinstance(C, (int, float))):
        raise WitnessSchemaError("threshold_C", "expected a number or null")
    coeffs = _need(data, "coefficients", (list,), "")
    n = d * d
    W = np.zeros((n, n), dtype=complex)
    fracs = {}
    for pos, e in enumerate(coeffs):
        p = f"coefficients[{pos}]"
        idx = []
        for name in ("i", "j", "k", "l"):
            v = _need(e, name, (int,), p)
            if not 0 <= v < d:
                raise WitnessSchemaError(f"{p}.{name}", f"index {v} outside [0, {d})")
            idx.append(v)
        re = float(_need(e, "re", (int, float), p))
        im = float(e.get("im", 0.0)) if isinstance(e.get("im", 0.0), (int, float)) else None
        if im is None:
            raise WitnessSchemaError(f"{p}.im", "expected a number")
        if "re_frac" in e:
            fr = e["re_frac"]
            if (not isinstance(fr, list) or len(fr) != 2
                    or not all(isinstance(v, int) and not isinstance(v, bool) for v in fr)
                    or fr[1] == 0):
                raise WitnessSchemaError(f"{p}.re_frac", "expected [numerator, denominator]")
            frac = Fraction(fr[0], fr[1])
            if abs(float(frac) - re) > 1e-12:
                raise WitnessSchemaError(f"{p}.re_frac", f"{frac} disagrees with re={re}")
            re = float(frac)
            fracs[tuple(idx)] = frac
        i, j, kk, l = idx
        W[i * d + j, kk * d + l] = re + 1j * im
    try:
        W = as_hermitian(W, atol=1e-12)
    except ValueError as exc:
        raise WitnessSchemaError("coefficients", str(exc)) from None
    if not np.any(np.imag(W)):
        W = W.real
    cert = data.get("certificate")
    if cert is not None and not isinstance(cert, dict):
        raise WitnessSchemaError("certificate", "expected an object or null")
    return WitnessFile(W, d, k, None if C is None else float(C), cert, fracs or None)


def load_witness(path) -> WitnessFile:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise WitnessSchemaError("$", f"invalid JSON: {exc}") from None
    return from_dict(data)


def wtilde_file(d: int) -> WitnessFile:
    """The linear-mask operator with exact rational coefficients."""
    fr = wtilde_fractions(d)
    n = d * d
    W = np.zeros((n, n))
    for (i, j, k, l), v in fr.items():
        W[i * d + j, k * d + l] = float(v)
    return WitnessFile(W, d, fractions=fr)


def builtin_wtilde_path(d: int):
    """Path of the shipped JSON file for the linear-mask operator."""
    ref = resources.files(__package__) / "data" / f"wtilde_d{d}.json"
    if not ref.is_file():
        raise FileNotFoundError(f"no shipped operator for d={d}")
    return ref
