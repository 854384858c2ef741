"""Command-line front end.

Exit codes: 0 success (or a proved certificate), 2 when a certificate is only
conjectured, 1 on any error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

ENV_OUTPUT_DIR = "SCHMIDT_WITNESS_OUTPUT_DIR"
EXIT_OK, EXIT_ERROR, EXIT_CONJECTURED = 0, 1, 2

log = logging.getLogger("schmidt_witness")


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    # usage errors must not collide with the "conjectured" exit code
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def _out_path(name: str | None, default: str | None):
    """Resolve an output path; ``None`` means stdout."""
    if name is None and default is None:
        return None
    base = os.environ.get(ENV_OUTPUT_DIR)
    p = Path(name if name is not None else default)
    if base and not p.is_absolute():
        p = Path(base) / p
        p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _emit(text: str, path):
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)
        log.info("wrote %s", path)


def _resolve_witness(spec: str):
    from .witness_io import builtin_wtilde_path, load_witness

    if spec.startswith("wtilde:"):
        return load_witness(builtin_wtilde_path(int(spec.split(":", 1)[1])))
    return load_witness(spec)


def _target(name: str, d: int) -> np.ndarray:
    from .linalg import phi_plus

    if name == "phi-plus":
        return phi_plus(d)
    arr = np.load(name)
    return arr


def _mask(name: str, d: int):
    from .witnesses import CoefficientMask, linear_mask

    if name == "linear":
        return linear_mask(d)
    if name == "full":
        return CoefficientMask.full(d)
    raise ConfigError(f"unknown mask {name!r} (expected linear or full)")


def _status_code(status: str) -> int:
    return EXIT_OK if status == "proved" else EXIT_CONJECTURED


# -- commands ------------------------------------------------------------------

def cmd_forge(args) -> int:
    from .certify import certify
    from .forge import ForgeError, ForgeOptions, forge_witness
    from .witness_io import WitnessFile, save_witness

    opts = ForgeOptions(
        d=args.d, k=args.k, target_state=_target(args.target, args.d), mask=_mask(args.mask, args.d),
        c_bisect_tol=args.c_bisect_tol, cut_violation_tol=args.cut_violation_tol,
        max_outer_iters=args.max_outer_iters, keep_cuts=not args.no_keep_cuts,
        seesaw_restarts=args.restarts, seed=args.seed,
    )
    try:
        res = forge_witness(opts)
    except ForgeError as exc:
        tail = json.dumps(exc.trace.tail() if exc.trace else [], indent=1)
        sys.stderr.write(f"error: {exc}\nlast trace records:\n{tail}\n")
        return EXIT_ERROR
    cand = res.candidate
    report = certify(cand.operator, args.k, conjectured=cand.threshold_C,
                     seesaw_opts={"restarts": args.restarts, "seed": args.seed})
    out = _out_path(args.out, f"witness_d{args.d}_k{args.k}.json")
    save_witness(WitnessFile(cand.operator, args.d, args.k, cand.threshold_C, report.to_dict()), out)
    if args.trace:
        _emit(json.dumps(res.trace.to_dict(), indent=1) + "\n", _out_path(args.trace, None))
    print(f"threshold_C = {cand.threshold_C:.6f}  proven bound = {report.proven_bound:.6f}  "
          f"method = {report.method}  status = {report.status}  -> {out}")
    return _status_code(report.status)


def threshold_rows(ds, k_max=None) -> list[dict]:
    from .certify import proven_threshold
    from .witnesses import ck_threshold

    rows = []
    for d in ds:
        for k in range(1, (k_max or d) + 1):
            if k > d:
                break
            ckR, method = proven_threshold(d, k)
            rows.append({"d": d, "k": k, "C_k": ck_threshold(d, k), "C_k_R": ckR, "method": method})
    return rows


def cmd_thresholds(args) -> int:
    rows = threshold_rows(args.d, args.k_max)
    if args.format == "json":
        text = json.dumps(rows, indent=1) + "\n"
    else:
        lines = ["d,k,C_k,C_k_R,method"]
        lines += [f"{r['d']},{r['k']},{r['C_k']:.{args.digits}f},{r['C_k_R']:.{args.digits}f},"
                  f"{r['method']}" for r in rows]
        text = "\n".join(lines) + "\n"
    _emit(text, _out_path(args.out, None))
    return EXIT_OK


def cmd_certify(args) -> int:
    from .certify import certify

    wf = _resolve_witness(args.witness)
    k = args.k if args.k is not None else wf.k
    if k is None:
        raise ConfigError("no k given and the witness file has none")
    conj = args.conjectured
    if conj is None and wf.threshold_C is not None and wf.k == k:
        conj = wf.threshold_C
    report = certify(wf.operator, k, conjectured=conj, sdp_max_d=args.sdp_max_d,
                     seesaw_opts={"restarts": args.restarts, "seed": args.seed})
    _emit(json.dumps(report.to_dict(), indent=1) + "\n", _out_path(args.out, None))
    return _status_code(report.status)


def cmd_noise(args) -> int:
    from .noise import critical_table, noise_table, rows_to_csv

    modes = ("proven", "conjectured") if args.mode == "both" else (args.mode,)
    if args.critical:
        rows = [r for m in modes for d in args.d for r in critical_table(d, m)]
        cols = ["d", "k", "eps_standard", "eps_wtilde", "threshold_mode"]
        text = ",".join(cols) + "\n" + "".join(
            ",".join(repr(r[c]) if isinstance(r[c], float) else str(r[c]) for c in cols) + "\n"
            for r in rows)
    else:
        rows = [r for d in args.d for r in noise_table(d, args.grid, modes)]
        text = rows_to_csv(rows)
    _emit(text, _out_path(args.out, None))
    return EXIT_OK


def cmd_plan(args) -> int:
    from .temporal import plan_forged, plan_standard

    plan = plan_standard(args.d) if args.type == "standard" else plan_forged(args.d)
    _emit(plan.to_csv(), _out_path(args.out, None))
    return EXIT_OK


def cmd_seesaw(args) -> int:
    from .seesaw import min_overlap_rank_k

    wf = _resolve_witness(args.witness)
    k = args.k if args.k is not None else wf.k
    if k is None:
        raise ConfigError("no k given and the witness file has none")
    res = min_overlap_rank_k(wf.operator, k, restarts=args.restarts, max_cycles=args.max_cycles,
                             seed=args.seed)
    out = {
        "d": wf.d, "k": k, "best_value": res.best_value, "cycles_used": res.cycles_used,
        "restarts": res.restarts, "converged": res.converged,
        "best_state": {"re": res.best_state.real.tolist(), "im": res.best_state.imag.tolist()},
    }
    _emit(json.dumps(out, indent=1) + "\n", _out_path(args.out, None))
    return EXIT_OK


def cmd_export_wtilde(args) -> int:
    from .witness_io import save_witness, wtilde_file

    for d in args.d:
        p = _out_path(str(Path(args.out_dir) / f"wtilde_d{d}.json"), None)
        p.parent.mkdir(parents=True, exist_ok=True)
        save_witness(wtilde_file(d), p)
        print(p)
    return EXIT_OK


# -- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="schmidt-witness",
                 description="Schmidt-number witnesses from restricted measurements")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(func=func)
        p.add_argument("--config", help="JSON file with option values (unknown keys are rejected)")
        return p

    p = add("forge", cmd_forge, "construct a witness candidate and certify it")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--mask", default="linear", choices=["linear", "full"])
    p.add_argument("--target", default="phi-plus", help="phi-plus or a .npy state/density file")
    p.add_argument("--c-bisect-tol", type=float, default=1e-3)
    p.add_argument("--cut-violation-tol", type=float, default=1e-6)
    p.add_argument("--max-outer-iters", type=int, default=200)
    p.add_argument("--no-keep-cuts", action="store_true", help="rerun each bisection level from scratch")
    p.add_argument("--restarts", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.add_argument("--trace", help="write the iteration trace JSON here")

    p = add("thresholds", cmd_thresholds, "table of conjectured and proven thresholds")
    p.add_argument("--d", type=int, nargs="+", default=[4, 7, 11])
    p.add_argument("--k-max", type=int)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--digits", type=int, default=6)
    p.add_argument("--out")

    p = add("certify", cmd_certify, "prove a lower bound for a witness file")
    p.add_argument("witness", help="witness JSON file, or wtilde:D for a shipped operator")
    p.add_argument("--k", type=int)
    p.add_argument("--conjectured", type=float)
    p.add_argument("--sdp-max-d", type=int, default=5)
    p.add_argument("--restarts", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")

    p = add("noise", cmd_noise, "white-noise robustness curves (CSV)")
    p.add_argument("--d", type=int, nargs="+", default=[4])
    p.add_argument("--grid", type=int, default=101)
    p.add_argument("--mode", choices=["proven", "conjectured", "both"], default="proven")
    p.add_argument("--critical", action="store_true", help="emit critical noise levels instead")
    p.add_argument("--out")

    p = add("plan", cmd_plan, "measurement plan (CSV)")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--type", choices=["standard", "forged"], default="forged")
    p.add_argument("--out")

    p = add("seesaw", cmd_seesaw, "see-saw minimum over Schmidt-rank-k states")
    p.add_argument("witness", help="witness JSON file, or wtilde:D for a shipped operator")
    p.add_argument("--k", type=int)
    p.add_argument("--restarts", type=int, default=50)
    p.add_argument("--max-cycles", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")

    p = add("export-wtilde", cmd_export_wtilde, "write the linear-mask operators as JSON")
    p.add_argument("--d", type=int, nargs="+", default=list(range(3, 12)))
    p.add_argument("--out-dir", default=".")
    return ap


def _config_path(argv):
    for pos, a in enumerate(argv):
        if a == "--config" and pos + 1 < len(argv):
            return argv[pos + 1]
        if a.startswith("--config="):
            return a.split("=", 1)[1]
    return None


def _apply_config(parser, argv):
    """Parse ``argv`` with defaults taken from ``--config``; unknown keys are an error."""
    path = _config_path(argv)
    commands = parser._subparsers._group_actions[0].choices
    command = next((a for a in argv if a in commands), None)
    if path and command:
        try:
            cfg = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a JSON object")
        sub = commands[command]
        dests = {a.dest: a for a in sub._actions if a.dest not in ("help", "config", "func")}
        cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
        unknown = sorted(set(cfg) - set(dests))
        if unknown:
            raise ConfigError(f"unknown config keys for {command}: {unknown}")
        for key in cfg:
            dests[key].required = False
        sub.set_defaults(**cfg)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _apply_config(parser, argv)
    except ConfigError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_ERROR
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except Exception as exc:  # the exit code is the contract, not the traceback
        log.debug("command failed", exc_info=True)
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
