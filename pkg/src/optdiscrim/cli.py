"""Command-line front end: ``optdiscrim <subcommand> <file> [options]``.

Exit status: 0 on success, 1 when an input or a verification fails,
2 when an iterative solver does not converge.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import classes, discrimination as disc, fileformat, scenarios, symmetry
from .discrimination import Measurement
from .errors import NoConvergence, OptDiscrimError, ParseError, ValidationError
from .models import random_measurement

log = logging.getLogger("optdiscrim")

EXIT_OK, EXIT_INVALID, EXIT_NOCONV = 0, 1, 2
SOLVERS = ("auto", "lp", "fixedpoint", "bruteforce", "covariant")
LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


def _setup_logging() -> None:
    level = os.environ.get("OPTDISCRIM_LOG", "error").lower()
    logging.basicConfig(level=LOG_LEVELS.get(level, logging.ERROR), format="%(levelname)s %(name)s: %(message)s")
    if level not in LOG_LEVELS:
        log.error("ignoring OPTDISCRIM_LOG=%s; expected one of %s", level, ", ".join(LOG_LEVELS))


def _options(args, inst) -> dict:
    file_opts = inst.options if inst is not None else {}
    pick = lambda flag, key, default: flag if flag is not None else file_opts.get(key, default)  # noqa: E731
    return {
        "method": pick(getattr(args, "solver", None), "method", "auto"),
        "tolerance": float(pick(args.tolerance, "tolerance", 1e-10)),
        "max_iter": int(pick(args.max_iter, "max_iter", 10_000)),
        "trials": int(pick(args.trials, "trials", 100)),
        "seed": int(pick(args.seed, "seed", 0)),
    }


def _solve_report(rep: disc.SolveReport) -> dict:
    out = {
        "method": rep.method,
        "value": rep.value,
        "iterations": rep.iterations,
        "covariant": rep.covariant,
        "converged": rep.converged,
        "effects": fileformat.to_list(rep.measurement.effects),
    }
    if rep.dual_bound is not None:
        out["dual_bound"] = rep.dual_bound
        out["gap"] = rep.gap
    if rep.notes:
        out["notes"] = dict(rep.notes)
    return out


def _base_measurement(inst, opts) -> Measurement:
    if inst.measurement is not None:
        return inst.measurement
    rng = np.random.default_rng(opts["seed"])
    log.info("no measurement in the file; drawing a random one with seed %d", opts["seed"])
    return Measurement(inst.system, random_measurement(inst.preparation.model, inst.preparation.M, rng))


# ---------------------------------------------------------------------------
# Subcommands; each returns (exit status, report dict)


def cmd_solve(args, inst):
    opts = _options(args, inst)
    rep = disc.solve(inst.preparation, opts["method"], opts["tolerance"], opts["max_iter"], setup=inst.symmetry)
    out = _solve_report(rep)
    out["recomputed_value"] = disc.success_probability(rep.measurement, inst.preparation)
    if inst.symmetry is not None:
        out["covariance_residual"] = symmetry.covariance_residual(rep.measurement, inst.symmetry)
    return EXIT_OK, out


def cmd_symmetrize(args, inst):
    opts = _options(args, inst)
    if inst.symmetry is None:
        raise ValidationError("symmetrize needs a symmetry section", "symmetry present")
    e = _base_measurement(inst, opts)
    es = symmetry.symmetrize(e, inst.symmetry)
    rho = inst.preparation
    out = {
        "covariant_preparation": symmetry.is_covariant_preparation(rho, inst.symmetry),
        "value_before": disc.success_probability(e, rho),
        "value": disc.success_probability(es, rho),
        "covariance_residual_before": symmetry.covariance_residual(e, inst.symmetry),
        "covariance_residual": symmetry.covariance_residual(es, inst.symmetry),
        "is_measurement": es.is_valid(),
        "effects": fileformat.to_list(es.effects),
    }
    ok = out["is_measurement"] and out["covariance_residual"] <= symmetry.COV_TOL
    if out["covariant_preparation"]:
        ok = ok and abs(out["value"] - out["value_before"]) <= 1e-12
    return (EXIT_OK if ok else EXIT_INVALID), out


def cmd_verify(args, inst):
    opts = _options(args, inst)
    if inst.symmetry is None:
        raise ValidationError("verify-theorem needs a symmetry section", "symmetry present")
    rep = symmetry.verify_symmetry_theorem(inst.preparation, inst.symmetry, trials=opts["trials"], seed=opts["seed"])
    out = {
        "trials": rep.trials,
        "counterexamples": list(rep.counterexamples),
        "max_ps_deviation": rep.max_ps_deviation,
        "max_covariance_residual": rep.max_covariance_residual,
        "optimum_all": rep.optimum_all,
        "optimum_covariant": rep.optimum_covariant,
        "passed": rep.passed,
    }
    return (EXIT_OK if rep.passed else EXIT_INVALID), out


def _witness_doc(w: classes.PTWitnessReport) -> dict:
    return {
        "outcome": w.outcome,
        "pairing": w.pairing,
        "perturbation": w.perturbation,
        "violation": w.violation,
        "determinism_residual": w.determinism_residual,
        "product_pairing_min": w.product_pairing_min,
        "positivity_min": w.positivity_min,
        "exact": w.exact,
        "fbar": fileformat.to_list(w.fbar.matrix),
    }


def cmd_pt_witness(args, inst):
    if inst.measurement is None:
        raise ValidationError("pt-witness needs a measurement section", "measurement present")
    A, B = fileformat.parties(inst.system)
    try:
        w = classes.pt_witness(inst.measurement, A, B, seed=_options(args, inst)["seed"])
    except classes.NotFound as exc:
        return EXIT_OK, {"found": False, "reason": str(exc)}
    out = {"found": True, **_witness_doc(w)}
    out["transformed_is_measurement"] = classes.check_pt(inst.measurement, w.fbar, B)
    return EXIT_OK, out


def cmd_classes_check(args, inst):
    opts = _options(args, inst)
    tag, data = inst.class_tag, inst.class_data
    out: dict = {"class": tag}
    if tag == "all":
        out["valid"] = inst.measurement is None or inst.measurement.is_valid()
        return (EXIT_OK if out["valid"] else EXIT_INVALID), out
    A, B = fileformat.parties(inst.system)
    e = inst.measurement
    ok = True
    if data is not None:
        problems = data.problems()
        out["problems"] = problems
        ok = not problems
        if isinstance(data, classes.SequentialMeasurement):
            lm = data.to_locc()
            out["locc_reconstruction_error"] = float(np.max(np.abs(lm.measurement().effects - e.effects)))
        if isinstance(data, (classes.SequentialMeasurement, classes.LoccMeasurement)):
            data = (
                classes.seq_to_separable(data)
                if isinstance(data, classes.SequentialMeasurement)
                else classes.locc_to_separable(data)
            )
        out["separable_terms"] = data.term_count
        err = float(np.max(np.abs(data.effects() - e.effects)))
        out["separable_reconstruction_error"] = err
        ok = ok and err <= 1e-12
    rng = np.random.default_rng(opts["seed"])
    worst = np.inf
    for _ in range(opts["trials"]):
        f = classes.random_positive_map(A, rng)
        worst = min(worst, classes.pt_residual(e, f, B)[0])
    out["pt_sampled_maps"] = opts["trials"]
    out["pt_min_residual"] = float(worst)
    try:
        w = classes.pt_witness(e, A, B, seed=opts["seed"])
        out["pt_witness"] = {k: v for k, v in _witness_doc(w).items() if k != "fbar"}
        out["pt"] = False
    except classes.NotFound:
        out["pt"] = True
    ok = ok and worst >= -1e-10 and out["pt"]
    out["valid"] = ok
    return (EXIT_OK if ok else EXIT_INVALID), out


# ---------------------------------------------------------------------------
# Rendering


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot serialize {type(x).__name__}")


def _table(out: dict) -> str:
    lines = []
    width = max((len(k) for k in out), default=0)
    for k, v in out.items():
        if isinstance(v, list) and v and isinstance(v[0], list):
            v = f"<{len(v)} rows>"
        elif isinstance(v, float):
            v = f"{v:.12g}"
        elif isinstance(v, dict):
            v = ", ".join(f"{a}={b:.6g}" if isinstance(b, float) else f"{a}={b}" for a, b in v.items())
        lines.append(f"{k.ljust(width)}  {v}")
    return "\n".join(lines) + "\n"


def _write(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--solver", choices=SOLVERS, default=None)
    common.add_argument("--tolerance", type=float, default=None)
    common.add_argument("--max-iter", type=int, default=None, dest="max_iter")
    common.add_argument("--trials", type=int, default=None)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--report", choices=("json", "table"), default="json")
    common.add_argument("--out", default=None, help="write the report (or generated instance) to this path")

    p = argparse.ArgumentParser(prog="optdiscrim", description="Minimum-error state discrimination toolkit.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, hlp in (
        ("solve", "find an optimal measurement"),
        ("symmetrize", "group-average a measurement"),
        ("verify-theorem", "check symmetrization on random measurements and compare optima"),
        ("pt-witness", "look for a partial-transpose violation"),
    ):
        sp = sub.add_parser(name, parents=[common], help=hlp)
        sp.add_argument("file")
    cl = sub.add_parser("classes", help="measurement class tools")
    clsub = cl.add_subparsers(dest="action", required=True)
    ck = clsub.add_parser("check", parents=[common], help="validate a class certificate and its conversions")
    ck.add_argument("file")
    gen = sub.add_parser("gen", parents=[common], help="write a canonical instance file")
    gen.add_argument("scenario")
    gen.add_argument("params", nargs="*", type=int)
    return p


HANDLERS = {
    "solve": cmd_solve,
    "symmetrize": cmd_symmetrize,
    "verify-theorem": cmd_verify,
    "pt-witness": cmd_pt_witness,
    "classes": cmd_classes_check,
}


def run(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    if args.command == "gen":
        try:
            inst = scenarios.generate_scenario(args.scenario, *args.params)
        except OptDiscrimError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INVALID
        _write(fileformat.emit(inst), args.out)
        return EXIT_OK

    t0 = time.perf_counter()
    try:
        inst = fileformat.parse_instance(args.file)
        status, out = HANDLERS[args.command](args, inst)
    except (ParseError, ValidationError) as exc:
        print(f"invalid instance {args.file}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NoConvergence as exc:
        print(f"solver did not converge: {exc}", file=sys.stderr)
        return EXIT_NOCONV
    except OptDiscrimError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    report = {
        "command": args.command if args.command != "classes" else "classes check",
        "instance": inst.name,
        "instance_hash": fileformat.instance_hash(inst),
        **out,
        "seconds": time.perf_counter() - t0,
    }
    text = json.dumps(report, indent=1, default=_jsonable) + "\n" if args.report == "json" else _table(report)
    _write(text, args.out)
    return status


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
