"""Command-line interface: evaluate formulas, run oracles, verify identities.

Commands read their query payload from a JSON file (--config) or an inline
JSON string (--json) and append one result record per run to --out (and to
stdout).  Records are serialized with sorted keys and 17-significant-digit
decimal floats so reruns are byte-for-byte comparable; the wall_ms field is
the only volatile entry.

Exit codes: 0 success, 1 verification failure, 2 validation error,
3 accuracy failure, 4 resource cap exceeded.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time

from . import __version__
from .core import (
    AccuracyError,
    BlockSignatureVector,
    ConfigurationError,
    ModelParams,
    ParticleConfig,
    ResourceLimitError,
    StrictSignature,
    ValidationError,
)
from . import quadrature
from .formulas import (
    CrossingQuery,
    GreenQuery,
    WallQuery,
    block_crossing,
    cumulative_crossing_bernoulli,
    cumulative_crossing_one_wall,
    cumulative_crossing_step,
    gamma_wall,
    green_evaluation,
    r_asep_transition,
    rainbow_total_crossing,
    tasep_block_crossing,
    two_tasep_crossing,
)
from .identities import run_identity_suite
from .oracle import (
    MonteCarloJob,
    SimulationSpec,
    gillespie_run,
    run_monte_carlo,
    sample_bernoulli_step,
)
from .vertex import stochastic_weights_check


def _format_value(v) -> str:
    if v is None:
        return "null"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return format(v, ".17g")
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, (list, tuple)):
        return "[" + ",".join(_format_value(x) for x in v) + "]"
    if isinstance(v, dict):
        items = sorted(v.items(), key=lambda kv: kv[0])
        return "{" + ",".join(f"{json.dumps(k)}:{_format_value(x)}" for k, x in items) + "}"
    raise ValidationError(f"cannot serialize value of type {type(v).__name__}")


def dumps_record(record: dict) -> str:
    """One record per line, stable key order, 17-significant-digit floats."""
    return _format_value(record)


def loads_record(line: str) -> dict:
    return json.loads(line)


def _emit(record: dict, out_path: str | None, csv_path: str | None) -> None:
    line = dumps_record(record)
    print(line)
    if out_path:
        with open(out_path, "a", encoding="utf-8") as fh:
            fh.write(line + "\n")
    if csv_path:
        import os

        write_header = not os.path.exists(csv_path) or os.path.getsize(csv_path) == 0
        with open(csv_path, "a", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            if write_header:
                writer.writerow(["command", "input", "value", "est_error", "method"])
            writer.writerow(
                [
                    record.get("command"),
                    _format_value(record.get("input")),
                    _format_value(record.get("value")),
                    _format_value(record.get("est_error")),
                    record.get("method"),
                ]
            )


def _record(command, payload, value, est_error, method, started, extra=None):
    rec = {
        "command": command,
        "input": payload,
        "value": value,
        "est_error": est_error,
        "method": method,
        "wall_ms": (time.perf_counter() - started) * 1000.0,
        "version": __version__,
    }
    if extra:
        rec.update(extra)
    return rec


def _blocks(payload, key, orientation):
    return BlockSignatureVector(
        tuple(StrictSignature(tuple(b)) for b in payload[key]), orientation
    )


def cmd_green(payload, args, started):
    kind = payload.get("kind", "two_species")
    tol = args.tol
    if kind == "two_species":
        ini = ParticleConfig.from_two_species(payload["mu"], payload.get("p0", ()))
        fin = ParticleConfig.from_two_species(payload["nu"], payload.get("p", ()))
        query = GreenQuery(ini, fin, float(payload["t"]),
                           method=payload.get("method", "auto"), tol=tol)
        value, err, method = green_evaluation(query)
        return _record("green", payload, value, err, method, started)
    if kind == "rainbow_asep":
        value = r_asep_transition(
            payload["mu"], payload["nu"], float(payload["q"]), float(payload["t"]),
            tol=tol,
        )
        return _record("green", payload, value, tol, "quadrature", started)
    raise ValidationError(f"unknown green payload kind {kind!r}")


def cmd_crossing(payload, args, started):
    kind = payload.get("kind", "blocks")
    tol = args.tol
    if kind == "two_species":
        value = two_tasep_crossing(
            payload["mu"], payload["nu"], int(payload["m"]), float(payload["t"]),
            tol=tol,
        )
        return _record("crossing", payload, value, tol, "quadrature", started)
    if kind == "rainbow":
        value = rainbow_total_crossing(
            payload["mu"], payload["nu"], float(payload["q"]), float(payload["t"]),
            tol=tol,
        )
        return _record("crossing", payload, value, tol, "quadrature", started)
    if kind in ("blocks", "tasep_blocks"):
        query = CrossingQuery(
            _blocks(payload, "mu_blocks", "initial"),
            _blocks(payload, "lambda_blocks", "final"),
            float(payload.get("q", 0.0)),
            float(payload["t"]),
        )
        if kind == "tasep_blocks":
            value = tasep_block_crossing(query, tol=tol)
        else:
            value = block_crossing(query, tol=tol)
        return _record("crossing", payload, value, tol, "quadrature", started)
    raise ValidationError(f"unknown crossing payload kind {kind!r}")


def cmd_wall(payload, args, started):
    form = payload.get("form", "bernoulli")
    tol = args.tol
    if form == "step":
        value = cumulative_crossing_step(
            payload["mu"], int(payload["m"]), int(payload["s1"]), int(payload["s2"]),
            float(payload["t"]), tol=tol,
        )
        return _record("wall", payload, value, tol, "quadrature", started)
    if form == "gamma":
        value = gamma_wall(int(payload["n"]), int(payload["s"]), float(payload["t"]))
        return _record("wall", payload, value, 0.0, "laurent", started)
    query = WallQuery(
        s1=int(payload["s1"]), s2=int(payload["s2"]), rho=float(payload["rho"]),
        n=int(payload["n"]), m=int(payload["m"]), t=float(payload["t"]),
    )
    if form == "bernoulli":
        variant = payload.get("variant", "inverted")
        value = cumulative_crossing_bernoulli(query, form=variant, tol=tol)
        method = "laurent" if variant == "inverted" else "quadrature"
        return _record("wall", payload, value, tol if variant == "direct" else 0.0,
                       method, started)
    if form == "one_wall":
        variant = payload.get("variant", "collapsed")
        value = cumulative_crossing_one_wall(query, form=variant, tol=tol)
        return _record("wall", payload, value, 0.0, "laurent", started)
    raise ValidationError(f"unknown wall payload form {form!r}")


def cmd_simulate(payload, args, started):
    task = payload.get("task", "run")
    seed = args.seed
    if task == "run":
        spec = SimulationSpec(
            initial=ParticleConfig(tuple(payload["positions"]), tuple(payload["species"])),
            params=ModelParams(q=float(payload.get("q", 0.0))),
            horizon=float(payload["t"]),
            seed=seed,
            samples=1,
        )
        final = gillespie_run(spec)
        return _record(
            "simulate", payload, None, 0.0, "gillespie", started,
            extra={"result": {"positions": list(final.positions),
                              "species": list(final.species)}},
        )
    if task == "bernoulli_sample":
        config = sample_bernoulli_step(
            float(payload["rho"]), int(payload["m"]), int(payload["n"]), seed
        )
        return _record(
            "simulate", payload, None, 0.0, "bernoulli", started,
            extra={"result": {"positions": list(config.positions),
                              "species": list(config.species)}},
        )
    samples = int(payload.get("samples", 100000))
    if args.budget is not None:
        samples = min(samples, args.budget)
    if task == "estimate":
        job = MonteCarloJob(
            q=float(payload.get("q", 0.0)),
            horizon=float(payload["t"]),
            samples=samples,
            seed=seed,
            initial=ParticleConfig(tuple(payload["positions"]), tuple(payload["species"])),
            event=("target", tuple(payload["target_positions"]),
                   tuple(payload["target_species"])),
        )
    elif task == "estimate_wall":
        job = MonteCarloJob(
            q=float(payload.get("q", 0.0)),
            horizon=float(payload["t"]),
            samples=samples,
            seed=seed,
            bernoulli=(float(payload["rho"]), int(payload["m"]), int(payload["n"])),
            event=("wall", int(payload["s1"]), int(payload["s2"])),
        )
    else:
        raise ValidationError(f"unknown simulate task {task!r}")
    phat, stderr, successes = run_monte_carlo(job, threads=args.threads)
    return _record(
        "simulate", payload, phat, stderr, "monte_carlo", started,
        extra={"successes": successes, "samples": samples},
    )


def cmd_verify(payload, args, started):
    samples = int(payload.get("samples", 100))
    suite = payload.get("suite", "all")
    if suite not in ("all", "identities", "vertex"):
        raise ValidationError(
            f"unknown suite {suite!r}: choose all, identities or vertex"
        )
    checks = []
    ok = True
    if suite in ("all", "identities"):
        for rep in run_identity_suite(seed=args.seed, samples=samples):
            checks.append(
                {"name": rep.name, "max_rel_err": rep.max_rel_err,
                 "threshold": rep.threshold, "passed": rep.passed}
            )
            ok = ok and rep.passed
    if suite in ("all", "vertex"):
        for (n, z, q, s) in ((1, 0.35, 2.2, 0.4), (2, 0.25, 1.8, 0.45)):
            rep_l, rep_m = stochastic_weights_check(n, z, q, s)
            for rep in (rep_l, rep_m):
                checks.append(
                    {"name": f"sum_to_unity_{rep.family}_n{n}",
                     "max_rel_err": rep.max_deviation,
                     "threshold": rep.tol, "passed": rep.sums_ok}
                )
                ok = ok and rep.sums_ok
        rep_l, rep_m = stochastic_weights_check(2, 0.1, 2.0, 0.3)
        pos_ok = rep_l.positive and rep_m.positive
        checks.append(
            {"name": "weight_positivity", "max_rel_err": 0.0 if pos_ok else 1.0,
             "threshold": 0.5, "passed": pos_ok}
        )
        ok = ok and pos_ok
    if payload.get("negative_control"):
        rep_l, _ = stochastic_weights_check(2, 0.35, 2.2, 0.4, perturb=1.01)
        control_failed = not rep_l.sums_ok
        checks.append(
            {"name": "perturbation_control_breaks_sums",
             "max_rel_err": rep_l.max_deviation, "threshold": 1e-12,
             "passed": control_failed}
        )
        ok = ok and control_failed
    for chk in checks:
        status = "pass" if chk["passed"] else "FAIL"
        print(f"[{status}] {chk['name']}: max_rel_err={chk['max_rel_err']:.3e}")
    record = _record(
        "verify", payload, 1.0 if ok else 0.0, 0.0, "suite", started,
        extra={"checks": checks, "all_passed": ok},
    )
    return record, ok


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="asepcross",
        description="Transition and total-crossing probabilities for "
                    "multi-species exclusion processes",
    )
    parser.add_argument("command",
                        choices=["green", "crossing", "wall", "simulate", "verify"])
    parser.add_argument("--config", help="path to a JSON payload file")
    parser.add_argument("--json", help="inline JSON payload")
    parser.add_argument("--seed", type=int, default=0, help="master RNG seed")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker processes for Monte Carlo sampling")
    parser.add_argument("--budget", type=int, default=None,
                        help="cap on quadrature nodes and Monte Carlo samples")
    parser.add_argument("--tol", type=float, default=1e-10,
                        help="quadrature convergence tolerance")
    parser.add_argument("--out", help="append the result record to this file")
    parser.add_argument("--csv", help="append a CSV row to this file")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config and args.json:
        parser.error("supply --config or --json, not both")
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    elif args.json:
        payload = json.loads(args.json)
    elif args.command == "verify":
        payload = {}
    else:
        parser.error("a payload is required: pass --config FILE or --json STRING")
    if args.budget is not None:
        quadrature.set_node_budget(max(64, args.budget))
    started = time.perf_counter()
    try:
        if args.command == "verify":
            record, ok = cmd_verify(payload, args, started)
            _emit(record, args.out, args.csv)
            return 0 if ok else 1
        handler = {
            "green": cmd_green,
            "crossing": cmd_crossing,
            "wall": cmd_wall,
            "simulate": cmd_simulate,
        }[args.command]
        record = handler(payload, args, started)
        _emit(record, args.out, args.csv)
        return 0
    except (ValidationError, ConfigurationError, KeyError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2
    except AccuracyError as exc:
        print(f"accuracy failure: {exc}", file=sys.stderr)
        return 3
    except ResourceLimitError as exc:
        print(f"resource cap exceeded: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
