"""confgen command line: calibrate, apply, sweep, simulate, diagnose.

Exit codes: 0 success, 2 validation or parse error, 3 abstention (lambda_hat = inf).
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import warnings
from typing import List, Optional

import numpy as np

from confgen import evaluation
from confgen.admissibility import AdmissibilitySpec, Agg
from confgen.calibrate import calibrate, upper_bound_diag
from confgen.errors import ConfGenError, ValidationError
from confgen.infer import apply
from confgen.jsonl import load
from confgen.selection import Accum, SelectionSpec, Selector
from confgen.stepfn import as_lambda

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_ABSTAIN = 3

DEFAULTS = {
    "selector": "running_max",
    "accum": None,
    "agg": "max",
    "beta": None,
    "k": None,
    "a_max": 1.0,
    "a_min": 0.0,
    "abstain": None,
    "gamma": None,
    "gamma_grid": list(evaluation.DEFAULT_GAMMA_GRID),
    "seed": None,
    "dedup": False,
    "reps": 100,
    "n_cal": 100,
    "n_test": 100,
    "n_elements": 10,
    "score_dist": "normal",
    "score_params": [0.0, 1.0],
    "link_slope": 2.0,
    "link_intercept": -1.5,
    "link_prob": None,
}

# flags mapped onto config keys (argparse dest == key)
_FLAG_KEYS = (
    "selector", "accum", "agg", "beta", "k", "a_max", "a_min", "abstain",
    "gamma", "gamma_grid", "seed", "dedup", "reps", "n_cal", "n_test",
)

_PROCESS_KEYS = {
    "reps", "n_cal", "n_test", "n_elements", "score_dist", "score_params",
    "link_slope", "link_intercept", "link_prob",
}
_UNUSED = {
    "calibrate": _PROCESS_KEYS | {"gamma_grid", "seed"},
    "diagnose": _PROCESS_KEYS | {"gamma_grid", "seed"},
    "apply": _PROCESS_KEYS | {"gamma", "gamma_grid", "seed"},
    "sweep": _PROCESS_KEYS | {"gamma"},
    "simulate": {"gamma", "dedup"},
}

_RUNNING = {
    Accum.MAX: Selector.RUNNING_MAX,
    Accum.SUM: Selector.RUNNING_SUM,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _grid(text: str) -> List[float]:
    try:
        return [float(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad gamma grid {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("configuration (flags > --config file > defaults)")
    g.add_argument("--config", help="JSON file with any of the configuration keys")
    g.add_argument("--selector", choices=[s.value for s in Selector] + ["running"])
    g.add_argument("--accum", choices=["max", "sum"])
    g.add_argument("--agg", choices=[a.value for a in Agg])
    g.add_argument("--beta", type=float)
    g.add_argument("--k", type=int)
    g.add_argument("--a-max", dest="a_max", type=float)
    g.add_argument("--a-min", dest="a_min", type=float)
    g.add_argument("--abstain", type=float)
    g.add_argument("--gamma", type=float)
    g.add_argument("--gamma-grid", dest="gamma_grid", type=_grid, help="e.g. '0.5,0.6,0.7'")
    g.add_argument("--dedup", action="store_const", const=True)
    g.add_argument("--seed", type=int, help="falls back to $CONFGEN_SEED")
    g.add_argument("--reps", type=int)
    g.add_argument("--out", help="write to this file instead of stdout")

    p = _Parser(prog="confgen", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("calibrate", parents=[common], help="compute lambda_hat")
    c.add_argument("records")
    c.add_argument("--trace", action="store_true", help="include the breakpoint trace")

    a = sub.add_parser("apply", parents=[common], help="select outputs at a threshold")
    a.add_argument("records")
    a.add_argument("lambda_hat", help="number, '-inf' or 'inf'")

    s = sub.add_parser("sweep", parents=[common], help="coverage over a gamma grid")
    s.add_argument("cal", nargs="?")
    s.add_argument("test", nargs="?")
    s.add_argument(
        "--forest", nargs=2, metavar=("CORRECT", "WEIGHTS"),
        help="tree-subset demo from an n x T 0/1 matrix and weights (T or n x T)",
    )
    s.add_argument("--forest-test", nargs=2, metavar=("CORRECT", "WEIGHTS"))

    m = sub.add_parser("simulate", parents=[common], help="Monte Carlo coverage check")
    m.add_argument("--n-cal", dest="n_cal", type=int)
    m.add_argument("--n-test", dest="n_test", type=int)

    d = sub.add_parser("diagnose", parents=[common], help="upper-bound diagnostics on n+1 records")
    d.add_argument("records")
    return p


def effective_config(args) -> dict:
    cfg = dict(DEFAULTS)
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                loaded = json.load(fh)
        except json.JSONDecodeError as e:
            raise ValidationError(f"config {args.config}: {e}") from None
        if not isinstance(loaded, dict):
            raise ValidationError("config file must hold a JSON object")
        unknown = set(loaded) - set(DEFAULTS)
        if unknown:
            raise ValidationError(f"unknown config keys {sorted(unknown)}")
        cfg.update(loaded)
    if cfg["seed"] is None and os.environ.get("CONFGEN_SEED"):
        try:
            cfg["seed"] = int(os.environ["CONFGEN_SEED"])
        except ValueError:
            raise ValidationError("CONFGEN_SEED must be an integer") from None
    for key in _FLAG_KEYS:
        v = getattr(args, key, None)
        if v is not None:
            cfg[key] = v
    if cfg["seed"] is None:
        cfg["seed"] = 0
    return cfg


def echoed(cfg: dict, command: str) -> dict:
    """The part of the effective config that a command actually reads."""
    return {k: v for k, v in cfg.items() if k not in _UNUSED[command]}


def specs(cfg: dict):
    """Selection and admissibility specs from a config; bad combinations raise ValidationError."""
    name = cfg["selector"]
    accum = cfg["accum"]
    try:
        if name == "running":
            kind = _RUNNING[Accum(accum or "max")]
        else:
            kind = Selector(name)
            if accum is not None and kind.accum is not None and kind.accum.value != accum:
                raise ValidationError(
                    f"selector {kind.value} accumulates by {kind.accum.value}, not {accum}"
                )
            if accum is not None and kind.accum is None:
                raise ValidationError(f"selector {kind.value} has no accumulation rule")
        adm = AdmissibilitySpec(
            cfg["agg"],
            a_max=cfg["a_max"],
            abstain_value=cfg["abstain"],
            a_min=cfg["a_min"],
            beta=cfg["beta"],
            k=cfg["k"],
        )
    except ValueError as e:
        raise ValidationError(str(e)) from None
    return SelectionSpec(kind, dedup=bool(cfg["dedup"])), adm


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def header_lines(cfg: dict, *extra: str) -> List[str]:
    return [
        "config " + json.dumps(cfg, sort_keys=True),
        f"config_hash {config_hash(cfg)} seed {cfg['seed']}",
        *extra,
    ]


def _need(cfg, key, cmd):
    if cfg[key] is None:
        raise ValidationError(f"{cmd} needs --{key.replace('_', '-')}")
    return cfg[key]


def _load_matrix(path: str) -> np.ndarray:
    try:
        return np.loadtxt(path, delimiter="," if path.endswith(".csv") else None, ndmin=2)
    except ValueError as e:
        raise ValidationError(f"{path}: {e}") from None


def _weights(path: str) -> np.ndarray:
    w = _load_matrix(path)
    return w[0] if w.shape[0] == 1 else w


def cmd_calibrate(args, cfg, out) -> int:
    sel, adm = specs(cfg)
    gamma = _need(cfg, "gamma", "calibrate")
    records = load(args.records)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res = calibrate(records, sel, adm, gamma)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    d = res.to_dict(with_trace=args.trace)
    d["config"] = echoed(cfg, "calibrate")
    out.write(json.dumps(d) + "\n")
    return EXIT_ABSTAIN if res.abstains else EXIT_OK


def cmd_apply(args, cfg, out) -> int:
    sel, _ = specs(cfg)
    lam = as_lambda(args.lambda_hat)
    records = load(args.records)
    print("# config " + json.dumps(echoed(cfg, "apply"), sort_keys=True), file=sys.stderr)
    for rec in records:
        o = apply(sel, lam, rec)
        out.write(json.dumps({"indices": list(o.indices), "pulled": o.pulled_count}) + "\n")
    return EXIT_OK


def cmd_sweep(args, cfg, out) -> int:
    grid = cfg["gamma_grid"]
    if args.forest:
        k = _need(cfg, "k", "sweep --forest")
        correct = _load_matrix(args.forest[0])
        weights = _weights(args.forest[1])
        tc = tw = None
        if args.forest_test:
            tc = _load_matrix(args.forest_test[0])
            tw = _weights(args.forest_test[1])
        rows = evaluation.forest_demo(correct, weights, k, grid, tc, tw)
        note = "smallest subset sum over tree weights, count_at_least k correct trees"
    else:
        if not args.cal or not args.test:
            raise ValidationError("sweep needs CAL and TEST record files, or --forest")
        sel, adm = specs(cfg)
        rows = evaluation.sweep(load(args.cal), load(args.test), sel, adm, grid)
        note = "H_bar is the jump slack of the calibration set"
    evaluation.write_csv(rows, out, header_lines(echoed(cfg, "sweep"), evaluation.SINGLE_SPLIT_NOTE, note))
    return EXIT_OK


def cmd_simulate(args, cfg, out) -> int:
    sel, adm = specs(cfg)
    try:
        proc = evaluation.ProcessSpec(
            n_elements=tuple(cfg["n_elements"])
            if isinstance(cfg["n_elements"], list)
            else cfg["n_elements"],
            score_dist=cfg["score_dist"],
            score_params=tuple(cfg["score_params"]),
            link_slope=cfg["link_slope"],
            link_intercept=cfg["link_intercept"],
            link_prob=cfg["link_prob"],
            a_max=cfg["a_max"],
            seed=cfg["seed"],
        )
    except (TypeError, ValueError) as e:
        raise ValidationError(f"invalid process: {e}") from None
    rows = evaluation.simulate(
        proc, cfg["n_cal"], cfg["n_test"], cfg["reps"], sel, adm, cfg["gamma_grid"]
    )
    evaluation.write_csv(rows, out, header_lines(echoed(cfg, "simulate"), "per-rep seeds spawned from the master seed"))
    return EXIT_OK


def cmd_diagnose(args, cfg, out) -> int:
    sel, adm = specs(cfg)
    gamma = _need(cfg, "gamma", "diagnose")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rep = upper_bound_diag(load(args.records), sel, adm, gamma)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    d = rep.to_dict()
    d["note"] = "monotone_fraction is a heuristic proxy and cannot verify monotonicity"
    d["config"] = echoed(cfg, "diagnose")
    out.write(json.dumps(d) + "\n")
    return EXIT_OK


COMMANDS = {
    "calibrate": cmd_calibrate,
    "apply": cmd_apply,
    "sweep": cmd_sweep,
    "simulate": cmd_simulate,
    "diagnose": cmd_diagnose,
}


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:  # usage errors and --help
        return int(e.code or 0)
    try:
        cfg = effective_config(args)
        if args.out:
            with open(args.out, "w", encoding="utf-8", newline="") as out:
                return COMMANDS[args.command](args, cfg, out)
        return COMMANDS[args.command](args, cfg, sys.stdout)
    except (ConfGenError, ValueError, OSError) as e:
        print(f"confgen: error: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
