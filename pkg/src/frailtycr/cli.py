"""Command-line entry point: ``frailtycr <subcommand> ...``.

Exit codes: 0 success, 1 invalid input (usage, config, data), 2 numerical
failure (non-convergence or a tolerance miss).
"""

from __future__ import annotations

import argparse
import io
import json
import os
import sys

import numpy as np

from . import __version__
from . import frailty as fr
from .closedform import ModelSpec, joint_subdensity, joint_subdist, joint_survival
from .config import load_json, parse_grid, parse_hazards, parse_model
from .errors import CapabilityError, ConfigError, FrailtyError, NumericalError, ParseError
from .fit import FitOptions, fit_mle
from .hazards import HazardSet
from .identifiability import (distinguishability_scan, verify_dirichlet_invariance,
                              verify_general_nonidentifiability)
from .oracle import mc_joint_subdist, quad_joint_subdist
from .simulate import format_dataset, read_dataset, simulate_pairs

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _header(model: ModelSpec | None, seed) -> str:
    lines = [f"# version: {__version__}"]
    if model is not None:
        lines.append(f"# model: {json.dumps(model.to_dict(), sort_keys=True)}")
    lines.append(f"# seed: {seed}")
    return "\n".join(lines) + "\n"


def _meta(model, seed, **more):
    return {"version": __version__, "model": None if model is None else model.to_dict(),
            "seed": seed, **more}


def _emit(text: str, out):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)


def _threads(args):
    if args.threads is not None:
        return args.threads
    env = os.environ.get("FRAILTY_CR_THREADS")
    return int(env) if env else (os.cpu_count() or 1)


# ---------------------------------------------------------------- commands


def cmd_simulate(args):
    model = parse_model(load_json(args.model))
    _emit(format_dataset(simulate_pairs(model, args.n, args.seed)), args.out)
    return EXIT_OK


def _load_grid(path):
    obj = load_json(path)
    if not isinstance(obj, dict):
        raise ConfigError("$", "expected an object with t1 and t2")
    for key in ("t1", "t2"):
        if key not in obj:
            raise ConfigError(f"$.{key}", "missing field")
    return parse_grid(obj["t1"], "$.t1"), parse_grid(obj["t2"], "$.t2")


def cmd_eval(args):
    model = parse_model(load_json(args.model))
    g1, g2 = _load_grid(args.grid)
    L1, L2 = model.dims
    buf = io.StringIO()
    buf.write(_header(model, None))
    buf.write("t1,t2,j1,j2,F,f,S\n")
    for t1 in g1:
        for t2 in g2:
            S = joint_survival(model, t1, t2)
            for j1 in range(1, L1 + 1):
                for j2 in range(1, L2 + 1):
                    F = joint_subdist(model, t1, t2, j1, j2)
                    f = joint_subdensity(model, t1, t2, j1, j2) if t1 > 0 and t2 > 0 else 0.0
                    buf.write(f"{t1:.17g},{t2:.17g},{j1},{j2},{F:.17g},{f:.17g},{S:.17g}\n")
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


def _read_points(path, dims):
    rows = []
    header = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            fields = [x.strip() for x in s.split(",")]
            if header is None:
                if fields != ["t1", "t2", "j1", "j2"]:
                    raise ParseError(lineno, "expected header t1,t2,j1,j2")
                header = fields
                continue
            if len(fields) != 4:
                raise ParseError(lineno, f"expected 4 fields, got {len(fields)}")
            try:
                t1, t2, j1, j2 = float(fields[0]), float(fields[1]), int(fields[2]), int(fields[3])
            except ValueError as exc:
                raise ParseError(lineno, str(exc)) from None
            if not (t1 >= 0 and t2 >= 0 and np.isfinite(t1) and np.isfinite(t2)):
                raise ParseError(lineno, "times must be finite and >= 0")
            if not (1 <= j1 <= dims[0] and 1 <= j2 <= dims[1]):
                raise ParseError(lineno, f"cause indices out of range {dims}")
            rows.append((t1, t2, j1, j2))
    if header is None:
        raise ParseError(1, "missing header line")
    return rows


def cmd_oracle_check(args):
    model = parse_model(load_json(args.model))
    points = _read_points(args.points, model.dims)
    buf = io.StringIO()
    buf.write(_header(model, args.seed))
    buf.write(f"# method: {args.method}, n: {args.n}, perturb: {args.perturb:g}, "
              f"threads: {_threads(args)}\n")
    buf.write("point,t1,t2,j1,j2,closed,oracle,se,diff,pass\n")
    failures = 0
    for i, (t1, t2, j1, j2) in enumerate(points, start=1):
        closed = joint_subdist(model, t1, t2, j1, j2) + args.perturb
        method = args.method
        if method in ("auto", "quad"):
            try:
                oracle, se = quad_joint_subdist(model, t1, t2, j1, j2), 0.0
                method = "quad"
            except CapabilityError:
                if args.method == "quad":
                    raise
                method = "mc"
        if method == "mc":
            oracle, se = mc_joint_subdist(model, t1, t2, j1, j2, n=args.n, seed=args.seed,
                                          workers=_threads(args))
        diff = abs(closed - oracle)
        ok = diff <= max(args.tol, 4.0 * se)
        failures += not ok
        buf.write(f"{i},{t1:.17g},{t2:.17g},{j1},{j2},{closed:.17g},{oracle:.17g},"
                  f"{se:.6g},{diff:.6g},{'pass' if ok else 'fail'}\n")
    _emit(buf.getvalue(), args.out)
    return EXIT_OK if failures == 0 else EXIT_NUMERIC


def _optional_grid(cfg):
    if "grid" not in cfg:
        return None
    g = cfg["grid"]
    if not isinstance(g, dict) or "t1" not in g or "t2" not in g:
        raise ConfigError("$.grid", "expected an object with t1 and t2")
    return parse_grid(g["t1"], "$.grid.t1"), parse_grid(g["t2"], "$.grid.t2")


def _cfg_number(cfg, key, default=None):
    if key not in cfg:
        if default is None:
            raise ConfigError(f"$.{key}", "missing field")
        return default
    v = cfg[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"$.{key}", f"expected a number, got {v!r}")
    return v


def cmd_identifiability(args):
    cfg = load_json(args.config)
    if not isinstance(cfg, dict):
        raise ConfigError("$", "expected an object")
    grid = _optional_grid(cfg)
    model = None
    if args.mode == "general":
        model = parse_model(cfg.get("model"), "$.model")
        rep = verify_general_nonidentifiability(
            model, _cfg_number(cfg, "c1"), _cfg_number(cfg, "c2"), grid,
            method=cfg.get("method", "auto"), n=int(_cfg_number(cfg, "n", 10**5)),
            seed=args.seed, broken=bool(cfg.get("broken", False)))
    elif args.mode == "dirichlet":
        for key in ("alpha1", "alpha2"):
            if not isinstance(cfg.get(key), list):
                raise ConfigError(f"$.{key}", "expected a list of positive numbers")
        if "hazards" not in cfg:
            raise ConfigError("$.hazards", "missing field")
        hs = parse_hazards(cfg["hazards"], "$.hazards")
        lens = (len(cfg["alpha1"]), len(cfg["alpha2"]))
        groups = []
        for k, g in enumerate((hs.first, hs.second)):
            groups.append(g * lens[k] if len(g) == 1 else g)
        hs = HazardSet(*groups)
        spec = fr.DirichletGamma(cfg["alpha1"], cfg["alpha2"], _cfg_number(cfg, "sigma"))
        problems = fr.validate(spec, *hs.dims)
        if problems:
            raise ConfigError("$", "; ".join(problems))
        model = ModelSpec(hs, spec)
        sigma_tilde = cfg.get("sigma_tilde")
        rep = verify_dirichlet_invariance(spec.alpha1, spec.alpha2, spec.sigma,
                                          _cfg_number(cfg, "c1"), _cfg_number(cfg, "c2"),
                                          hs, grid, sigma_tilde=sigma_tilde)
    else:
        model = parse_model(cfg.get("model"), "$.model")
        other = parse_model(cfg.get("model_prime"), "$.model_prime")
        rep = distinguishability_scan(model, other, grid,
                                      threshold=_cfg_number(cfg, "threshold", 1e-4))
    out = rep.to_dict()
    out["meta"] = _meta(model, args.seed)
    _emit(json.dumps(out, indent=2) + "\n", args.out)
    return EXIT_OK if rep.passed else EXIT_NUMERIC


def _hazard_families(obj, path="$"):
    if isinstance(obj, dict) and "hazards" in obj:
        obj, path = obj["hazards"], f"{path}.hazards"
    if not isinstance(obj, list) or len(obj) != 2:
        raise ConfigError(path, "expected two per-individual hazard lists")
    fams = []
    for k, group in enumerate(obj):
        if not isinstance(group, list) or not group:
            raise ConfigError(f"{path}[{k}]", "expected a non-empty list")
        names = []
        for j, h in enumerate(group):
            name = h.get("family") if isinstance(h, dict) else h
            if name not in ("constant", "weibull", "gompertz"):
                raise ConfigError(f"{path}[{k}][{j}].family", f"unknown hazard family {name!r}")
            names.append(name)
        fams.append(names)
    return fams


def cmd_fit(args):
    fams = _hazard_families(load_json(args.hazards))
    ds = read_dataset(args.data, dims=tuple(len(g) for g in fams))
    init = args.init if args.init == "auto" else parse_model(load_json(args.init))
    opts = FitOptions(transform=args.transform, freeze_hazards=args.freeze_hazards,
                      maxiter=args.maxiter)
    res = fit_mle(ds, args.family, fams, init, opts)
    out = res.to_dict()
    out["meta"] = _meta(res.model, ds.meta.get("seed"), data=str(args.data), n=len(ds))
    _emit(json.dumps(out, indent=2) + "\n", args.out)
    return EXIT_OK if res.converged else EXIT_NUMERIC


# ---------------------------------------------------------------- parser


def build_parser():
    p = _Parser(prog="frailtycr", description="Bivariate competing-risks frailty models.")
    p.add_argument("--version", action="version", version=f"frailtycr {__version__}")
    p.add_argument("--threads", type=int, default=None,
                   help="worker cap (default: FRAILTY_CR_THREADS or all cores)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="simulate a paired dataset")
    s.add_argument("--model", required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("eval", help="evaluate F, f and S on a grid")
    s.add_argument("--model", required=True)
    s.add_argument("--grid", required=True)
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("oracle-check", help="compare closed forms with the oracle")
    s.add_argument("--model", required=True)
    s.add_argument("--points", required=True)
    s.add_argument("--method", choices=("auto", "quad", "mc"), default="auto")
    s.add_argument("--n", type=int, default=10**6)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--tol", type=float, default=1e-6)
    s.add_argument("--perturb", type=float, default=0.0,
                   help="add this offset to the closed-form values (negative control)")
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_oracle_check)

    s = sub.add_parser("identifiability", help="identifiability checks")
    s.add_argument("--mode", choices=("general", "dirichlet", "scan"), required=True)
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_identifiability)

    s = sub.add_parser("fit", help="maximum-likelihood fit")
    s.add_argument("--data", required=True)
    s.add_argument("--family", required=True,
                   choices=("shared_gamma", "correlated_gamma", "shared_cause_specific",
                            "correlated_cause_specific", "dirichlet_gamma", "independent_gamma"))
    s.add_argument("--hazards", required=True)
    s.add_argument("--init", default="auto")
    s.add_argument("--transform", choices=("log", "softplus"), default="log")
    s.add_argument("--freeze-hazards", action="store_true")
    s.add_argument("--maxiter", type=int, default=2000)
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_fit)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.threads is not None and args.threads < 1:
        print("frailtycr: error: --threads must be >= 1", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"frailtycr: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (FrailtyError, ValueError) as exc:
        print(f"frailtycr: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"frailtycr: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
