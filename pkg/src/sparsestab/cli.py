"""Command-line entry point: ``python -m sparsestab <subcommand> ...``.

Exit status is 0 when every check of the subcommand passes, 1 when a check
fails and 2 on usage or runtime errors.
"""
from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import bounds as B
from . import certifiers as C
from . import geometry as Geo
from . import solvers as S
from .experiments import EXPERIMENTS, ExperimentConfig, _plain, default_config, run_experiment
from .numerics import Lp, MixedInfOne, as_vector, norm, read_matrix

PROPERTIES = ("weak-rsp", "rsp", "nsp", "stable-nsp", "robust-nsp", "rip", "coherence")


def parse_norm(text: str):
    """'2', '1.5', 'inf' or 'mixed:ALPHA'."""
    text = text.strip().lower()
    if text.startswith("mixed:"):
        return MixedInfOne(float(text.split(":", 1)[1]))
    return Lp(math.inf if text in ("inf", "infinity") else float(text))


def _emit(obj, path=None):
    text = json.dumps(_plain(obj), indent=1)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _load_instance(path):
    with open(path) as fh:
        return S.Instance.from_json(fh.read())


def _load_vector(path):
    with open(path) as fh:
        text = fh.read().strip()
    if text.startswith("["):
        return as_vector(json.loads(text))
    return as_vector([float(v) for v in text.replace("\n", ",").split(",") if v.strip()])


def cmd_certify(args) -> int:
    A = read_matrix(args.matrix)
    prop = args.property
    if prop in ("weak-rsp", "rsp"):
        rep = (C.weak_rsp if prop == "weak-rsp" else C.rsp)(A, args.k)
    elif prop.endswith("nsp"):
        variant = {"nsp": "plain", "stable-nsp": "stable", "robust-nsp": "robust"}[prop]
        rep = C.nsp(A, args.k, variant)
    elif prop == "rip":
        delta = C.rip_delta(A, 2 * args.k)
        rep = C.CertificateReport("rip", args.k, delta < C.RIP_THRESHOLD, value=delta,
                                  notes={"order": 2 * args.k, "threshold": C.RIP_THRESHOLD})
    else:
        mu_k, mu_k1 = C.mutual_coherence_mu1(A, args.k), C.mutual_coherence_mu1(A, args.k - 1)
        rep = C.CertificateReport("coherence", args.k, mu_k + mu_k1 < 1, value=mu_k + mu_k1,
                                  notes={"mu1_k": mu_k, "mu1_k_minus_1": mu_k1})
    _emit(rep.to_dict(), args.out)
    return 0 if rep.holds else 1


def _schedule(args):
    return Geo.EpsSchedule(eps1=args.eps1, ratio=args.ratio)


def cmd_solve_ds(args) -> int:
    inst = _load_instance(args.instance)
    if inst.alpha is not None:
        res = S.solve_ds_linear(inst)
    else:
        res = S.solve_ds_nonlinear(inst, _schedule(args), args.delta)
    out = res.to_dict()
    viol = max(norm(inst.residual(res.xstar), inst.phi) - inst.tau, 0.0)
    out["constraint_violation"] = viol
    _emit(out, args.out)
    return 0 if viol <= S.FEASTOL * max(inst.tau, 1e-12) + 1e-9 else 1


def cmd_solve_lasso(args) -> int:
    inst = _load_instance(args.instance)
    res = S.solve_lasso(inst, _schedule(args), args.delta if args.delta is not None else 0.01)
    out = res.to_dict()
    out["l1_norm"] = float(np.abs(res.xstar).sum())
    _emit(out, args.out)
    return 0 if out["l1_norm"] <= inst.mu * (1 + 1e-9) else 1


def cmd_approx_ball(args) -> int:
    spec = parse_norm(args.p)
    sched = Geo.EpsSchedule(explicit=(args.eps,))
    P = Geo.build_Q(spec, 1, sched, args.dim)
    ok = Geo.sandwich_check(P, spec, args.eps, args.samples)
    out = json.loads(P.to_json())
    out.update({"halfspaces": P.count, "sandwich": ok, "approximate": P.approximate})
    _emit(out, args.out)
    return 0 if ok else 1


def cmd_bounds(args) -> int:
    inst = _load_instance(args.instance)
    xhat = _load_vector(args.xhat)
    if args.gamma is None:
        raise B.MissingConstant("--gamma is required (an ExactTiny or empirical value)")
    if args.theorem.startswith("T5") or args.theorem.startswith("C5"):
        res = S.solve_lasso(inst, delta=args.delta if args.delta is not None else 0.01)
    elif inst.alpha is not None:
        res = S.solve_ds_linear(inst)
    else:
        res = S.solve_ds_nonlinear(inst, delta=args.delta)
    extras = {}
    if args.delta is not None or not args.theorem.startswith("T3") and not args.theorem.startswith("C3"):
        extras["delta"] = args.delta if args.delta is not None else (inst.tau / 10 if inst.tau else 0.01)
    rep = B.evaluate_bound(args.theorem, inst, xhat, res, args.k, args.gamma, extras)
    _emit(rep.to_dict(), args.out)
    return 0 if rep.satisfied else 1


def cmd_run(args) -> int:
    if args.config:
        cfg = ExperimentConfig.from_json(args.config)
        cfg.experiment = args.experiment
    else:
        cfg = default_config(args.experiment)
    if args.out_json:
        cfg.output_json = args.out_json
    if args.out_csv:
        cfg.output_csv = args.out_csv
    report = run_experiment(args.experiment, cfg)
    summary = {"experiment": args.experiment, "passed": report.passed, "checks": report.checks,
               "failures": report.failures, "seconds": report.timing.get("seconds")}
    print(json.dumps(_plain(summary), indent=1))
    return 0 if report.passed else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sparsestab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("certify", help="check a range-space / null-space / RIP / coherence condition")
    p.add_argument("--matrix", required=True, help="CSV or JSON matrix file")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--property", choices=PROPERTIES, default="weak-rsp")
    p.add_argument("--out")
    p.set_defaults(func=cmd_certify)

    for name, func in (("solve-ds", cmd_solve_ds), ("solve-lasso", cmd_solve_lasso)):
        p = sub.add_parser(name, help="solve an instance given as JSON")
        p.add_argument("--instance", required=True)
        p.add_argument("--delta", type=float)
        p.add_argument("--eps1", type=float, default=0.5)
        p.add_argument("--ratio", type=float, default=0.5)
        p.add_argument("--out")
        p.set_defaults(func=func)

    p = sub.add_parser("approx-ball", help="outer polytope of a unit ball")
    p.add_argument("--p", required=True, help="2, 3, inf, 1 or mixed:ALPHA")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--samples", type=int, default=2000)
    p.add_argument("--out")
    p.set_defaults(func=cmd_approx_ball)

    p = sub.add_parser("bounds", help="evaluate an error bound at a point")
    p.add_argument("--theorem", required=True, choices=B.BOUND_IDS)
    p.add_argument("--instance", required=True)
    p.add_argument("--xhat", required=True, help="vector file (CSV line or JSON array)")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--gamma", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("run", help="run a seeded experiment")
    p.add_argument("--experiment", required=True, choices=EXPERIMENTS)
    p.add_argument("--config", help="ExperimentConfig JSON; desk-scale defaults when omitted")
    p.add_argument("--out-json")
    p.add_argument("--out-csv")
    p.set_defaults(func=cmd_run)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
