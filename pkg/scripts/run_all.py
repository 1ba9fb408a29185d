"""Run every experiment at its desk-scale defaults and write JSON + CSV per experiment."""
import argparse
import json
import pathlib
import sys

from sparsestab.experiments import EXPERIMENTS, default_config, run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results")
    ap.add_argument("--only", nargs="*", choices=EXPERIMENTS)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ok = True
    for exp in args.only or EXPERIMENTS:
        cfg = default_config(exp, seed=args.seed, output_json=str(out / f"{exp}.json"),
                             output_csv=str(out / f"{exp}.csv"))
        rep = run_experiment(exp, cfg)
        ok &= rep.passed
        print(f"{exp:10s} {'pass' if rep.passed else 'FAIL'} {rep.timing['seconds']:7.1f}s "
              f"rows={len(rep.rows)} failures={len(rep.failures)}")
        if not rep.passed:
            print("  " + json.dumps({k: v for k, v in rep.checks.items() if not v}))
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
