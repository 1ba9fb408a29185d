"""Summarise calibrated gamma_emp and out-of-sample worst ratios from a bound experiment's JSON."""
import json
import sys

rep = json.load(open(sys.argv[1]))
print(f"{'inst':>4} {'bound':14s} {'phi':22s} {'param':>7} {'gamma_emp':>10} {'test_max':>10} {'margin':>7}")
for entry in rep["instances"]:
    for g in entry.get("groups", []):
        if "gamma_emp" not in g:
            continue
        margin = g["gamma_emp"] / g["test_max"] if g["test_max"] else float("inf")
        print(f"{entry['instance']:>4} {g['bound']:14s} {json.dumps(g['phi']):22s} {g['param']:>7g} "
              f"{g['gamma_emp']:>10.4f} {g['test_max']:>10.4f} {margin:>7.3f}")
