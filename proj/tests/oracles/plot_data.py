#!/usr/bin/env python3
"""Brute-force plot data straight from the data root.

Usage: plot_data.py DATA_ROOT SIMULATOR_ID X Y
Prints CSV rows "x,mean,stderr,n" for every ParameterSet, using exact
rational arithmetic for the mean and variance.
"""
import glob
import json
import math
import os
import sys
from fractions import Fraction


def main(root, sim_id, x, y):
    sets = {}
    for p in glob.glob(os.path.join(root, "db", "parameter_sets", "*.json")):
        with open(p) as f:
            ps = json.load(f)
        if ps["simulator_id"] == sim_id:
            sets[ps["id"]] = ps
    ys = {k: [] for k in sets}
    for p in glob.glob(os.path.join(root, "db", "runs", "*.json")):
        with open(p) as f:
            run = json.load(f)
        if run["parameter_set_id"] not in sets or run["status"] != "finished":
            continue
        out = os.path.join(root, "files", run["result_dir"], "_output.json")
        if not os.path.exists(out):
            continue
        with open(out) as f:
            doc = json.load(f)
        if y in doc:
            ys[run["parameter_set_id"]].append(Fraction(doc[y]))
    for ps_id, vals in sorted(ys.items()):
        xv = sets[ps_id]["values"][x]
        n = len(vals)
        mean = sum(vals, Fraction(0)) / n if n else None
        if n > 1:
            var = sum((v - mean) ** 2 for v in vals) / (n - 1)
            se = math.sqrt(var / n)
        else:
            se = None
        print("%r,%s,%s,%d,%s" % (xv, "" if mean is None else repr(float(mean)),
                                  "" if se is None else repr(se), n, ps_id))


if __name__ == "__main__":
    main(*sys.argv[1:5])
