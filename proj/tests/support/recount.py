#!/usr/bin/env python3
"""Brute-force recount of benchmark rows from raw artifact files.

Written separately from the C++ aggregation so the two can be compared.

  recount.py --manifest run/manifest.json
  recount.py --dir out/gpt-5-low --config gpt-5-low --samples a,b,c [--reasoning]

Prints {"rows": [...]} with the same keys as the benchmark report.
"""

import argparse
import json
import os
import sys
from decimal import ROUND_HALF_UP, Decimal


def pct(num, den):
    if den == 0:
        return 0.0
    return float((Decimal(100 * num) / Decimal(den)).quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


def records(path):
    with open(path, encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]


def recount(directory, config, reasoning, samples):
    rts = {r["sample_id"]: r for r in records(os.path.join(directory, "trajectories.jsonl"))}
    convs = {c["sample_id"]: c for c in records(os.path.join(directory, "conversations.jsonl"))}
    rt_valid = {}
    turn_valid = {}
    for v in records(os.path.join(directory, "verdicts.jsonl")):
        ok = v["valid"] is True and "error" not in v
        if v["kind"] == "rt":
            rt_valid[v["sample_id"]] = ok
        else:
            turn_valid[(v["sample_id"], v["step"])] = ok

    steps = valid_rts = valid_convs = turns = grounded = 0
    for sid in samples:
        rt = rts[sid]
        if "error" not in rt:
            steps += len(rt["steps"])
            valid_rts += rt_valid[sid]
        conv = convs[sid]
        if "error" in conv:
            continue
        aligned = [t["aligned_step"] for t in conv["turns"] if t["speaker"] == "Teacher" and "aligned_step" in t]
        good = sum(turn_valid[(sid, step)] for step in aligned)
        turns += len(aligned)
        grounded += good
        valid_convs += bool(aligned) and good == len(aligned)

    n = len(samples)
    return {
        "config_id": config,
        "reasoning": reasoning,
        "samples": n,
        "total_rt_steps": steps,
        "valid_rts": valid_rts,
        "valid_convs": valid_convs,
        "turns": turns,
        "grounded_turns": grounded,
        "pct_valid_rts": pct(valid_rts, n),
        "pct_valid_convs": pct(valid_convs, n),
        "pct_grounded_turns": pct(grounded, turns),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--manifest")
    ap.add_argument("--dir")
    ap.add_argument("--config")
    ap.add_argument("--samples")
    ap.add_argument("--reasoning", action="store_true")
    args = ap.parse_args()

    if args.manifest:
        with open(args.manifest, encoding="utf-8") as f:
            manifest = json.load(f)
        root = manifest["artifact_root"]
        if not os.path.isabs(root):
            root = os.path.join(os.path.dirname(os.path.abspath(args.manifest)), root)
        rows = [
            recount(os.path.join(root, c["config_id"]), c["config_id"], c["reasoning_enabled"],
                    manifest["sample_ids"])
            for c in manifest["configurations"]
        ]
    elif args.dir and args.config and args.samples is not None:
        rows = [recount(args.dir, args.config, args.reasoning, [s for s in args.samples.split(",") if s])]
    else:
        ap.error("give --manifest or --dir/--config/--samples")
    json.dump({"rows": rows}, sys.stdout, indent=1)
    sys.stdout.write("\n")


if __name__ == "__main__":
    main()
