"""
Dataset pipeline through the command line
=========================================

The same flow the library exposes, driven end to end through the CLI:
generate scenes with instructions, annotate them in batch, roll out the
annotated fields, plan with the geometric baseline, and evaluate both
policies on identical episodes.
"""

import json
from pathlib import Path

from flownav.cli import main

root = Path(__file__).parent / "out" / "mini_dataset"
root.mkdir(parents=True, exist_ok=True)


def run(*args):
    code = main([str(a) for a in args])
    assert code == 0, f"command failed ({code}): {args}"


run("gen", "--out", root, "--seed", "100", "--count", "5")
run("annotate", "--batch", root / "manifest.jsonl")
run("rollout", "--batch", root / "manifest.jsonl")
run("plan", "--batch", root / "manifest.jsonl")

run("eval", "--batch", root / "manifest.jsonl",
    "--out", root / "rollout_reports.jsonl", "--csv", root / "rollout_rows.csv")
run("eval", "--batch", root / "manifest.jsonl", "--pred-name", "plan.json",
    "--out", root / "plan_reports.jsonl", "--csv", root / "plan_rows.csv")

print("\npolicy comparison on identical episodes:")
for name, path in [("flow-field rollout", root / "rollout_reports.jsonl"),
                   ("A* baseline", root / "plan_reports.jsonl")]:
    rows = [json.loads(l) for l in path.read_text().splitlines()]
    scored = [r for r in rows if "fge" in r]
    if scored:
        fge = sum(r["fge"] for r in scored) / len(scored)
        cr = sum(r["cr"] for r in scored) / len(scored)
        print(f"  {name:>18}: mean FGE {fge:.4f}, mean CR {cr:.2f} "
              f"({len(scored)}/{len(rows)} episodes scored)")
