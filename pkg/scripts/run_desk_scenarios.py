"""Run every shipped scenario and print a one-line verdict per file.

    python3 scripts/run_desk_scenarios.py [--out DIR] [--jobs N]
"""
import argparse
import json
from pathlib import Path

from airy_evolve.scenario_cli import load_scenario, run_scenario

HERE = Path(__file__).resolve().parent.parent / "scenarios"


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="desk_out")
    parser.add_argument("--scenarios", default=str(HERE))
    args = parser.parse_args()
    worst = 0
    for path in sorted(Path(args.scenarios).glob("*.toml")):
        out = Path(args.out) / path.stem
        status = run_scenario(load_scenario(path), out)
        worst = max(worst, status)
        summary = json.loads((out / "summary.json").read_text())
        shape = max((s["max_abs_dev"] for s in summary.get("snapshots", [])), default=float("nan"))
        accel = summary.get("fitted_acceleration")
        accel_txt = "n/a" if accel is None else f"{accel:.6f}"
        print(f"{path.stem:<16} status {status}  max shape dev {shape:.2e}  fitted accel {accel_txt}")
    raise SystemExit(worst)


if __name__ == "__main__":
    main()
