"""Run the full pipeline on the bundled demo set for both tasks and print
the mean metrics.

    python3 scripts/run_demo.py --output-dir demo_out
"""

import argparse
import json
from pathlib import Path

from smiles_gram.cli import RunConfig, demo_dataset_path, run_pipeline


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--output-dir", default="demo_out")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    runs = {
        "classify_morgan_kernel": RunConfig(task="classify"),
        "classify_morgan_raw": RunConfig(task="classify", use_sinkhorn_kernel=False),
        "regress_kmers_raw": RunConfig(task="regress", embedding="kmers", use_sinkhorn_kernel=False),
        "regress_kmers_kernel": RunConfig(task="regress", embedding="kmers", sigma_mode="median"),
    }
    for name, config in runs.items():
        config.seed = args.seed
        config.output_dir = str(Path(args.output_dir) / name)
        config.input_path = demo_dataset_path()
        if run_pipeline(config) != 0:
            raise SystemExit(f"{name} failed")
        mean = json.loads((Path(config.output_dir) / "report.json").read_text())["mean"]
        shown = {k: round(v, 4) for k, v in mean.items() if isinstance(v, float) and k != "train_time_seconds"}
        print(f"{name:24s} {shown}")


if __name__ == "__main__":
    main()
