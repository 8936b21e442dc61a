"""Batch front-end: CSV in, Gram matrix / embedding / report files out.

Settings resolve as defaults < ``--config`` file (``key = value`` lines) <
command-line flags.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import warnings
from dataclasses import asdict, dataclass, fields
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import io
from .embeddings import embed_corpus
from .evaluation import LabeledDataset, SplitSpec, class_similarity_heatmap, run_experiment
from .gram import GramPipelineConfig, build_gram
from .kpca import DTooLarge, fit_kpca, transform
from .smiles import SmilesError, parse_smiles

__all__ = [
    "RunConfig",
    "DatasetError",
    "MissingColumn",
    "BadTargetValue",
    "EmptySmiles",
    "PipelineError",
    "ConfigError",
    "demo_dataset_path",
    "load_dataset",
    "read_config_file",
    "build_outputs",
    "run_pipeline",
    "main",
]

log = logging.getLogger(__name__)

ARTIFACTS = ("gram.csv", "gram.bin", "embedding.csv", "report.json", "heatmap.csv", "run_config.json")


def demo_dataset_path() -> str:
    return str(resources.files("smiles_gram") / "data" / "demo.csv")


class ConfigError(ValueError):
    pass


class DatasetError(ValueError):
    pass


class MissingColumn(DatasetError):
    def __init__(self, column: str):
        self.column = column
        super().__init__(f"missing column {column!r}")


class BadTargetValue(DatasetError):
    def __init__(self, row: int, value: str):
        self.row = row
        super().__init__(f"row {row}: target {value!r} is not a finite number")


class EmptySmiles(DatasetError):
    def __init__(self, row: int):
        self.row = row
        super().__init__(f"row {row}: empty smiles")


class PipelineError(RuntimeError):
    def __init__(self, stage: str, message: str):
        self.stage = stage
        super().__init__(f"[{stage}] {message}")


@dataclass
class RunConfig:
    input_path: str = ""
    task: str = "classify"
    embedding: str = "morgan"
    use_sinkhorn_kernel: bool = True
    sigma: float = 1.0
    sigma_mode: str = "fixed"
    zeta: float = 1.0
    delta: float = 1e-10
    xi: float = 1e-6
    max_iterations: int = 10_000
    radius: int = 2
    nbits: int = 2048
    kmer_k: int = 3
    pca_components: int = 100
    knn_k: int = 5
    ridge_alpha: float = 1.0
    train_fraction: float = 0.7
    repeats: int = 5
    seed: int = 0
    output_dir: str = "out"

    def validate(self) -> "RunConfig":
        checks = [
            (self.task in ("classify", "regress"), "task must be classify or regress"),
            (self.embedding in ("morgan", "kmers", "weighted_kmers"), "embedding must be morgan, kmers or weighted_kmers"),
            (self.sigma_mode in ("fixed", "median"), "sigma_mode must be fixed or median"),
            (self.sigma > 0, "sigma must be > 0"),
            (self.zeta > 0 and self.delta > 0 and self.xi > 0, "zeta, delta and xi must be > 0"),
            (self.max_iterations >= 1, "max_iterations must be >= 1"),
            (self.radius >= 0, "radius must be >= 0"),
            (self.nbits >= 1, "nbits must be >= 1"),
            (self.kmer_k >= 1, "kmer_k must be >= 1"),
            (self.pca_components >= 1, "pca_components must be >= 1"),
            (self.knn_k >= 1, "knn_k must be >= 1"),
            (self.ridge_alpha >= 0, "ridge_alpha must be >= 0"),
            (0 < self.train_fraction < 1, "train_fraction must lie in (0, 1)"),
            (self.repeats >= 1, "repeats must be >= 1"),
            (0 <= self.seed < 2**64, "seed must be a 64-bit unsigned integer"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)
        return self

    def gram_config(self) -> GramPipelineConfig:
        return GramPipelineConfig(
            sigma=self.sigma,
            zeta=self.zeta,
            delta=self.delta,
            xi=self.xi,
            max_iterations=self.max_iterations,
            sigma_mode=self.sigma_mode,
        )

    def split_spec(self) -> SplitSpec:
        return SplitSpec(self.train_fraction, self.repeats, self.seed)


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key: str, value):
    kind = _FIELD_TYPES[key]
    if not isinstance(value, str):
        return value
    try:
        if kind == "bool":
            lowered = value.strip().lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
        if kind == "int":
            return int(value)
        if kind == "float":
            return float(value)
    except ValueError:
        raise ConfigError(f"bad value {value!r} for {key}") from None
    return value.strip()


def read_config_file(path: str | Path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    settings = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key == "input":
            key = "input_path"
        if key not in _FIELD_TYPES:
            raise ConfigError(f"{path}:{lineno}: unknown setting {key!r}")
        settings[key] = _coerce(key, value)
    return settings


def load_dataset(path: str | Path, task: str = "classify"):
    """Read ``smiles`` plus ``label`` (classify) or ``target`` (regress).

    Data rows are numbered from 1 in error messages. Returns
    ``(smiles, labels)`` with float targets for regression.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"dataset not found: {path}")
    column = "label" if task == "classify" else "target"
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = [h.strip() for h in (reader.fieldnames or [])]
        for required in ("smiles", column):
            if required not in header:
                raise MissingColumn(required)
        reader.fieldnames = header
        smiles, values = [], []
        for row_no, row in enumerate(reader, start=1):
            text = (row.get("smiles") or "").strip()
            if not text:
                raise EmptySmiles(row_no)
            raw = row.get(column) or ""
            if task == "classify":
                values.append(raw)
            else:
                try:
                    value = float(raw)
                except ValueError:
                    raise BadTargetValue(row_no, raw) from None
                if not math.isfinite(value):
                    raise BadTargetValue(row_no, raw)
                values.append(value)
            smiles.append(text)
    return smiles, values


def build_outputs(config: RunConfig) -> dict[str, str | bytes]:
    """Run every stage in memory and return ``{filename: content}``."""
    try:
        config.validate()
        gram_config = config.gram_config()
    except (ConfigError, ValueError) as exc:
        raise PipelineError("config", str(exc)) from exc

    try:
        smiles, labels = load_dataset(config.input_path, config.task)
    except (OSError, DatasetError) as exc:
        raise PipelineError("load", str(exc)) from exc
    if len(smiles) < 2:
        raise PipelineError("load", f"need at least 2 molecules, got {len(smiles)}")

    graphs, failures = [], []
    for row_no, text in enumerate(smiles, start=1):
        try:
            graphs.append(parse_smiles(text))
        except SmilesError as exc:
            failures.append(f"row {row_no} {text!r}: {type(exc).__name__}: {exc}")
    if failures:
        raise PipelineError("parse", f"{len(failures)} invalid SMILES: " + "; ".join(failures))

    try:
        features = embed_corpus(
            smiles, graphs, config.embedding, radius=config.radius, nbits=config.nbits, k=config.kmer_k
        )
    except ValueError as exc:
        index = getattr(exc, "index", None)
        where = f"row {index + 1}: " if index is not None else ""
        raise PipelineError("embed", where + str(exc)) from exc
    X = np.vstack([f.values for f in features])

    outputs: dict[str, str | bytes] = {}
    pipeline_info: dict = {"n_molecules": len(smiles), "n_features": X.shape[1]}
    if config.use_sinkhorn_kernel:
        try:
            result = build_gram(features, gram_config)
        except ValueError as exc:
            raise PipelineError("gram", str(exc)) from exc
        if not result.converged:
            log.warning("Sinkhorn balancing stopped after %d iterations without converging", result.iterations_used)
        d = min(config.pca_components, len(smiles))
        if d < config.pca_components:
            log.info("pca_components=%d clamped to N=%d", config.pca_components, d)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", DTooLarge)
            model = fit_kpca(result.kernel, d)
        for w in caught:
            log.info("%s", w.message)
        Z = transform(model).scores
        header = [f"PC{j + 1}" for j in range(d)]
        outputs["gram.csv"] = io.matrix_to_csv(result.kernel)
        outputs["gram.bin"] = io.matrix_to_bytes(result.kernel)
        pipeline_info.update(
            sigma=result.sigma,
            sinkhorn_iterations=result.iterations_used,
            sinkhorn_converged=result.converged,
            pca_components=d,
            pca_rank=model.rank,
        )
    else:
        Z = X
        header = [str(j) for j in range(X.shape[1])]
    outputs["embedding.csv"] = io.table_to_csv(Z, header)

    try:
        if config.task == "classify":
            dataset = LabeledDataset.for_classification(Z, labels)
            report = run_experiment(dataset, config.split_spec(), "classify", knn_k=config.knn_k)
            heat = class_similarity_heatmap(Z, dataset.labels, dataset.class_names)
            if heat.degenerate:
                log.warning("class similarity matrix is constant; heatmap set to zeros")
            outputs["heatmap.csv"] = io.heatmap_to_csv(heat.matrix, heat.class_names)
        else:
            dataset = LabeledDataset.for_regression(Z, labels)
            report = run_experiment(dataset, config.split_spec(), "regress", ridge_alpha=config.ridge_alpha)
    except ValueError as exc:
        raise PipelineError("evaluate", str(exc)) from exc

    doc = report.to_dict()
    doc["pipeline"] = pipeline_info
    outputs["report.json"] = json.dumps(doc, indent=2) + "\n"
    outputs["run_config.json"] = json.dumps(asdict(config), indent=2) + "\n"
    return outputs


def run_pipeline(config: RunConfig) -> int:
    """Run end to end and write artifacts; 0 on success, 1 on failure.

    Failures print one diagnostic line to stderr and write nothing.
    """
    try:
        outputs = build_outputs(config)
        try:
            io.write_atomic(outputs, Path(config.output_dir))
        except OSError as exc:
            raise PipelineError("write", str(exc)) from exc
    except PipelineError as exc:
        print(f"smiles-gram: error {exc}", file=sys.stderr)
        return 1
    log.info("wrote %s to %s", ", ".join(outputs), config.output_dir)
    return 0


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="smiles-gram",
        description="SMILES -> fingerprints -> Sinkhorn-balanced Gram matrix -> kernel PCA -> KNN / ridge evaluation.",
        argument_default=argparse.SUPPRESS,
    )
    p.add_argument("--config", help="optional file of 'key = value' settings (flags override it)")
    p.add_argument("--input", dest="input_path", help="CSV with a smiles column (default: bundled demo set)")
    p.add_argument("--task", choices=["classify", "regress"])
    p.add_argument("--embedding", choices=["morgan", "kmers", "weighted_kmers"])
    p.add_argument(
        "--use-sinkhorn-kernel",
        action=argparse.BooleanOptionalAction,
        help="build the balanced Gram matrix + kernel PCA (default on); --no-use-sinkhorn-kernel feeds raw features",
    )
    p.add_argument("--sigma", type=float, help="Gaussian width (default 1.0)")
    p.add_argument("--sigma-mode", choices=["fixed", "median"])
    p.add_argument("--zeta", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--xi", type=float, help="Sinkhorn tolerance (default 1e-6)")
    p.add_argument("--max-iterations", type=int)
    p.add_argument("--radius", type=int)
    p.add_argument("--nbits", type=int)
    p.add_argument("--kmer-k", type=int)
    p.add_argument("--pca-components", type=int)
    p.add_argument("--knn-k", type=int)
    p.add_argument("--ridge-alpha", type=float)
    p.add_argument("--train-fraction", type=float)
    p.add_argument("--repeats", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--output-dir")
    p.add_argument("-v", "--verbose", action="store_true", default=False)
    return p


def resolve_config(argv: Optional[Sequence[str]] = None) -> tuple[RunConfig, bool]:
    args = vars(_parser().parse_args(argv))
    verbose = args.pop("verbose")
    settings = {}
    config_path = args.pop("config", None)
    if config_path:
        settings.update(read_config_file(config_path))
    settings.update(args)
    config = RunConfig(**settings)
    if not config.input_path:
        config.input_path = demo_dataset_path()
    return config, verbose


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        config, verbose = resolve_config(argv)
    except (ConfigError, OSError) as exc:
        print(f"smiles-gram: error [config] {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(message)s")
    return run_pipeline(config)


if __name__ == "__main__":
    sys.exit(main())
