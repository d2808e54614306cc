"""Command-line entry point: ``topoprobe <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import __version__
from .analysis import ClusterAssignment, DbscanParams, dbscan, default_eps, pca_fit, pca_project
from .errors import TopoprobeError
from .geometry import (
    TwistedTorusParams,
    cloud_to_csv,
    read_cloud_csv,
    sample_twisted_torus,
    sample_validation_shape,
    LabeledDataset,
)
from .mlp import NetworkParams, extract_representations
from .persistence import diagram_to_csv
from .pipeline import (
    ExperimentConfig,
    cloud_persistence,
    cluster_layer,
    config_from_mapping,
    generate_data,
    load_config,
    run_experiment,
    run_validation,
    stage_seed,
    train_model,
)
from .plotting import plot_diagram, plot_projection

log = logging.getLogger("topoprobe")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    for key, attr in (("activation", "activation"), ("train.epochs", "epochs"),
                      ("filtration.landmarks", "landmarks"), ("filtration.max_dim", "max_dim")):
        value = getattr(args, attr, None)
        if value is not None:
            overrides[key] = value
    return config_from_mapping(overrides, cfg)


def _emit(text: str, output: Optional[str]) -> None:
    if output:
        Path(output).parent.mkdir(parents=True, exist_ok=True)
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_generate(args) -> int:
    cfg = _config(args)
    if args.shape == "dataset":
        if args.n is not None:
            cfg.torus.n_points = cfg.noise.n_points = args.n // 2
        _, _, ds = generate_data(cfg)
        _emit(cloud_to_csv(ds.points, labels=ds.labels), args.output)
        return 0
    if args.shape == "twisted-torus":
        n = args.n if args.n is not None else cfg.torus.n_points
        pts = sample_twisted_torus(TwistedTorusParams(
            cfg.torus.major_radius, cfg.torus.tube_scale, n, cfg.torus.sampling,
            seed=stage_seed(cfg.seed, "torus")))
    else:
        pts = sample_validation_shape(args.shape, args.n or 200, args.noise_sd, cfg.seed)
    _emit(cloud_to_csv(pts), args.output)
    return 0


def cmd_train(args) -> int:
    cfg = _config(args)
    points, labels = read_cloud_csv(args.input)
    if labels is None:
        raise UsageError("train: input CSV needs a 'label' column")
    params, history = train_model(cfg, LabeledDataset(points, labels))
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    params.to_json(out / "params.json")
    history.to_csv(out / "history.csv")
    if len(history):
        print(f"final loss {history.loss[-1]:.6f}  train accuracy {history.accuracy[-1]:.4f}")
    return 0


def cmd_probe(args) -> int:
    params = NetworkParams.from_json(args.model)
    points, _ = read_cloud_csv(args.input)
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    for i, rep in enumerate(extract_representations(params, points), start=1):
        cloud_to_csv(rep, out / f"layer{i}.csv")
    return 0


def cmd_cluster(args) -> int:
    points, _ = read_cloud_csv(args.input)
    cfg = _config(args)
    if args.eps is not None:
        assignment = dbscan(points, DbscanParams(args.eps, args.min_pts or cfg.cluster.min_pts))
    else:
        if args.min_pts is not None:
            cfg.cluster.min_pts = args.min_pts
        assignment, _ = cluster_layer(points, cfg.cluster)
    _emit(assignment.to_csv(), args.output)
    return 0


def cmd_persistence(args) -> int:
    cfg = _config(args)
    points, _ = read_cloud_csv(args.input)
    fc = cfg.filtration
    threshold = args.threshold if args.threshold is not None else fc.threshold
    seed = args.landmark_seed
    if seed is None:
        seed = stage_seed(cfg.seed, "raw_landmarks")
    diag, _ = cloud_persistence(points, fc.landmarks, fc.max_dim, threshold, seed)
    stem = Path(args.output) if args.output else Path(args.input).with_name(Path(args.input).stem + "_diagram")
    stem = stem.with_suffix("") if stem.suffix in (".csv", ".svg") else stem
    stem.parent.mkdir(parents=True, exist_ok=True)
    diagram_to_csv(diag, stem.with_suffix(".csv"), include_zero=args.include_zero)
    plot_diagram(diag, stem.with_suffix(".svg"), Path(args.input).stem)
    print(stem.with_suffix(".csv"))
    return 0


def cmd_pca(args) -> int:
    points, _ = read_cloud_csv(args.input)
    proj = pca_project(pca_fit(points, args.q), points)
    stem = Path(args.output) if args.output else Path(args.input).with_name(Path(args.input).stem + "_pca")
    stem = stem.with_suffix("") if stem.suffix in (".csv", ".svg") else stem
    stem.parent.mkdir(parents=True, exist_ok=True)
    cloud_to_csv(proj, stem.with_suffix(".csv"))
    plot_projection(proj, stem.with_suffix(".svg"), Path(args.input).stem)
    return 0


def cmd_run_all(args) -> int:
    cfg = _config(args)
    manifest = run_experiment(cfg, args.output_dir or cfg.output_dir)
    acc = manifest.training.get("final_accuracy")
    print(f"status {manifest.status}; train accuracy {acc}; {len(manifest.diagrams)} diagrams")
    return 0


def cmd_validate(args) -> int:
    ok = True
    for res in run_validation(seed=args.seed or 0):
        status = "PASS" if res.passed else "FAIL"
        ok &= res.passed
        print(f"{status} {res.check.shape:<7} t={res.scale:.4f} betti={res.betti} expected={res.check.expected}")
    return 0 if ok else 2


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="experiment config (dotted key = value, or JSON)")
    common.add_argument("--seed", type=int, help="master seed override")

    p = _Parser(prog="topoprobe", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", parents=[common], help="sample a point cloud or the labeled dataset")
    g.add_argument("--shape", default="twisted-torus",
                   choices=["twisted-torus", "circle", "sphere", "torus", "dataset"])
    g.add_argument("--n", type=int)
    g.add_argument("--noise-sd", type=float, default=0.0)
    g.add_argument("--output", "-o")
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", parents=[common], help="train the classifier on a labeled CSV")
    t.add_argument("--input", required=True)
    t.add_argument("--activation", choices=["relu", "tanh"])
    t.add_argument("--epochs", type=int)
    t.add_argument("--output-dir", default="model")
    t.set_defaults(func=cmd_train)

    pr = sub.add_parser("probe", help="extract layer representations")
    pr.add_argument("--model", required=True)
    pr.add_argument("--input", required=True)
    pr.add_argument("--output-dir", default="layers")
    pr.set_defaults(func=cmd_probe)

    c = sub.add_parser("cluster", parents=[common], help="DBSCAN a point cloud")
    c.add_argument("--input", required=True)
    c.add_argument("--eps", type=float)
    c.add_argument("--min-pts", type=int)
    c.add_argument("--output", "-o")
    c.set_defaults(func=cmd_cluster)

    ps = sub.add_parser("persistence", parents=[common], help="Rips persistence diagram of a cloud")
    ps.add_argument("--input", required=True)
    ps.add_argument("--max-dim", type=int, help="top homology dimension (default from config: 1)")
    ps.add_argument("--threshold", type=float, help="filtration cut-off (default: enclosing radius)")
    ps.add_argument("--landmarks", type=int, help="maxmin landmark count (default from config: 400)")
    ps.add_argument("--landmark-seed", type=int,
                    help="seed for the first landmark (default: the run-all seed for the raw diagram)")
    ps.add_argument("--include-zero", action="store_true")
    ps.add_argument("--output", "-o", help="output stem; writes <stem>.csv and <stem>.svg")
    ps.set_defaults(func=cmd_persistence)

    pc = sub.add_parser("pca", help="project a cloud onto its top principal components")
    pc.add_argument("--input", required=True)
    pc.add_argument("--q", type=int, default=3)
    pc.add_argument("--output", "-o")
    pc.set_defaults(func=cmd_pca)

    r = sub.add_parser("run-all", parents=[common], help="run the full experiment")
    r.add_argument("--activation", choices=["relu", "tanh"])
    r.add_argument("--epochs", type=int)
    r.add_argument("--landmarks", type=int)
    r.add_argument("--output-dir")
    r.set_defaults(func=cmd_run_all)

    v = sub.add_parser("validate", parents=[common], help="Betti numbers of circle, sphere and torus")
    v.set_defaults(func=cmd_validate)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except (TopoprobeError, OSError, ValueError) as exc:
        print(f"topoprobe {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
