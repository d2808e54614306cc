"""End-to-end experiment: data -> training -> layer analysis -> persistence.

Output layout under ``output_dir``::

    data/         torus.csv, noise.csv, dataset.csv, torus.svg
    model/        params.json, history.csv
    diagrams/     raw.csv/.svg, layer<i>_cluster<c>.csv/.svg
    layers/<i>/   clusters.csv, clusters/<c>/points.csv, clusters/<c>/scatter.svg
    projections/  layer<i>.csv/.svg
    manifest.json

Every stage seed is derived from the master seed by a fixed per-stage
offset, so e.g. changing clustering settings never perturbs the data.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .analysis import (
    ClusterAssignment,
    DbscanParams,
    dbscan,
    default_eps,
    pca_fit,
    pca_project,
    project_clusters_to_data,
)
from .errors import ParameterError, TopoprobeError
from .filtration import build_distance_matrix, landmark_subsample, rips_filtration
from .geometry import (
    LabeledDataset,
    NoiseParams,
    TwistedTorusParams,
    assemble_dataset,
    bounding_box,
    cloud_to_csv,
    sample_twisted_torus,
    sample_uniform_noise,
    sample_validation_shape,
)
from .mlp import (
    Activation,
    NetworkParams,
    TrainConfig,
    TrainHistory,
    extract_representations,
    default_architecture,
    train,
)
from .persistence import (
    PersistenceDiagram,
    betti_at,
    diagram_to_csv,
    dominant_features,
    persistence,
)
from .plotting import plot_cloud, plot_diagram, plot_projection

log = logging.getLogger(__name__)

STAGE_OFFSETS = {
    "torus": 11,
    "noise": 23,
    "shuffle": 37,
    "train": 101,
    "raw_landmarks": 211,
    "cluster_landmarks": 307,
}


def stage_seed(master: int, stage: str) -> int:
    return int(master) * 1000 + STAGE_OFFSETS[stage]


# ------------------------------------------------------------------- config

@dataclass
class TorusConfig:
    major_radius: float = 3.0
    tube_scale: float = 1.0
    n_points: int = 4900
    sampling: str = "uniform"


@dataclass
class NoiseConfig:
    n_points: int = 4900
    pad: float = 0.5


@dataclass
class TrainSection:
    epochs: int = 300
    batch_size: int = 64
    lr: float = 1e-3
    validation_fraction: float = 0.2


@dataclass
class FiltrationConfig:
    max_dim: int = 1
    threshold: Optional[float] = None  # None: enclosing radius
    landmarks: int = 400


@dataclass
class ClusterConfig:
    min_pts: int = 10
    eps: Optional[float] = None  # None: per-layer quantile policy
    eps_quantile: float = 0.5
    min_cluster_size: int = 20


@dataclass
class ExperimentConfig:
    torus: TorusConfig = field(default_factory=TorusConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    activation: str = "relu"
    train: TrainSection = field(default_factory=TrainSection)
    filtration: FiltrationConfig = field(default_factory=FiltrationConfig)
    cluster: ClusterConfig = field(default_factory=ClusterConfig)
    pca_q: int = 3
    layers: List[int] = field(default_factory=lambda: [1, 2, 3])
    output_dir: str = "run"
    seed: int = 0

    def validate(self) -> None:
        Activation.parse(self.activation)
        TwistedTorusParams(self.torus.major_radius, self.torus.tube_scale, self.torus.n_points,
                           self.torus.sampling).validate()
        if self.noise.n_points < 0:
            raise ParameterError("noise.n_points must be non-negative")
        if self.train.epochs < 0 or self.train.batch_size < 1:
            raise ParameterError("train.epochs must be >= 0 and train.batch_size >= 1")
        if self.filtration.max_dim < 0 or self.filtration.landmarks < 1:
            raise ParameterError("filtration.max_dim >= 0 and filtration.landmarks >= 1 required")
        if self.cluster.min_pts < 1 or self.pca_q < 1:
            raise ParameterError("cluster.min_pts and pca_q must be positive")
        arch = default_architecture(self.activation)
        for i in self.layers:
            if not 1 <= i <= len(arch) - 1:
                raise ParameterError(f"layer {i} is not a hidden layer of the network")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _coerce(value: str) -> Any:
    text = value.strip()
    if text.lower() in ("none", "null", "enclosing"):
        return None
    if text.lower() in ("inf", "+inf", "infinity"):
        return float("inf")
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text.strip("\"'")


def parse_config_text(text: str) -> Dict[str, Any]:
    """Parse ``section.key = value`` lines (``#`` comments) or a JSON document."""
    stripped = text.lstrip()
    if stripped.startswith("{"):
        return json.loads(text)
    out: Dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = _coerce(value)
    return out


def _apply(obj, key: str, value: Any) -> None:
    head, _, rest = key.partition(".")
    names = {f.name for f in fields(obj)}
    if head not in names:
        raise ParameterError(f"unknown config key {key!r}")
    current = getattr(obj, head)
    if rest:
        if not is_dataclass(current):
            raise ParameterError(f"config key {key!r} has no sub-keys")
        _apply(current, rest, value)
        return
    if is_dataclass(current) and isinstance(value, dict):
        for k, v in value.items():
            _apply(current, k, v)
        return
    if isinstance(current, bool) or current is None or isinstance(current, (list, str)):
        setattr(obj, head, value)
    elif isinstance(current, int) and not isinstance(value, bool) and isinstance(value, (int, float)) \
            and float(value).is_integer():
        setattr(obj, head, int(value))
    elif isinstance(current, float) and isinstance(value, (int, float)):
        setattr(obj, head, float(value))
    else:
        setattr(obj, head, value)


def config_from_mapping(mapping: Dict[str, Any], base: Optional[ExperimentConfig] = None) -> ExperimentConfig:
    cfg = base or ExperimentConfig()
    for key, value in mapping.items():
        _apply(cfg, key, value)
    cfg.validate()
    return cfg


def load_config(path) -> ExperimentConfig:
    return config_from_mapping(parse_config_text(Path(path).read_text()))


def config_to_text(cfg: ExperimentConfig) -> str:
    """Flat ``section.key = value`` rendering that :func:`load_config` reads back."""
    lines = []

    def walk(prefix: str, obj) -> None:
        for f in fields(obj):
            value = getattr(obj, f.name)
            key = f"{prefix}{f.name}"
            if is_dataclass(value):
                walk(key + ".", value)
            else:
                lines.append(f"{key} = {json.dumps(value)}")

    walk("", cfg)
    return "\n".join(lines) + "\n"


# ------------------------------------------------------------------- stages

def generate_data(cfg: ExperimentConfig) -> Tuple[np.ndarray, np.ndarray, LabeledDataset]:
    """(torus cloud, noise cloud, shuffled labeled dataset)."""
    t = cfg.torus
    torus = sample_twisted_torus(
        TwistedTorusParams(t.major_radius, t.tube_scale, t.n_points, t.sampling,
                           seed=stage_seed(cfg.seed, "torus"))
    )
    noise = sample_uniform_noise(
        NoiseParams(cfg.noise.n_points, bounding_box(torus, cfg.noise.pad), stage_seed(cfg.seed, "noise"))
    )
    dataset = assemble_dataset(torus, noise, stage_seed(cfg.seed, "shuffle"))
    return torus, noise, dataset


def train_model(cfg: ExperimentConfig, dataset: LabeledDataset) -> Tuple[NetworkParams, TrainHistory]:
    tc = TrainConfig(cfg.train.epochs, cfg.train.batch_size, cfg.train.lr,
                     stage_seed(cfg.seed, "train"), cfg.train.validation_fraction)
    return train(dataset, default_architecture(cfg.activation), tc)


def cloud_persistence(
    cloud, landmarks: int, max_dim: int, threshold: Optional[float], seed: int
) -> Tuple[PersistenceDiagram, np.ndarray]:
    """Maxmin-subsample to at most ``landmarks`` points, then Rips persistence."""
    cloud = np.asarray(cloud, dtype=np.float64)
    k = min(landmarks, cloud.shape[0])
    sub, idx = landmark_subsample(cloud, k, seed=seed)
    filt = rips_filtration(build_distance_matrix(sub), max_dim, threshold)
    return persistence(filt), idx


def cluster_layer(rep: np.ndarray, cc: ClusterConfig) -> Tuple[ClusterAssignment, float]:
    if rep.shape[0] <= cc.min_pts:
        eps = cc.eps or 1.0
    else:
        eps = cc.eps if cc.eps is not None else default_eps(rep, cc.min_pts, cc.eps_quantile)
    return dbscan(rep, DbscanParams(eps, cc.min_pts)), eps


def worker_count() -> int:
    raw = os.environ.get("TOPOPROBE_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise ParameterError(f"TOPOPROBE_THREADS must be an integer, got {raw!r}") from None
    return n if n > 0 else (os.cpu_count() or 1)


def run_concurrently(fn: Callable, items: Sequence, workers: Optional[int] = None) -> List:
    """Map ``fn`` over ``items``; results come back in input order."""
    workers = workers or worker_count()
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ----------------------------------------------------------------- manifest

class StageError(TopoprobeError, RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class RunManifest:
    config: Dict[str, Any]
    seed: int
    version: str = __version__
    status: str = "running"
    failed_stage: Optional[str] = None
    error: Optional[str] = None
    timings: Dict[str, float] = field(default_factory=dict)
    training: Dict[str, Any] = field(default_factory=dict)
    layers: Dict[str, Any] = field(default_factory=dict)
    diagrams: Dict[str, str] = field(default_factory=dict)
    files: List[str] = field(default_factory=list)
    outputs_sha256: Optional[str] = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1, sort_keys=True, default=_json_default)


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def outputs_digest(root: Path, files: Sequence[str]) -> str:
    """SHA-256 over the CSV/JSON outputs (not the manifest), in path order."""
    h = hashlib.sha256()
    for rel in sorted(files):
        if rel.endswith((".csv", ".json")):
            h.update(rel.encode())
            h.update((root / rel).read_bytes())
    return h.hexdigest()


def _diagram_summary(d: PersistenceDiagram) -> Dict[str, Any]:
    out: Dict[str, Any] = {"n_simplices": d.n_simplices, "conservation": bool(d.conservation_holds())}
    for k in range(d.max_dim + 1):
        top = dominant_features(d, k, 2 if k else 1)
        out[f"H{k}_dominant"] = [[p.birth, p.death] for p in top]
    return out


def run_experiment(config: ExperimentConfig, output_dir=None) -> RunManifest:
    """Run every stage and write all artifacts plus ``manifest.json``.

    A failing stage marks the manifest as failed (partial outputs stay on
    disk) and re-raises as :class:`StageError`.
    """
    config.validate()
    root = Path(output_dir or config.output_dir)
    for sub in ("data", "model", "diagrams", "layers", "projections"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(config=config.to_dict(), seed=config.seed)
    written: List[str] = []

    def rel(path: Path) -> str:
        r = path.relative_to(root).as_posix()
        written.append(r)
        return r

    def stage(name: str, fn: Callable):
        t0 = time.perf_counter()
        log.info("stage %s", name)
        try:
            result = fn()
        except Exception as exc:
            manifest.status = "failed"
            manifest.failed_stage = name
            manifest.error = f"{type(exc).__name__}: {exc}"
            _finish(root, manifest, written)
            raise StageError(name, exc) from exc
        manifest.timings[name] = round(time.perf_counter() - t0, 3)
        return result

    fc, cc = config.filtration, config.cluster

    def do_generate():
        torus, noise, ds = generate_data(config)
        cloud_to_csv(torus, root / "data/torus.csv"); rel(root / "data/torus.csv")
        cloud_to_csv(noise, root / "data/noise.csv"); rel(root / "data/noise.csv")
        cloud_to_csv(ds.points, root / "data/dataset.csv", ds.labels); rel(root / "data/dataset.csv")
        plot_cloud(torus, root / "data/torus.svg", "twisted torus (x0, x1, x2)"); rel(root / "data/torus.svg")
        return torus, ds

    torus, dataset = stage("generate", do_generate)

    def do_train():
        params, history = train_model(config, dataset)
        params.to_json(root / "model/params.json"); rel(root / "model/params.json")
        history.to_csv(root / "model/history.csv"); rel(root / "model/history.csv")
        return params, history

    params, history = stage("train", do_train)
    manifest.training = history.summary()

    def do_raw():
        diag, _ = cloud_persistence(torus, fc.landmarks, fc.max_dim, fc.threshold,
                                    stage_seed(config.seed, "raw_landmarks"))
        diagram_to_csv(diag, root / "diagrams/raw.csv")
        plot_diagram(diag, root / "diagrams/raw.svg", "raw data")
        manifest.diagrams["raw"] = rel(root / "diagrams/raw.csv")
        rel(root / "diagrams/raw.svg")
        return _diagram_summary(diag)

    manifest.layers["raw"] = stage("raw_persistence", do_raw)

    reps = stage("extract", lambda: extract_representations(params, torus))

    def do_layer(i: int) -> Dict[str, Any]:
        rep = reps[i - 1]
        ldir = root / "layers" / str(i)
        ldir.mkdir(parents=True, exist_ok=True)
        assignment, eps = cluster_layer(rep, cc)
        assignment.to_csv(ldir / "clusters.csv")
        files = [f"layers/{i}/clusters.csv"]
        sizes = assignment.sizes
        by_size = sorted(range(len(sizes)), key=lambda c: (-sizes[c], c))
        members = project_clusters_to_data(assignment, torus)
        analysed, skipped, diagrams, summaries = [], [], {}, {}
        for c, idx in enumerate(members):
            if idx.shape[0] < cc.min_cluster_size:
                skipped.append(c)
                continue
            cdir = ldir / "clusters" / str(c)
            cdir.mkdir(parents=True, exist_ok=True)
            cloud_to_csv(torus[idx], cdir / "points.csv")
            plot_cloud(torus[idx], cdir / "scatter.svg", f"layer {i} cluster {c}")
            diag, _ = cloud_persistence(torus[idx], fc.landmarks, fc.max_dim, fc.threshold,
                                        stage_seed(config.seed, "cluster_landmarks"))
            stem = f"diagrams/layer{i}_cluster{c}"
            diagram_to_csv(diag, root / f"{stem}.csv")
            plot_diagram(diag, root / f"{stem}.svg", f"layer {i} cluster {c}")
            files += [f"layers/{i}/clusters/{c}/points.csv", f"layers/{i}/clusters/{c}/scatter.svg",
                      f"{stem}.csv", f"{stem}.svg"]
            diagrams[f"layer{i}_cluster{c}"] = f"{stem}.csv"
            summaries[str(c)] = _diagram_summary(diag)
            analysed.append(c)
        q = min(config.pca_q, rep.shape[1])
        proj = pca_project(pca_fit(rep, q), rep) if rep.shape[0] >= 2 else np.zeros((rep.shape[0], q))
        cloud_to_csv(proj, root / f"projections/layer{i}.csv")
        plot_projection(proj, root / f"projections/layer{i}.svg", f"layer {i} PCA")
        files += [f"projections/layer{i}.csv", f"projections/layer{i}.svg"]
        return {
            "files": files,
            "diagrams": diagrams,
            "summary": {
                "eps": eps,
                "n_clusters": assignment.k,
                "cluster_sizes": sizes,
                "n_noise": assignment.n_noise,
                "analysed_clusters": analysed,
                "skipped_small_clusters": skipped,
                "all_below_size_threshold": len(analysed) == 0,
                "figure_clusters": by_size[:2],
                "diagrams": summaries,
            },
        }

    def do_layers():
        return run_concurrently(do_layer, list(config.layers))

    results = stage("layers", do_layers)
    for i, res in zip(config.layers, results):
        written.extend(res["files"])
        manifest.diagrams.update(res["diagrams"])
        manifest.layers[str(i)] = res["summary"]

    manifest.status = "ok"
    _finish(root, manifest, written)
    return manifest


def _finish(root: Path, manifest: RunManifest, written: List[str]) -> None:
    existing = sorted(p for p in set(written) if (root / p).exists())
    manifest.files = existing
    manifest.diagrams = {k: v for k, v in manifest.diagrams.items() if (root / v).exists()}
    manifest.outputs_sha256 = outputs_digest(root, existing)
    (root / "manifest.json").write_text(manifest.to_json())


# --------------------------------------------------------------- validation

@dataclass(frozen=True)
class ShapeCheck:
    shape: str
    n: int
    expected: Tuple[int, ...]
    threshold: Optional[float]
    landmarks: Optional[int] = None
    base_n: Optional[int] = None


VALIDATION_SUITE = (
    ShapeCheck("circle", 200, (1, 1), None),
    ShapeCheck("sphere", 300, (1, 0, 1), 1.0),
    ShapeCheck("torus", 500, (1, 2), 3.0, landmarks=500, base_n=3000),
)


@dataclass
class ShapeResult:
    check: ShapeCheck
    scale: float
    betti: Tuple[int, ...]
    diagram: PersistenceDiagram

    @property
    def passed(self) -> bool:
        return self.betti == self.check.expected


def read_off_scale(diagram: PersistenceDiagram, expected: Sequence[int]) -> float:
    """Midpoint of the b-th longest bar in the top expected dimension.

    Infinite bars are capped at the threshold.  ``b`` is the expected
    Betti number there, so the scale sits inside the weakest real feature.
    """
    top = max(k for k, b in enumerate(expected) if b > 0)
    iv = diagram.intervals(top)
    if iv.shape[0] < expected[top]:
        return float(diagram.threshold) / 2
    death = np.minimum(iv[:, 1], diagram.threshold)
    order = np.lexsort((iv[:, 0], -(death - iv[:, 0])))
    pick = order[expected[top] - 1]
    return float((iv[pick, 0] + death[pick]) / 2)


def validate_shape(check: ShapeCheck, seed: int = 0) -> ShapeResult:
    pts = sample_validation_shape(check.shape, check.base_n or check.n, 0.0, seed)
    if check.landmarks:
        pts, _ = landmark_subsample(pts, check.landmarks, seed=seed)
    max_dim = len(check.expected) - 1
    diag = persistence(rips_filtration(build_distance_matrix(pts), max_dim, check.threshold))
    t = read_off_scale(diag, check.expected)
    return ShapeResult(check, t, betti_at(diag, t).betti, diag)


def run_validation(seed: int = 0, suite: Sequence[ShapeCheck] = VALIDATION_SUITE) -> List[ShapeResult]:
    return [validate_shape(check, seed) for check in suite]
