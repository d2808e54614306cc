"""End-to-end acceptance checks.

Each test prints one ``criterion N: PASS/FAIL`` line (also collected into
the terminal summary) before asserting, so a failing criterion still
reports its measured value.
"""

import time

import numpy as np
import pytest

from topoprobe.cli import main
from topoprobe.filtration import build_distance_matrix, rips_filtration
from topoprobe.geometry import LabeledDataset, read_cloud_csv
from topoprobe.mlp import LayerSpec, bce_loss, forward, gradients, init_params
from topoprobe.oracle import oracle_betti
from topoprobe.persistence import betti_at, persistence
from topoprobe.pipeline import (
    ExperimentConfig,
    cloud_persistence,
    config_from_mapping,
    generate_data,
    run_experiment,
    run_validation,
    stage_seed,
    train_model,
)

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def full_runs(tmp_path_factory):
    """Default-configuration runs for both activations (shared by criteria 6 to 8)."""
    root = tmp_path_factory.mktemp("acceptance")
    runs = {}
    for act in ("relu", "tanh"):
        t0 = time.perf_counter()
        manifest = run_experiment(config_from_mapping({"activation": act}), root / act)
        runs[act] = (manifest, root / act, time.perf_counter() - t0)
    return runs


def test_raw_twisted_torus_topology(report):
    cfg = ExperimentConfig()
    t0 = time.perf_counter()
    torus, _, _ = generate_data(cfg)
    diag, _ = cloud_persistence(torus, 400, 1, None, stage_seed(cfg.seed, "raw_landmarks"))
    elapsed = time.perf_counter() - t0
    n_inf_h0 = int(np.isinf(diag.intervals(0)[:, 1]).sum())
    h1 = diag.intervals(1)
    lengths = np.sort((h1[:, 1] - h1[:, 0])[np.isfinite(h1[:, 1])])[::-1]
    ratio = lengths[1] / lengths[2]
    ok = n_inf_h0 == 1 and ratio >= 3 and elapsed <= 60
    report(1, ok, f"infinite H0 bars={n_inf_h0} (need 1); H1 2nd/3rd bar ratio={ratio:.3f} (need >= 3); "
                  f"top H1 lengths={np.round(lengths[:4], 4).tolist()}; {elapsed:.1f}s (need <= 60)")
    assert n_inf_h0 == 1
    assert elapsed <= 60
    assert ratio >= 3


def test_validation_shapes(report):
    results = run_validation()
    detail = "; ".join(f"{r.check.shape} t={r.scale:.4f} betti={r.betti} expected={r.check.expected}"
                       for r in results)
    ok = all(r.passed for r in results)
    report(2, ok, detail)
    assert ok


def test_oracle_equivalence(report):
    gen = np.random.default_rng(20240601)
    mismatches, clouds, scales = 0, 0, 0
    for trial in range(150):
        n = int(gen.integers(1, 9))
        d = int(gen.integers(1, 5))
        pts = gen.integers(0, 3, (n, d)).astype(float) if trial % 3 == 0 else gen.normal(size=(n, d))
        max_dim = int(gen.integers(0, 3))
        threshold = [np.inf, 1.0, 1.5][trial % 3]
        filt = rips_filtration(build_distance_matrix(pts), max_dim, threshold)
        diag = persistence(filt)
        clouds += 1
        for t in np.unique(filt.diameters):
            scales += 1
            mismatches += betti_at(diag, float(t)).betti != oracle_betti(filt, float(t))
    report(3, mismatches == 0 and clouds >= 100,
           f"{clouds} clouds, {scales} filtration values, {mismatches} mismatches")
    assert clouds >= 100 and mismatches == 0


def test_training_accuracy(report):
    reached, lines, slowest = 0, [], 0.0
    for seed in range(5):
        cfg = config_from_mapping({"seed": seed, "activation": "relu"})
        _, _, dataset = generate_data(cfg)
        assert len(dataset) == 9800
        t0 = time.perf_counter()
        _, history = train_model(cfg, dataset)
        slowest = max(slowest, time.perf_counter() - t0)
        best = max(history.accuracy)
        reached += best >= 0.95
        lines.append(f"seed {seed}: best={best:.4f} final={history.accuracy[-1]:.4f}")
    ok = reached >= 3 and slowest <= 600
    report(4, ok, f"{reached}/5 seeds >= 0.95 ({'; '.join(lines)}); slowest run {slowest:.1f}s")
    assert reached >= 3
    assert slowest <= 600


def test_gradient_check(report):
    worst = 0.0
    h = 1e-4
    for seed in range(20):
        gen = np.random.default_rng(seed)
        widths = [int(w) for w in gen.integers(2, 6, size=3)]
        act = ["relu", "tanh", "sigmoid"][seed % 3]
        arch = [LayerSpec(4, widths[0], act), LayerSpec(widths[0], widths[1], act),
                LayerSpec(widths[1], 1, "sigmoid")]
        # random biases keep ReLU pre-activations off the kink, where no gradient exists
        base = init_params(arch, seed)
        net = base.with_arrays([a if a.ndim == 2 else gen.normal(0, 0.5, a.shape) for a in base.arrays])
        x = gen.normal(size=(8, 4))
        y = gen.integers(0, 2, 8)
        z = x
        for layer in net.layers:
            pre = z @ layer.W.T + layer.b
            if layer.activation == "relu":
                assert np.abs(pre).min() > 10 * h, "sample point too close to the ReLU kink"
            z = layer.activation(pre)
        analytic = np.concatenate([g.ravel() for g in gradients(net, x, y)])
        numeric = []
        arrays = net.arrays
        for k, arr in enumerate(arrays):
            for idx in np.ndindex(arr.shape):
                shifted = []
                for sign in (1, -1):
                    trial = [a.copy() for a in arrays]
                    trial[k][idx] += sign * h
                    shifted.append(bce_loss(forward(net.with_arrays(trial), x)[0], y))
                numeric.append((shifted[0] - shifted[1]) / (2 * h))
        numeric = np.array(numeric)
        rel = np.linalg.norm(analytic - numeric) / max(np.linalg.norm(analytic) + np.linalg.norm(numeric), 1e-12)
        worst = max(worst, rel)
    report(5, worst < 1e-5, f"20 networks, worst relative error {worst:.2e} (need < 1e-5)")
    assert worst < 1e-5


def test_pipeline_layers_both_activations(report, full_runs):
    parts, ok = [], True
    for act, (manifest, _, elapsed) in full_runs.items():
        per_layer = {i: sum(1 for k in manifest.diagrams if k.startswith(f"layer{i}_")) for i in (1, 2, 3)}
        flag = manifest.layers["3"].get("all_below_size_threshold")
        good = manifest.status == "ok" and per_layer[1] > 0 and per_layer[2] > 0 and isinstance(flag, bool)
        ok &= good
        parts.append(f"{act}: status={manifest.status} cluster diagrams per layer={per_layer} "
                     f"layer-3 all below size threshold={flag} ({elapsed:.0f}s)")
    report(6, ok, "; ".join(parts))
    assert ok


def test_run_all_determinism(report, full_runs, tmp_path):
    manifest, first, _ = full_runs["relu"]
    assert main(["run-all", "--activation", "relu", "--output-dir", str(tmp_path)]) == 0
    names = sorted(manifest.diagrams.values())
    differing = [n for n in names if (first / n).read_bytes() != (tmp_path / n).read_bytes()]
    second = sorted(p.relative_to(tmp_path).as_posix() for p in (tmp_path / "diagrams").glob("*.csv"))
    ok = not differing and second == names
    report(7, ok, f"{len(names)} diagram CSVs compared, {len(differing)} differ")
    assert ok


def test_conservation_everywhere(report, full_runs):
    checked, failed = 0, []
    for act, (manifest, _, _) in full_runs.items():
        checked += 1
        if not manifest.layers["raw"]["conservation"]:
            failed.append(f"{act}/raw")
        for layer in ("1", "2", "3"):
            for c, summary in manifest.layers[layer]["diagrams"].items():
                checked += 1
                if not summary["conservation"]:
                    failed.append(f"{act}/layer{layer}/cluster{c}")
    for r in run_validation():
        checked += 1
        if not r.diagram.conservation_holds():
            failed.append(r.check.shape)
    report(8, not failed, f"{checked} diagrams checked, violations: {failed or 'none'}")
    assert not failed
