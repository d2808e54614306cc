"""Point-cloud generators and the labeled torus-vs-noise dataset.

Point clouds are plain ``(n, d)`` float arrays throughout the package.
Every stochastic function takes an explicit integer seed and draws from
its own Philox generator, so nothing depends on global RNG state.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import ParameterError, ShapeError

SHAPES = ("circle", "sphere", "torus")


def rng(seed: int) -> np.random.Generator:
    """Counter-based generator for ``seed``."""
    return np.random.Generator(np.random.Philox(int(seed)))


def as_cloud(points, dim: Optional[int] = None) -> np.ndarray:
    """Validate and return ``points`` as an ``(n, d)`` float64 array."""
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim == 1 and dim is not None and arr.size == 0:
        arr = arr.reshape(0, dim)
    if arr.ndim != 2:
        raise ShapeError(f"point cloud must be 2-D, got shape {arr.shape}")
    if arr.shape[1] < 1:
        raise ShapeError("point cloud needs at least one coordinate")
    if dim is not None and arr.shape[1] != dim:
        raise ShapeError(f"expected dimension {dim}, got {arr.shape[1]}")
    if not np.all(np.isfinite(arr)):
        raise ParameterError("point cloud contains NaN or Inf coordinates")
    return arr


@dataclass(frozen=True)
class TwistedTorusParams:
    """Sampling parameters for the 4-D twisted torus.

    ``sampling`` is ``"uniform"`` (angles drawn i.i.d. from ``seed``) or
    ``"grid"`` (``n_theta * n_phi`` evenly spaced angle pairs).
    """

    major_radius: float = 3.0
    tube_scale: float = 1.0
    n_points: int = 4900
    sampling: str = "uniform"
    seed: int = 0
    n_theta: int = 0
    n_phi: int = 0

    def validate(self) -> None:
        if not (self.major_radius > 0 and self.tube_scale > 0):
            raise ParameterError("major_radius and tube_scale must be positive")
        if self.major_radius <= 2 * self.tube_scale:
            raise ParameterError(
                f"need major_radius > 2*tube_scale, got R={self.major_radius}, "
                f"P={self.tube_scale}"
            )
        if self.n_points < 1:
            raise ParameterError("n_points must be at least 1")
        if self.sampling == "grid":
            if self.n_theta * self.n_phi != self.n_points:
                raise ParameterError("grid sampling needs n_theta * n_phi == n_points")
        elif self.sampling != "uniform":
            raise ParameterError(f"unknown sampling scheme {self.sampling!r}")


@dataclass(frozen=True)
class NoiseParams:
    n_points: int
    bounds: Tuple[Tuple[float, float], ...]
    seed: int = 0

    def validate(self) -> None:
        if self.n_points < 0:
            raise ParameterError("n_points must be non-negative")
        if len(self.bounds) < 1:
            raise ParameterError("noise needs at least one dimension")
        for lo, hi in self.bounds:
            if not lo < hi:
                raise ParameterError(f"degenerate noise interval ({lo}, {hi})")


@dataclass
class LabeledDataset:
    """Points with binary labels: 1 on the manifold, 0 for noise."""

    points: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.points = as_cloud(self.points)
        self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if self.labels.shape[0] != self.points.shape[0]:
            raise ShapeError("labels length must equal the point count")
        if np.any((self.labels != 0) & (self.labels != 1)):
            raise ParameterError("labels must be 0 or 1")

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def subset(self, index) -> "LabeledDataset":
        return LabeledDataset(self.points[index], self.labels[index])


def twisted_torus(theta, phi, major_radius: float = 3.0, tube_scale: float = 1.0) -> np.ndarray:
    """Map angle pairs onto the twisted torus in R^4.

    The (z, w) coordinates rotate by half a turn as ``phi`` goes once
    around, which glues the tube back with a reflection.
    """
    theta = np.asarray(theta, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    tube = 2.0 * tube_scale
    radial = major_radius + tube * np.cos(theta)
    return np.stack(
        [
            radial * np.cos(phi),
            radial * np.sin(phi),
            tube * np.sin(theta) * np.cos(phi / 2.0),
            tube * np.sin(theta) * np.sin(phi / 2.0),
        ],
        axis=-1,
    )


def twisted_torus_angles(params: TwistedTorusParams) -> Tuple[np.ndarray, np.ndarray]:
    """The (theta, phi) pairs that :func:`sample_twisted_torus` uses."""
    params.validate()
    if params.sampling == "grid":
        theta = np.arange(params.n_theta) * (2 * np.pi / params.n_theta)
        phi = np.arange(params.n_phi) * (2 * np.pi / params.n_phi)
        tt, pp = np.meshgrid(theta, phi, indexing="ij")
        return tt.ravel(), pp.ravel()
    gen = rng(params.seed)
    angles = gen.uniform(0.0, 2 * np.pi, size=(params.n_points, 2))
    return angles[:, 0], angles[:, 1]


def sample_twisted_torus(params: TwistedTorusParams) -> np.ndarray:
    theta, phi = twisted_torus_angles(params)
    return twisted_torus(theta, phi, params.major_radius, params.tube_scale)


def sample_uniform_noise(params: NoiseParams) -> np.ndarray:
    params.validate()
    lo = np.array([b[0] for b in params.bounds], dtype=np.float64)
    hi = np.array([b[1] for b in params.bounds], dtype=np.float64)
    gen = rng(params.seed)
    return gen.uniform(lo, hi, size=(params.n_points, lo.shape[0]))


def bounding_box(cloud, pad: float = 0.5) -> Tuple[Tuple[float, float], ...]:
    """Per-dimension ``(min - pad, max + pad)`` of a non-empty cloud."""
    cloud = as_cloud(cloud)
    if cloud.shape[0] == 0:
        raise ParameterError("cannot take the bounding box of an empty cloud")
    lo = cloud.min(axis=0) - pad
    hi = cloud.max(axis=0) + pad
    return tuple((float(a), float(b)) for a, b in zip(lo, hi))


def sample_validation_shape(
    shape: str, n: int, noise_sd: float = 0.0, seed: int = 0, grid: bool = False
) -> np.ndarray:
    """Sample a circle (R^2), unit sphere (R^3) or standard torus (R^3).

    With ``grid=True`` the circle uses equally spaced angles, the sphere a
    Fibonacci lattice and the torus a near-square angle grid; otherwise
    points are drawn uniformly in the intrinsic parameters.  Gaussian
    jitter of scale ``noise_sd`` is added last.
    """
    if n < 1:
        raise ParameterError("n must be at least 1")
    if noise_sd < 0:
        raise ParameterError("noise_sd must be non-negative")
    gen = rng(seed)
    if shape == "circle":
        if grid:
            t = np.arange(n) * (2 * np.pi / n)
        else:
            t = gen.uniform(0, 2 * np.pi, n)
        pts = np.stack([np.cos(t), np.sin(t)], axis=1)
    elif shape == "sphere":
        if grid:
            k = np.arange(n) + 0.5
            z = 1 - 2 * k / n
            az = np.pi * (1 + 5**0.5) * k
        else:
            z = gen.uniform(-1, 1, n)
            az = gen.uniform(0, 2 * np.pi, n)
        r = np.sqrt(np.clip(1 - z * z, 0, None))
        pts = np.stack([r * np.cos(az), r * np.sin(az), z], axis=1)
        pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    elif shape == "torus":
        if grid:
            rows = max(1, int(round(np.sqrt(n / 3.0))))
            idx = np.arange(n)
            # tube angle on the slow axis, ring angle on the fast one
            theta = (idx % rows) * (2 * np.pi / rows)
            phi = (idx // rows) * (2 * np.pi / int(np.ceil(n / rows)))
        else:
            # rejection sampling on the tube angle gives uniform area density
            theta = np.empty(0)
            while theta.size < n:
                cand = gen.uniform(0, 2 * np.pi, 2 * n)
                keep = gen.uniform(0, 1, 2 * n) < (3 + np.cos(cand)) / 4
                theta = np.concatenate([theta, cand[keep]])
            theta = theta[:n]
            phi = gen.uniform(0, 2 * np.pi, n)
        radial = 3.0 + np.cos(theta)
        pts = np.stack([radial * np.cos(phi), radial * np.sin(phi), np.sin(theta)], axis=1)
    else:
        raise ParameterError(f"unknown shape {shape!r}; expected one of {SHAPES}")
    if noise_sd > 0:
        pts = pts + gen.normal(0.0, noise_sd, pts.shape)
    return pts


def assemble_dataset(manifold, noise, seed: int = 0) -> LabeledDataset:
    """Concatenate manifold (label 1) and noise (label 0) rows, then shuffle."""
    manifold = np.asarray(manifold, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    if manifold.ndim != 2 or noise.ndim != 2:
        raise ShapeError("both clouds must be 2-D arrays")
    if manifold.shape[1] != noise.shape[1]:
        raise ShapeError(
            f"dimension mismatch: manifold d={manifold.shape[1]}, noise d={noise.shape[1]}"
        )
    points = np.concatenate([manifold, noise], axis=0)
    labels = np.concatenate(
        [np.ones(manifold.shape[0], dtype=np.int64), np.zeros(noise.shape[0], dtype=np.int64)]
    )
    order = rng(seed).permutation(points.shape[0])
    return LabeledDataset(points[order], labels[order])


# ---------------------------------------------------------------- CSV I/O

def cloud_to_csv(points, path=None, labels: Optional[Sequence[int]] = None) -> str:
    """Write a cloud as CSV with header ``x0,...,x{d-1}[,label]``.

    Coordinates use 17 significant digits so values round-trip exactly.
    Returns the CSV text; also writes it to ``path`` when given.
    """
    points = as_cloud(points)
    d = points.shape[1]
    header = [f"x{i}" for i in range(d)]
    if labels is not None:
        header.append("label")
        labels = np.asarray(labels, dtype=np.int64)
        if labels.shape[0] != points.shape[0]:
            raise ShapeError("labels length must equal the point count")
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for i, row in enumerate(points):
        fields = ["%.17g" % v for v in row]
        if labels is not None:
            fields.append(str(int(labels[i])))
        buf.write(",".join(fields) + "\n")
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def read_cloud_csv(path) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """Read a CSV written by :func:`cloud_to_csv`; returns (points, labels or None)."""
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ShapeError(f"{path}: empty file")
    header = [h.strip() for h in lines[0].split(",")]
    has_label = header[-1] == "label"
    d = len(header) - int(has_label)
    rows = [ln for ln in lines[1:] if ln.strip()]
    data = np.array([[float(v) for v in ln.split(",")] for ln in rows], dtype=np.float64)
    if data.size == 0:
        data = data.reshape(0, len(header))
    if data.shape[1] != len(header):
        raise ShapeError(f"{path}: rows do not match the header width")
    points = as_cloud(data[:, :d])
    labels = data[:, d].astype(np.int64) if has_label else None
    return points, labels
