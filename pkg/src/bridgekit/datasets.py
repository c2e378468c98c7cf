"""Boundary distributions: Gaussian mixtures, synthetic manifolds, CSV data.

Every boundary object exposes ``sample(n, rng) -> (n, dim)`` and ``dim``;
samplers draw fresh on each call (empirical data resamples its rows with
replacement).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ContractError

__all__ = ["GmmSpec", "PointMass", "StandardNormal", "EmpiricalDistribution",
           "ManifoldSampler", "sample_gmm", "random_gmm_spec", "make_manifold",
           "concat_manifolds", "load_csv", "MANIFOLD_KINDS"]

MANIFOLD_KINDS = ("swiss_roll", "s_curve", "moons")
_MANIFOLD_DIM = {"swiss_roll": 3, "s_curve": 3, "moons": 2}


@dataclass(frozen=True)
class GmmSpec:
    """Gaussian mixture with per-mode mean vectors and scalar stds."""

    means: np.ndarray   # (K, D)
    stds: np.ndarray    # (K,)
    weights: np.ndarray  # (K,), sums to 1

    def __post_init__(self):
        means = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        stds = np.atleast_1d(np.asarray(self.stds, dtype=np.float64))
        k = means.shape[0]
        if self.weights is None:
            weights = np.full(k, 1.0 / k)
        else:
            weights = np.atleast_1d(np.asarray(self.weights, dtype=np.float64))
        if stds.shape != (k,) or weights.shape != (k,):
            raise ContractError("means, stds and weights disagree on mode count")
        if np.any(stds < 0):
            raise ContractError("mode stds must be >= 0")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-9:
            raise ContractError("weights must be nonnegative and sum to 1")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "stds", stds)
        object.__setattr__(self, "weights", weights)

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @property
    def n_modes(self) -> int:
        return self.means.shape[0]

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return sample_gmm(self, n, rng)


def sample_gmm(spec: GmmSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    if n < 0:
        raise ContractError("sample count must be >= 0")
    comp = rng.choice(spec.n_modes, size=n, p=spec.weights)
    return spec.means[comp] + spec.stds[comp, None] * rng.standard_normal(
        (n, spec.dim))


def random_gmm_spec(dim: int, n_modes: int, rng: np.random.Generator,
                    mean_low: float = -2.5, mean_high: float = 2.5,
                    std: float = 1.0) -> GmmSpec:
    """Random mixture: means uniform on a box, shared unit-ish std."""
    means = rng.uniform(mean_low, mean_high, (n_modes, dim))
    return GmmSpec(means=means, stds=np.full(n_modes, std),
                   weights=np.full(n_modes, 1.0 / n_modes))


@dataclass(frozen=True)
class PointMass:
    """Degenerate boundary: every sample is the same point."""

    point: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "point", np.atleast_1d(np.asarray(self.point, dtype=np.float64)))

    @property
    def dim(self) -> int:
        return self.point.shape[0]

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return np.tile(self.point, (n, 1))


@dataclass(frozen=True)
class EmpiricalDistribution:
    """Finite sample set, optionally carrying its normalization."""

    samples: np.ndarray = field(repr=False)
    shift: np.ndarray | None = None
    scale: np.ndarray | None = None

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 2 or samples.shape[0] == 0:
            raise ContractError("empirical samples must be a nonempty (n, D) array")
        if not np.isfinite(samples).all():
            raise ContractError("empirical samples contain non-finite values")
        object.__setattr__(self, "samples", samples)

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        rows = rng.integers(0, self.n, size=n)
        return self.samples[rows].copy()

    def denormalize(self, x: np.ndarray) -> np.ndarray:
        """Map normalized coordinates back to the raw data scale."""
        if self.shift is None or self.scale is None:
            return np.asarray(x, dtype=np.float64).copy()
        return np.asarray(x) * self.scale + self.shift


@dataclass(frozen=True)
class StandardNormal:
    """Isotropic unit Gaussian in ``dim`` dimensions."""

    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise ContractError("dimension must be >= 1")

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.standard_normal((n, self.dim))


def make_manifold(kind: str, n: int, rng: np.random.Generator,
                  noise_std: float = 0.0) -> np.ndarray:
    """Sample one of the synthetic manifolds.

    swiss_roll (3-D): u ~ U(1.5 pi, 4.5 pi), y ~ U(0, 21),
        (u cos u, y, u sin u).
    s_curve (3-D): u ~ U(-1.5 pi, 1.5 pi), y ~ U(0, 1),
        (sin u, 2 y, sign(u) (cos u - 1)).
    moons (2-D): theta ~ U(0, pi); moon A at (cos t, sin t), moon B at
        (1 - cos t, 0.5 - sin t), exactly floor/ceil halves of n.
    """
    if n < 1:
        raise ContractError("manifold sample count must be >= 1")
    if kind == "swiss_roll":
        u = rng.uniform(1.5 * np.pi, 4.5 * np.pi, n)
        y = rng.uniform(0.0, 21.0, n)
        pts = np.stack([u * np.cos(u), y, u * np.sin(u)], axis=1)
    elif kind == "s_curve":
        u = rng.uniform(-1.5 * np.pi, 1.5 * np.pi, n)
        y = rng.uniform(0.0, 1.0, n)
        pts = np.stack([np.sin(u), 2.0 * y, np.sign(u) * (np.cos(u) - 1.0)],
                       axis=1)
    elif kind == "moons":
        n_a = n // 2
        th_a = rng.uniform(0.0, np.pi, n_a)
        th_b = rng.uniform(0.0, np.pi, n - n_a)
        a = np.stack([np.cos(th_a), np.sin(th_a)], axis=1)
        b = np.stack([1.0 - np.cos(th_b), 0.5 - np.sin(th_b)], axis=1)
        pts = np.concatenate([a, b], axis=0)
    else:
        raise ContractError(
            f"unknown manifold kind {kind!r}; expected one of {MANIFOLD_KINDS}")
    if noise_std > 0.0:
        pts = pts + noise_std * rng.standard_normal(pts.shape)
    return pts


def concat_manifolds(parts: list[np.ndarray], pad_to: int | None = None,
                     rng: np.random.Generator | None = None) -> np.ndarray:
    """Concatenate equal-length sample sets along the feature axis.

    With ``pad_to`` above the summed width, independent N(0, 1) columns
    are appended up to the requested dimension.
    """
    if not parts:
        raise ContractError("need at least one part to concatenate")
    n = parts[0].shape[0]
    for p in parts:
        if p.ndim != 2 or p.shape[0] != n:
            raise ContractError("all parts must be 2-D with equal row counts")
    out = np.concatenate(parts, axis=1)
    if pad_to is not None:
        if pad_to < out.shape[1]:
            raise ContractError(
                f"pad_to={pad_to} is below the concatenated width {out.shape[1]}")
        if pad_to > out.shape[1]:
            if rng is None:
                raise ContractError("padding requires an rng")
            pad = rng.standard_normal((n, pad_to - out.shape[1]))
            out = np.concatenate([out, pad], axis=1)
    return out


@dataclass(frozen=True)
class ManifoldSampler:
    """Product of synthetic manifolds, optionally padded with noise dims."""

    parts: tuple[str, ...]
    noise_std: float = 0.0
    pad_to: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))
        if not self.parts:
            raise ContractError("need at least one manifold part")
        for kind in self.parts:
            if kind not in MANIFOLD_KINDS:
                raise ContractError(
                    f"unknown manifold kind {kind!r}; "
                    f"expected one of {MANIFOLD_KINDS}")
        if self.noise_std < 0:
            raise ContractError("noise_std must be >= 0")
        base = sum(_MANIFOLD_DIM[k] for k in self.parts)
        if self.pad_to is not None and self.pad_to < base:
            raise ContractError(
                f"pad_to={self.pad_to} is below the concatenated width {base}")

    @property
    def dim(self) -> int:
        base = sum(_MANIFOLD_DIM[k] for k in self.parts)
        return base if self.pad_to is None else self.pad_to

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        arrays = [make_manifold(k, n, rng, self.noise_std)
                  for k in self.parts]
        return concat_manifolds(arrays, pad_to=self.pad_to, rng=rng)


def load_csv(path, normalize: bool = True) -> EmpiricalDistribution:
    """Load numeric rows; optional per-column normalization.

    Normalization subtracts the column mean and divides by the column
    population standard deviation (ddof 0).  A leading row with any
    non-numeric cell is treated as a header.  Errors carry 1-based line
    numbers.
    """
    rows = []
    width = None
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            row = [c.strip() for c in row]
            if not any(row):
                continue
            values = []
            numeric = True
            for cell in row:
                try:
                    values.append(float(cell))
                except ValueError:
                    numeric = False
                    break
            if not numeric:
                if lineno == 1:
                    continue  # header row
                raise ConfigError(
                    f"{path}: line {lineno}: could not parse {cell!r} as a number")
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise ConfigError(
                    f"{path}: line {lineno}: expected {width} columns, "
                    f"got {len(values)}")
            rows.append(values)
    if not rows:
        raise ConfigError(f"{path}: no numeric rows found")
    data = np.asarray(rows, dtype=np.float64)
    if not normalize:
        return EmpiricalDistribution(samples=data)
    shift = data.mean(axis=0)
    scale = data.std(axis=0)
    scale = np.where(scale < 1e-12, 1.0, scale)
    return EmpiricalDistribution(samples=(data - shift) / scale,
                                 shift=shift, scale=scale)
