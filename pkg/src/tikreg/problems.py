"""Synthetic test problems, datasets, file formats and error statistics.

Randomness comes from numpy's Philox4x64 counter-based generator keyed by
``SeedSequence([seed, role])``; Gaussian noise is drawn by Box-Muller from its
uniform stream, so a dataset is a pure function of its spec, role and count.
"""

import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigError, ShapeMismatch, SourceError, ZeroReference
from .filters import GsvdBasis, SvdBasis
from .gsvd import gsvd
from .structured import (
    build_spectral_operator,
    convolve_bc,
    dense_operator,
    gaussian_psf,
)

__all__ = [
    "ProblemSpec",
    "Problem",
    "Dataset",
    "DatasetItem",
    "BoxStats",
    "make_rng",
    "box_muller",
    "first_derivative_matrix",
    "second_derivative_matrix",
    "phantom_1d",
    "phantom_2d",
    "generate_dataset",
    "relative_error",
    "summary_stats",
    "read_csv",
    "write_csv",
    "read_pgm",
    "write_pgm",
]

ROLES = {"training": 0, "validation": 1, "test": 2}
KINDS = ("deconv1d", "deblur2d")
REGULARIZERS_1D = ("identity", "d1", "d2")


def make_rng(seed, role="training"):
    """Philox-backed generator for ``(seed, role)``."""
    if role not in ROLES:
        raise ConfigError(f"role must be one of {sorted(ROLES)}, got {role!r}")
    ss = np.random.SeedSequence([int(seed), ROLES[role]])
    return np.random.Generator(np.random.Philox(ss))


def box_muller(rng, n):
    """``n`` standard normal draws from the generator's uniform stream."""
    h = (n + 1) // 2
    u1 = 1.0 - rng.random(h)  # (0, 1]
    u2 = rng.random(h)
    r = np.sqrt(-2.0 * np.log(u1))
    z = np.concatenate([r * np.cos(2 * np.pi * u2), r * np.sin(2 * np.pi * u2)])
    return z[:n]


def first_derivative_matrix(n):
    """The (n+1) x n bidiagonal first-difference matrix (1 on the diagonal, -1 below)."""
    L = np.zeros((n + 1, n))
    i = np.arange(n)
    L[i, i] = 1.0
    L[i + 1, i] = -1.0
    return L


def second_derivative_matrix(n):
    """The (n-2) x n second-difference matrix."""
    L = np.zeros((n - 2, n))
    i = np.arange(n - 2)
    L[i, i] = 1.0
    L[i, i + 1] = -2.0
    L[i, i + 2] = 1.0
    return L


@dataclass(frozen=True)
class ProblemSpec:
    """Problem definition (schema in the README, section Configuration)."""

    kind: str
    shape: tuple
    psf: dict = field(default_factory=lambda: {"kind": "gaussian", "variance": 1.0})
    bc: str = "zero"
    noise_range: tuple = (0.0, 0.0)
    seed: int = 0
    regularizer: str = "d1"
    stencils: tuple = ("l1", "l2", "l3", "l4")
    sources: Optional[tuple] = None
    columns: Optional[int] = None
    augment: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"problem.kind must be one of {KINDS}, got {self.kind!r}")
        shape = tuple(int(s) for s in self.shape)
        object.__setattr__(self, "shape", shape)
        if any(s < 1 for s in shape) or len(shape) != (1 if self.kind == "deconv1d" else 2):
            raise ConfigError(f"problem.shape {shape} invalid for {self.kind}")
        lo, hi = (float(v) for v in self.noise_range)
        if not 0 <= lo <= hi < 1:
            raise ConfigError(f"problem.noise_range must satisfy 0 <= lo <= hi < 1, got {lo, hi}")
        object.__setattr__(self, "noise_range", (lo, hi))
        object.__setattr__(self, "stencils", tuple(self.stencils))
        if self.sources is not None:
            object.__setattr__(self, "sources", tuple(str(s) for s in self.sources))
        if self.psf.get("kind") != "gaussian" or set(self.psf) - {"kind", "variance"}:
            raise ConfigError(f"problem.psf must be {{kind: gaussian, variance}}, got {self.psf}")
        if not float(self.psf.get("variance", 1.0)) > 0:
            raise ConfigError("problem.psf.variance must be positive")
        if self.kind == "deconv1d":
            if self.bc != "zero":
                raise ConfigError("deconv1d uses zero boundary conditions")
            if self.regularizer not in REGULARIZERS_1D:
                raise ConfigError(f"problem.regularizer must be one of {REGULARIZERS_1D}")
        elif self.bc not in ("periodic", "reflexive"):
            raise ConfigError("deblur2d needs bc 'periodic' or 'reflexive'")

    @classmethod
    def from_json(cls, d):
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"problem: unknown keys {sorted(extra)}")
        if "kind" not in d or "shape" not in d:
            raise ConfigError("problem: 'kind' and 'shape' are required")
        d = dict(d)
        for key in ("shape", "noise_range", "stencils", "sources"):
            if key in d and d[key] is not None:
                if not isinstance(d[key], (list, tuple)):
                    raise ConfigError(f"problem.{key} must be a list")
                d[key] = tuple(d[key])
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(f"problem: {exc}") from exc

    def to_json(self):
        d = asdict(self)
        for key in ("shape", "noise_range", "stencils", "sources"):
            if d[key] is not None:
                d[key] = list(d[key])
        return d


class Problem:
    """Forward operator and regularizers built from a :class:`ProblemSpec`."""

    def __init__(self, spec):
        self.spec = spec
        var = float(spec.psf.get("variance", 1.0))
        self.psf, self.center = gaussian_psf(spec.shape, var)
        self.n = int(np.prod(spec.shape))
        self._gsvd = None
        self._svd = None
        if spec.kind == "deconv1d":
            self.A = dense_operator(self.psf, self.center, spec.shape, "zero")
            self.op = None
        else:
            self.A = None
            self.op = build_spectral_operator(
                self.psf, spec.bc, spec.shape, spec.stencils, self.center
            )

    @property
    def L(self):
        n = self.n
        return {
            "identity": lambda: np.eye(n),
            "d1": lambda: first_derivative_matrix(n),
            "d2": lambda: second_derivative_matrix(n),
        }[self.spec.regularizer]()

    def forward(self, X):
        """Blur a batch of vectorized signals/images (rows)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        grid = X.reshape((X.shape[0],) + self.spec.shape)
        return convolve_bc(grid, self.psf, self.center, self.spec.bc).reshape(X.shape)

    def gsvd_basis(self):
        if self.A is None:
            raise ConfigError("the GSVD path needs a dense (deconv1d) problem")
        if self._gsvd is None:
            self._gsvd = GsvdBasis(gsvd(self.A, self.L))
        return self._gsvd

    def svd_basis(self):
        if self.A is None:
            raise ConfigError("the SVD path needs a dense (deconv1d) problem")
        if self._svd is None:
            self._svd = SvdBasis(self.A)
        return self._svd

    def transform_basis(self, select=None):
        if self.op is None:
            raise ConfigError("the transform path needs a deblur2d problem")
        return self.op.basis(select)


def phantom_1d(rng, n):
    """Piecewise-smooth nonnegative signal: a few polynomial pieces with jumps."""
    margin = min(8, n // 8)
    inner = np.arange(max(margin, 1), n - margin)
    k = min(int(rng.integers(3, 9)), max(inner.size, 1))
    cuts = np.sort(rng.choice(inner, size=k - 1, replace=False)) if n > 1 else np.array([], int)
    edges = np.concatenate([[0], cuts, [n]])
    t = np.linspace(0.0, 1.0, n)
    x = np.zeros(n)
    for a, b in zip(edges[:-1], edges[1:]):
        level = rng.uniform(0.0, 1.0)
        slope = rng.uniform(-0.5, 0.5)
        curv = rng.uniform(-1.0, 1.0)
        tc = t[a:b] - t[a:b].mean()
        x[a:b] = level + slope * tc + curv * tc**2
    return np.clip(x, 0.0, 1.0)


def phantom_2d(rng, shape, margin=None):
    """Satellite-like object: bright body and panels on a black background."""
    H, W = shape
    margin = max(2, min(H, W) // 6) if margin is None else margin
    img = np.zeros(shape)
    yy, xx = np.mgrid[0:H, 0:W]
    cy = rng.uniform(H / 2 - 1, H / 2 + 1)
    cx = rng.uniform(W / 2 - 1, W / 2 + 1)
    inner_h, inner_w = H - 2 * margin, W - 2 * margin
    # body: an ellipse
    ry = rng.uniform(0.15, 0.3) * inner_h
    rx = rng.uniform(0.15, 0.3) * inner_w
    body = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1
    img[body] = rng.uniform(0.6, 1.0)
    # panels: two bars along a random axis
    horizontal = rng.random() < 0.5
    half_len = rng.uniform(0.35, 0.5) * (inner_w if horizontal else inner_h)
    thick = max(1.0, rng.uniform(0.08, 0.16) * (inner_h if horizontal else inner_w))
    val = rng.uniform(0.3, 0.7)
    if horizontal:
        panel = (np.abs(yy - cy) <= thick / 2) & (np.abs(xx - cx) <= half_len)
    else:
        panel = (np.abs(xx - cx) <= thick / 2) & (np.abs(yy - cy) <= half_len)
    img[panel & ~body] = val
    # a few small bright details
    for _ in range(int(rng.integers(0, 3))):
        py = rng.uniform(cy - ry, cy + ry)
        px = rng.uniform(cx - rx, cx + rx)
        spot = (yy - py) ** 2 + (xx - px) ** 2 <= rng.uniform(0.5, 2.0)
        img[spot] = 1.0
    inside = (yy >= margin) & (yy < H - margin) & (xx >= margin) & (xx < W - margin)
    return img * inside


@dataclass
class DatasetItem:
    x: np.ndarray
    b: np.ndarray
    noise_level: float


@dataclass
class Dataset:
    items: list
    role: str
    spec: ProblemSpec

    @property
    def X(self):
        return np.array([it.x for it in self.items])

    @property
    def B(self):
        return np.array([it.b for it in self.items])

    @property
    def noise_levels(self):
        return np.array([it.noise_level for it in self.items])

    def __len__(self):
        return len(self.items)

    def head(self, k):
        return Dataset(self.items[:k], self.role, self.spec)

    def write(self, directory):
        """CSV arrays (one sample per row) plus ``manifest.json``."""
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        write_csv(d / "x_true.csv", self.X, prefix="x")
        write_csv(d / "b.csv", self.B, prefix="b")
        manifest = {
            "version": 1,
            "role": self.role,
            "spec": self.spec.to_json(),
            "items": [
                {"x": "x_true.csv", "b": "b.csv", "row": k, "noise_level": float(it.noise_level)}
                for k, it in enumerate(self.items)
            ],
        }
        (d / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
        return d / "manifest.json"

    @classmethod
    def read(cls, directory):
        d = Path(directory)
        if d.is_file():
            d = d.parent
        try:
            manifest = json.loads((d / "manifest.json").read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise SourceError(f"{d / 'manifest.json'}: {exc}") from exc
        spec = ProblemSpec.from_json(manifest["spec"])
        cache = {}
        items = []
        for it in manifest["items"]:
            for key in ("x", "b"):
                if it[key] not in cache:
                    cache[it[key]] = read_csv(d / it[key])
            x = cache[it["x"]][it["row"]]
            b = cache[it["b"]][it["row"]]
            items.append(DatasetItem(x, b, float(it["noise_level"])))
        return cls(items, manifest.get("role", "training"), spec)


def _source_signals(spec):
    """Yield true signals/images from the ProblemSpec's source files."""
    out = []
    for path in spec.sources:
        p = str(path)
        if p.lower().endswith(".pgm"):
            img = read_pgm(p)
            if spec.kind == "deconv1d":
                n = spec.shape[0]
                if img.shape[0] != n:
                    raise SourceError(f"{p}: image height {img.shape[0]} != signal length {n}")
                cols = np.arange(img.shape[1])
                if spec.columns:
                    cols = np.unique(np.linspace(0, img.shape[1] - 1, spec.columns).astype(int))
                out.extend(img[:, j].copy() for j in cols)
            else:
                if img.shape != spec.shape:
                    raise SourceError(f"{p}: image shape {img.shape} != {spec.shape}")
                out.append(img)
        elif p.lower().endswith(".csv"):
            rows = read_csv(p)
            if rows.shape[1] != int(np.prod(spec.shape)):
                raise SourceError(f"{p}: rows of length {rows.shape[1]} do not match {spec.shape}")
            out.extend(r.reshape(spec.shape) for r in rows)
        else:
            raise SourceError(f"{p}: unsupported source format (use .pgm or .csv)")
    if spec.augment and spec.kind == "deblur2d":
        aug = []
        for img in out:
            for k in range(4):
                r = np.rot90(img, k)
                if r.shape == img.shape:
                    aug.append(r)
                    aug.append(np.flip(r, axis=1))
        out = aug
    return out


def generate_dataset(spec, count, role="training", problem=None):
    """Blur-and-noise dataset of `count` items.

    True signals come from ``spec.sources`` (cycled in order) or from the
    builtin phantom generators. Each item gets white Gaussian noise scaled so
    that ``||noise||^2 / ||A x||^2`` equals a uniform draw from
    ``spec.noise_range``.
    """
    if count < 1:
        raise ConfigError("count must be >= 1")
    problem = problem or Problem(spec)
    rng = make_rng(spec.seed, role)
    sources = _source_signals(spec) if spec.sources else None
    if sources is not None and not sources:
        raise SourceError("no signals found in the configured sources")
    lo, hi = spec.noise_range
    items = []
    for k in range(count):
        if sources is not None:
            x = np.asarray(sources[k % len(sources)], dtype=float)
        elif spec.kind == "deconv1d":
            x = phantom_1d(rng, spec.shape[0])
        else:
            x = phantom_2d(rng, spec.shape)
        x = x.ravel()
        Ax = problem.forward(x)[0]
        level = rng.uniform(lo, hi) if hi > 0 else 0.0
        noise = box_muller(rng, Ax.size)
        if level > 0:
            noise *= np.sqrt(level * (Ax @ Ax) / (noise @ noise))
            realized = float((noise @ noise) / (Ax @ Ax))
        else:
            noise[:] = 0.0
            realized = 0.0
        items.append(DatasetItem(x, Ax + noise, realized))
    return Dataset(items, role, spec)


def relative_error(x, x_true, rho):
    """``rho(x - x_true) / rho(x_true)`` (rows of a batch give a vector)."""
    x = np.asarray(x, dtype=float)
    x_true = np.asarray(x_true, dtype=float)
    ref = rho.value(x_true)
    if np.any(np.asarray(ref) <= 0):
        raise ZeroReference("reference has zero error measure")
    return rho.value(x - x_true) / ref


@dataclass(frozen=True)
class BoxStats:
    median: float
    q25: float
    q75: float
    whisker_lo: float
    whisker_hi: float
    outliers: tuple
    mean: float
    std: float

    def row(self):
        return {
            "median": self.median,
            "q25": self.q25,
            "q75": self.q75,
            "whisker_lo": self.whisker_lo,
            "whisker_hi": self.whisker_hi,
            "n_outliers": len(self.outliers),
            "mean": self.mean,
            "std": self.std,
        }


def summary_stats(errors):
    """Box-plot statistics (linear-interpolation quartiles, 1.5 IQR whiskers)."""
    e = np.asarray(errors, dtype=float).ravel()
    if e.size == 0:
        raise ValueError("summary_stats needs at least one value")
    q25, med, q75 = np.percentile(e, [25, 50, 75])
    iqr = q75 - q25
    lo_fence, hi_fence = q25 - 1.5 * iqr, q75 + 1.5 * iqr
    inside = e[(e >= lo_fence) & (e <= hi_fence)]
    outliers = tuple(float(v) for v in np.sort(e[(e < lo_fence) | (e > hi_fence)]))
    return BoxStats(
        median=float(med),
        q25=float(q25),
        q75=float(q75),
        whisker_lo=float(inside.min()),
        whisker_hi=float(inside.max()),
        outliers=outliers,
        mean=float(e.mean()),
        std=float(e.std()),
    )


def write_csv(path, rows, prefix="v"):
    """One sample per row, header ``v0,v1,...``; values round-trip exactly."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    header = ",".join(f"{prefix}{j}" for j in range(rows.shape[1]))
    with open(path, "w", newline="") as fh:
        fh.write(header + "\n")
        for r in rows:
            fh.write(",".join(repr(float(v)) for v in r) + "\n")


def read_csv(path):
    try:
        with open(path) as fh:
            fh.readline()
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
    except (OSError, ValueError) as exc:
        raise SourceError(f"{path}: {exc}") from exc
    return data


def write_pgm(path, img):
    """8-bit binary PGM (P5); values are clipped to [0, 1] and quantized."""
    img = np.asarray(img, dtype=float)
    if img.ndim != 2:
        raise ShapeMismatch("PGM images must be 2D")
    data = np.round(np.clip(img, 0.0, 1.0) * 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def read_pgm(path):
    """Read a binary PGM (P5, 8 or 16 bit) into floats in [0, 1]."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise SourceError(f"{path}: {exc}") from exc
    tokens, pos = [], 0
    while len(tokens) < 4:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise SourceError(f"{path}: truncated PGM header")
        tokens.append(raw[start:pos])
    pos += 1
    if tokens[0] != b"P5":
        raise SourceError(f"{path}: not a binary PGM (P5) file")
    try:
        w, h, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise SourceError(f"{path}: bad PGM header") from exc
    dtype = np.uint8 if maxval < 256 else np.dtype(">u2")
    need = w * h * np.dtype(dtype).itemsize
    if len(raw) - pos < need:
        raise SourceError(f"{path}: expected {need} bytes of pixel data")
    data = np.frombuffer(raw[pos : pos + need], dtype=dtype).reshape(h, w)
    return data.astype(float) / maxval
