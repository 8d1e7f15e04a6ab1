"""Datasets: label folding, separability, CSV I/O, and built-in generators."""

from __future__ import annotations

import csv as _csv
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, ParseError

# Built-in instance from the synthetic two-class experiment: four points on
# the margin at (0.5,1.5), (1.5,0.5) and their negations, max-margin
# direction (1,1)/sqrt(2) with margin sqrt(2).
FIGURE1_SUPPORTS = np.array([[0.5, 1.5], [1.5, 0.5], [-0.5, -1.5], [-1.5, -0.5]]).T
FIGURE1_LABELS = np.array([1, 1, -1, -1])
FIGURE1_W_HAT = np.array([0.5, 0.5])
# random points are rejection-sampled to keep this folded margin
FIGURE1_MIN_MARGIN = 1.05
FIGURE1_BOX = 3.0


@dataclass(frozen=True)
class Dataset:
    """Label-folded samples: column n is y_n * x_n, so separability means
    some w has w'x_n > 0 for every column."""

    points: np.ndarray  # d x N
    provenance: str = "custom"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.size == 0:
            raise InputError("dataset must contain at least one point")
        if not np.all(np.isfinite(pts)):
            raise InputError("dataset contains non-finite entries")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def dim(self) -> int:
        return self.points.shape[0]

    @property
    def count(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class SeparabilityCertificate:
    separable: bool
    witness: np.ndarray | None  # min_n witness'x_n >= 1 when separable


def fold_labels(raw_points, labels, provenance="custom") -> Dataset:
    """Fold labels into the points: column n becomes labels[n] * x_n."""
    raw = np.atleast_2d(np.asarray(raw_points, dtype=float))
    labels = np.asarray(labels)
    if labels.shape != (raw.shape[1],):
        raise InputError("labels must match the number of points")
    if not np.all(np.isin(labels, (-1, 1))):
        raise InputError("labels must be -1 or +1")
    return Dataset(raw * labels.astype(float)[None, :], provenance=provenance)


def check_separability(data: Dataset) -> SeparabilityCertificate:
    """Decide feasibility of w'x_n >= 1 (scale-invariant form of strict
    positive margin) via the hard-margin solver."""
    from .margin import solve_hard_margin
    from .errors import InfeasibleError

    try:
        sol = solve_hard_margin(data)
    except InfeasibleError:
        return SeparabilityCertificate(separable=False, witness=None)
    return SeparabilityCertificate(separable=True, witness=sol.w_hat)


def make_figure1(seed: int, scale_x2: float = 1.0) -> Dataset:
    """The 16-point synthetic dataset: 4 fixed margin points plus 12 seeded
    random points (6 per class), each with folded margin above
    FIGURE1_MIN_MARGIN under w = (0.5, 0.5).

    ``scale_x2`` multiplies every second coordinate (the adaptive-optimizer
    contrast experiment uses 20).
    """
    rng = np.random.default_rng(seed)
    cols = [FIGURE1_SUPPORTS * FIGURE1_LABELS.astype(float)[None, :]]
    # 6 raw points per class; folding by the class label cancels the sign,
    # so both classes contribute the same positive-margin region
    for _cls in (1, -1):
        got = 0
        while got < 6:
            p = rng.uniform(0.0, FIGURE1_BOX, size=2)
            if FIGURE1_W_HAT @ p > FIGURE1_MIN_MARGIN:
                cols.append(p[:, None])
                got += 1
    pts = np.hstack(cols)
    pts = pts * np.array([1.0, scale_x2])[:, None]
    tag = "figure1" if scale_x2 == 1.0 else "figure1_scaled"
    return Dataset(
        pts,
        provenance=tag,
        meta={
            "seed": int(seed),
            "scale_x2": float(scale_x2),
            "box": FIGURE1_BOX,
            "min_margin": FIGURE1_MIN_MARGIN,
        },
    )


def make_degenerate3d() -> Dataset:
    """Three folded points whose max-margin vector (1,0,0) puts all of them
    on the margin while the dual forces the third coefficient to zero: the
    smallest instance exercising the iterated-log chain."""
    pts = np.array([[1.0, 1.0, 0.0], [1.0, -1.0, 0.0], [1.0, 0.0, 1.0]]).T
    return Dataset(pts, provenance="degenerate3d")


def make_random_separable(dim: int, count: int, seed: int, margin: float = 0.2) -> Dataset:
    """Random folded points with margin >= ``margin`` along a random unit
    direction (so the instance is certainly separable)."""
    rng = np.random.default_rng(seed)
    u = rng.normal(size=dim)
    u /= np.linalg.norm(u)
    pts = np.empty((dim, count))
    got = 0
    while got < count:
        p = rng.normal(size=dim)
        if u @ p >= margin:
            pts[:, got] = p
            got += 1
    return Dataset(pts, provenance="random", meta={"seed": int(seed), "margin": margin})


def save_csv(data: Dataset, path, labels=None) -> None:
    """Write rows x_1,...,x_d,label. Folded datasets are written with
    label +1 unless explicit labels are given (points are then unfolded)."""
    if labels is None:
        labels = np.ones(data.count, dtype=int)
    labels = np.asarray(labels, dtype=int)
    with open(path, "w", newline="") as fh:
        writer = _csv.writer(fh)
        for n in range(data.count):
            raw = data.points[:, n] * labels[n]
            writer.writerow([repr(float(v)) for v in raw] + [int(labels[n])])


def load_csv(path) -> Dataset:
    """Read rows x_1,...,x_d,label (label in {-1,+1}); an optional header is
    detected by a non-numeric first row. Returns the label-folded dataset."""
    raw_cols = []
    labels = []
    dim = None
    with open(path, newline="") as fh:
        for i, row in enumerate(_csv.reader(fh), start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if i == 1:
                try:
                    float(row[0])
                except ValueError:
                    continue  # header row
            if len(row) < 2:
                raise ParseError("expected at least one coordinate and a label", row=i)
            try:
                vals = [float(v) for v in row]
            except ValueError as exc:
                raise ParseError(f"non-numeric field ({exc})", row=i)
            *coords, label = vals
            if label not in (-1.0, 1.0):
                raise ParseError(f"label must be -1 or 1, got {label}", row=i)
            if dim is None:
                dim = len(coords)
            elif len(coords) != dim:
                raise ParseError(f"expected {dim} coordinates, got {len(coords)}", row=i)
            raw_cols.append(coords)
            labels.append(int(label))
    if not raw_cols:
        raise ParseError("empty file", row=0)
    return fold_labels(np.array(raw_cols).T, labels, provenance="csv")


GENERATORS = {
    "figure1": lambda seed=0, **kw: make_figure1(seed, **kw),
    "figure1_scaled": lambda seed=0: make_figure1(seed, scale_x2=20.0),
    "degenerate3d": lambda seed=0: make_degenerate3d(),
    "random": lambda seed=0, dim=2, count=6, margin=0.2: make_random_separable(dim, count, seed, margin),
}


def generate(name: str, seed: int = 0, **params) -> Dataset:
    if name not in GENERATORS:
        raise InputError(f"unknown generator '{name}' (expected one of {sorted(GENERATORS)})")
    return GENERATORS[name](seed=seed, **params)
