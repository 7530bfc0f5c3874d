"""Exact traversal of a ReLU network along rays and generalization intervals.

Along a ray ``x(t) = origin + t * direction`` every pre-activation is affine in
``t`` inside one activation region. Propagating an (offset, slope) pair through
the layers gives the logits on that region as ``u + t * v``; region ends are
the nearest zero crossings of hidden pre-activations. Generalization
intervals walk these regions outward from ``t = 0`` and stop at the first
point where another class's affine logit overtakes the origin class.
"""
from __future__ import annotations

import csv
import itertools
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .network import forward, softmax

log = logging.getLogger(__name__)

ZERO_TOL = 1e-12
MAX_REGIONS = 10_000
PAIR_RANGE = (-1.0, 2.0)
MIDLINE_RANGE = (-2.0, 3.0)
PCA_RANGE = (-3.0, 3.0)
HIST_BINS = 60

GI_COLUMNS = ["probe_id", "family", "class", "pair_i", "pair_j", "gi", "left", "right",
              "clamped_left", "clamped_right", "regions_crossed"]


class RegionLimitWarning(RuntimeWarning):
    pass


def nudge(t):
    return 1e-9 * (1.0 + abs(t))


@dataclass(frozen=True)
class LineProbe:
    origin: np.ndarray
    direction: np.ndarray
    t_min: float = PAIR_RANGE[0]
    t_max: float = PAIR_RANGE[1]
    family: str = "custom"
    class_id: int = -1
    pair_i: int = -1
    pair_j: int = -1

    def __post_init__(self):
        o = np.asarray(self.origin, dtype=np.float64)
        d = np.asarray(self.direction, dtype=np.float64)
        if o.shape != d.shape or o.ndim != 1:
            raise ValueError("origin and direction must be vectors of equal length")
        if not np.any(d):
            raise ValueError("probe direction is zero")
        if not self.t_min < 0.0 < self.t_max:
            raise ValueError("probe range must contain t=0 strictly inside")
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "direction", d)

    def point(self, t):
        return self.origin + t * self.direction

    def reversed(self):
        return LineProbe(self.origin, -self.direction, -self.t_max, -self.t_min,
                         self.family, self.class_id, self.pair_i, self.pair_j)

    @property
    def span(self):
        return self.t_max - self.t_min


@dataclass(frozen=True)
class AffineSegment:
    t_lo: float
    t_hi: float
    u: np.ndarray  # logits at t = 0 of this region's affine map
    v: np.ndarray  # d logits / dt
    pattern: list

    def logits(self, t):
        return self.u + t * self.v


@dataclass(frozen=True)
class GIResult:
    gi: float
    left: float
    right: float
    clamped_left: bool
    clamped_right: bool
    regions_crossed: int
    origin_class: int
    span: float = PAIR_RANGE[1] - PAIR_RANGE[0]
    truncated: bool = False


class Ray:
    """Ray through a fixed network; caches the first-layer affine pre-activations."""

    def __init__(self, params, probe):
        if probe.origin.shape[0] != params.input_dim:
            raise ValueError(f"probe dimension {probe.origin.shape[0]} != {params.input_dim}")
        self.params = params
        self.probe = probe
        w, b = params.weights[0], params.biases[0]
        self._first = (w @ probe.origin + b, w @ probe.direction)

    def segment(self, t, lo=None, hi=None):
        """Affine logits of the region containing ``t``, clipped to ``[lo, hi]``."""
        p = self.params
        lo = self.probe.t_min if lo is None else lo
        hi = self.probe.t_max if hi is None else hi
        t_lo, t_hi = lo, hi
        off, slope = self._first
        pattern = []
        for l in range(p.num_layers):
            if l:
                w = p.weights[l]
                off = w @ a_off + p.biases[l]
                slope = w @ a_slope
            if l == p.num_layers - 1:
                break
            z = off + t * slope
            active = z > ZERO_TOL
            pattern.append(active)
            moving = slope != 0.0
            if moving.any():
                cross = -off[moving] / slope[moving]
                above = cross[cross > t]
                below = cross[cross < t]
                if above.size:
                    t_hi = min(t_hi, above.min())
                if below.size:
                    t_lo = max(t_lo, below.max())
            a_off = np.where(active, off, 0.0)
            a_slope = np.where(active, slope, 0.0)
        return AffineSegment(float(t_lo), float(t_hi), off, slope, pattern)

    def walk(self, t_start=0.0, t_end=None, max_regions=MAX_REGIONS):
        """Yield ``(a, b, segment)`` covering ``[t_start, t_end]`` left to right.

        The affine map of ``segment`` is valid on ``[a, b]``; consecutive pieces
        share endpoints. After ``max_regions`` boundaries the walk stops early and
        sets ``self.truncated``.
        """
        t_end = self.probe.t_max if t_end is None else t_end
        self.truncated = False
        a, seed, hops = t_start, t_start, 0
        while True:
            seg = self.segment(seed, lo=t_start, hi=t_end)
            b = seg.t_hi
            yield a, b, seg
            if b >= t_end:
                return
            hops += 1
            if hops > max_regions:
                self.truncated = True
                return
            a, seed = b, min(b + nudge(b), t_end)


def affine_segment_at(params, probe, t):
    if not probe.t_min <= t <= probe.t_max:
        raise ValueError(f"t={t} outside [{probe.t_min}, {probe.t_max}]")
    return Ray(params, probe).segment(t)


def _first_change(seg, c, a, b):
    """Earliest t in [a, b] where the argmax of ``seg`` stops being ``c``, or None."""
    gap0 = seg.u - seg.u[c]
    rate = seg.v - seg.v[c]
    at_a = gap0 + a * rate
    others = np.arange(gap0.size) != c
    # ties go to the lower index
    lost = others & ((at_a > 0) | ((at_a == 0) & (np.arange(gap0.size) < c)))
    if lost.any():
        return a
    rising = others & (rate > 0)
    if not rising.any():
        return None
    roots = -gap0[rising] / rate[rising]
    roots = roots[(roots >= a) & (roots <= b)]
    return float(roots.min()) if roots.size else None


def _extent(ray, c, t_end, budget):
    """Distance from t=0 to the first class change walking right, clamped at ``t_end``.

    Returns ``(extent, clamped, regions_crossed, truncated)``.
    """
    hops, last_b = -1, 0.0
    for a, b, seg in ray.walk(0.0, t_end, max_regions=budget):
        hops += 1
        hit = _first_change(seg, c, a, b)
        if hit is not None:
            return hit, False, hops, False
        last_b = b
    if ray.truncated:
        warnings.warn(f"generalization walk stopped after {budget} regions at t={last_b}",
                      RegionLimitWarning, stacklevel=3)
        return last_b, True, hops, True
    return t_end, True, hops, False


def generalization_interval(params, probe, max_regions=MAX_REGIONS):
    """Length of the stable-classification interval through ``probe.origin``.

    ``right`` is the sup of e in [0, t_max] with the predicted class constant on
    [0, e]; ``left`` mirrors it toward ``t_min``. Extents are in units of
    ``probe.direction``.
    """
    logits0 = forward(params, probe.origin)[0]
    c = int(np.argmax(logits0))
    right, clamp_r, hops_r, trunc_r = _extent(Ray(params, probe), c, probe.t_max, max_regions)
    back = probe.reversed()
    left, clamp_l, hops_l, trunc_l = _extent(Ray(params, back), c, back.t_max,
                                             max(max_regions - hops_r, 0))
    return GIResult(gi=left + right, left=left, right=right, clamped_left=clamp_l,
                    clamped_right=clamp_r, regions_crossed=hops_l + hops_r, origin_class=c,
                    span=probe.span, truncated=trunc_l or trunc_r)


def generalization_intervals(params, probes, max_regions=MAX_REGIONS):
    return [generalization_interval(params, p, max_regions) for p in probes]


class ProbeList(list):
    """A list of probes that also remembers how many candidates were skipped."""

    def __init__(self, items=(), skipped=0):
        super().__init__(items)
        self.skipped = skipped


def _class_points(ds, c, minimum=1):
    idx = ds.class_indices(c)
    if idx.size < minimum:
        raise ValueError(f"class {c} has {idx.size} samples; need at least {minimum}")
    return idx


def _sample_pairs(n_a, n_b, same, max_pairs, rng):
    total = n_a * (n_a - 1) // 2 if same else n_a * n_b
    if max_pairs is None or total <= max_pairs:
        if same:
            return list(itertools.combinations(range(n_a), 2))
        return list(itertools.product(range(n_a), range(n_b)))
    flat = np.sort(rng.choice(total, size=max_pairs, replace=False))
    if same:
        # row-major enumeration of i < j
        rows = np.cumsum([0] + [n_a - 1 - i for i in range(n_a - 1)])
        i = np.searchsorted(rows, flat, side="right") - 1
        j = flat - rows[i] + i + 1
        return list(zip(i.tolist(), j.tolist()))
    return list(zip((flat // n_b).tolist(), (flat % n_b).tolist()))


def pairwise_probes(ds, class_a, class_b=None, max_pairs=None, seed=0, t_range=PAIR_RANGE):
    """Rays from one sample toward another: origin x_i, direction x_j - x_i.

    Same-class mode (``class_b`` None or equal) uses unordered pairs; cross-class
    mode pairs every sample of ``class_a`` with every sample of ``class_b``.
    """
    class_b = class_a if class_b is None else class_b
    same = class_a == class_b
    ia = _class_points(ds, class_a, 2 if same else 1)
    ib = ia if same else _class_points(ds, class_b)
    pairs = _sample_pairs(ia.size, ib.size, same, max_pairs, np.random.default_rng(seed))
    family = "pairwise" if same else "pairwise_cross"
    out, skipped = [], 0
    for a, b in pairs:
        i, j = int(ia[a]), int(ib[b])
        d = ds.inputs[j] - ds.inputs[i]
        if not np.any(d):
            skipped += 1
            continue
        out.append(LineProbe(ds.inputs[i], d, *t_range, family=family, class_id=class_a,
                             pair_i=i, pair_j=j))
    if skipped:
        log.info("pairwise_probes: skipped %d duplicate pairs", skipped)
    return ProbeList(out, skipped)


def triangle_midline_probes(ds, class_id, count, seed=0, t_range=MIDLINE_RANGE):
    """Midlines of random same-class triangles (x1, x2, x3).

    origin = (x1 + x2)/2, direction = (x1 + x3)/2 - origin = (x3 - x2)/2.
    ``pair_i``/``pair_j`` record x2 and x3; x1 is not exported.
    """
    idx = _class_points(ds, class_id, 3)
    rng = np.random.default_rng(seed)
    out, skipped = [], 0
    attempts = 0
    while len(out) < count and attempts < 20 * count + 100:
        attempts += 1
        i1, i2, i3 = (int(k) for k in rng.choice(idx, size=3, replace=False))
        x1, x2, x3 = ds.inputs[i1], ds.inputs[i2], ds.inputs[i3]
        if (np.array_equal(x1, x2) or np.array_equal(x1, x3) or np.array_equal(x2, x3)):
            skipped += 1
            continue
        origin = 0.5 * (x1 + x2)
        out.append(LineProbe(origin, 0.5 * (x1 + x3) - origin, *t_range, family="midline",
                             class_id=class_id, pair_i=i2, pair_j=i3))
    return ProbeList(out, skipped)


def pca_probes(ds, class_id, other_class_id, n_components=None, t_range=PCA_RANGE):
    """Three rays through the class mean.

    ``pca_first``: first principal component scaled to sqrt(lambda_1).
    ``pca_normal``: mean(other) - mean(class) with the first component removed.
    ``pca_minor``: smallest retained component, also scaled to sqrt(lambda_1).
    """
    idx = _class_points(ds, class_id, 2)
    x = ds.inputs[idx]
    k = n_components or min(x.shape[0] - 1, x.shape[1])
    k = max(1, min(k, x.shape[0], x.shape[1]))
    try:
        pca = linalg.principal_components(x, k)
    except linalg.RankDeficientError as err:
        pca = err.valid
    if len(pca) < 2:
        raise linalg.RankDeficientError(
            f"class {class_id} spans fewer than 2 principal directions", rank=len(pca),
            valid=pca, computed=pca)
    mean = pca.mean
    scale = np.sqrt(pca.eigenvalues[0])
    first = pca.components[0] * scale
    other_mean = ds.inputs[_class_points(ds, other_class_id)].mean(axis=0)
    normal = linalg.orthogonalize(other_mean - mean, pca.components[0])
    minor = pca.components[-1] * scale
    tag = dict(class_id=class_id, pair_i=-1, pair_j=-1)
    return [LineProbe(mean, first, *t_range, family="pca_first", **tag),
            LineProbe(mean, normal, *t_range, family="pca_normal", **tag),
            LineProbe(mean, minor, *t_range, family="pca_minor", **tag)]


def mean_pair_distance(ds, class_id, seed=0, max_pairs=500):
    idx = _class_points(ds, class_id, 1)
    if idx.size < 2:
        return 0.0
    pairs = _sample_pairs(idx.size, idx.size, True, max_pairs, np.random.default_rng(seed))
    d = [np.linalg.norm(ds.inputs[idx[a]] - ds.inputs[idx[b]]) for a, b in pairs]
    return float(np.mean(d))


def random_probes(ds, class_id, count, seed=0, scale=1.0, t_range=PAIR_RANGE):
    """Gaussian directions from random class samples, with norm scale * mean pair distance."""
    idx = _class_points(ds, class_id, 1)
    if count == 0:
        return ProbeList()
    rng = np.random.default_rng(seed)
    length = scale * mean_pair_distance(ds, class_id, seed=seed)
    if not length > 0:
        raise ValueError("class samples coincide; no length scale for random directions")
    out = []
    for _ in range(count):
        i = int(rng.choice(idx))
        d = rng.standard_normal(ds.dim)
        d *= length / np.linalg.norm(d)
        out.append(LineProbe(ds.inputs[i], d, *t_range, family="random", class_id=class_id,
                             pair_i=i, pair_j=-1))
    return ProbeList(out)


@dataclass
class Trace:
    t: np.ndarray
    logits: np.ndarray
    softmax: np.ndarray
    penultimate_norm: np.ndarray
    pred: np.ndarray

    def __len__(self):
        return self.t.size

    def to_csv(self, path):
        c = self.logits.shape[1]
        header = ["t", *(f"logit_{k}" for k in range(c)), *(f"softmax_{k}" for k in range(c)),
                  "pred", "penultimate_norm"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for r in range(len(self)):
                w.writerow([repr(float(self.t[r])), *map(repr, self.logits[r].tolist()),
                            *map(repr, self.softmax[r].tolist()), int(self.pred[r]),
                            repr(float(self.penultimate_norm[r]))])
        return len(self)


def output_trace(params, probe, n_points=301):
    """Network outputs at ``n_points`` evenly spaced t in [t_min, t_max]."""
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    t = np.linspace(probe.t_min, probe.t_max, n_points)
    # make t=0 an exact grid point when it is representable on this grid
    k = np.argmin(np.abs(t))
    if abs(t[k]) < 1e-12 * probe.span:
        t[k] = 0.0
    z, _, pen = forward(params, probe.origin[None, :] + t[:, None] * probe.direction[None, :])
    return Trace(t, z, softmax(z), np.linalg.norm(pen, axis=1), np.argmax(z, axis=1))


@dataclass
class GIDistribution:
    values: np.ndarray
    counts: np.ndarray
    edges: np.ndarray
    mean: float
    median: float
    q1: float
    q3: float
    clamp_fraction: float
    summary: dict = field(default_factory=dict)

    @property
    def iqr(self):
        return self.q3 - self.q1


def gi_distribution(results, bins=HIST_BINS, span=None):
    """Fixed-width histogram of GI values over [0, span] plus summary statistics."""
    if not results:
        raise ValueError("no GI results")
    values = np.array([r.gi for r in results])
    span = max(r.span for r in results) if span is None else span
    counts, edges = np.histogram(np.clip(values, 0.0, span), bins=bins, range=(0.0, span))
    q1, med, q3 = np.quantile(values, [0.25, 0.5, 0.75])
    clamp = float(np.mean([r.clamped_left and r.clamped_right for r in results]))
    dist = GIDistribution(values, counts, edges, float(values.mean()), float(med), float(q1),
                          float(q3), clamp)
    dist.summary = {"n": int(values.size), "mean": dist.mean, "median": dist.median,
                    "q1": dist.q1, "q3": dist.q3, "clamp_fraction": clamp, "span": float(span)}
    return dist


def write_gi_csv(path, probes, results, start_id=0):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(GI_COLUMNS)
        for k, (p, r) in enumerate(zip(probes, results)):
            w.writerow([start_id + k, p.family, p.class_id, p.pair_i, p.pair_j, repr(r.gi),
                        repr(r.left), repr(r.right), int(r.clamped_left), int(r.clamped_right),
                        r.regions_crossed])
    return len(results)


def write_histogram_csv(path, dist):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bin_lo", "bin_hi", "count"])
        for lo, hi, n in zip(dist.edges[:-1], dist.edges[1:], dist.counts):
            w.writerow([repr(float(lo)), repr(float(hi)), int(n)])
    return len(dist.counts)
