"""Masked weight matrices, per-region affine maps and infinity-norm bound audits.

Inside one activation region the network is ``y = A x + b``, where ``A`` is the
product of the weight matrices with inactive rows zeroed. Between two inputs the
segment crosses regions at ``t_1 < ... < t_R``; the triangle inequality over
the pieces gives ``||y2 - y1|| <= sum_r ||A_r|| * ||x_{r+1} - x_r||``, which
:func:`segment_crossing_audit` evaluates in the infinity norm.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .linalg import inf_norm
from .network import forward
from .probe import LineProbe, Ray


@dataclass
class EffectiveMap:
    A: np.ndarray
    b: np.ndarray
    pattern: list

    def __call__(self, x):
        return self.A @ x + self.b


@dataclass
class NormReport:
    per_layer_norms: list
    product_norm: float
    effective_norms: list
    ratio_quantiles: dict
    fraction_within: float
    threshold: float = 2.0

    @property
    def fraction_within_2x(self):
        return self.fraction_within

    def to_dict(self, checkpoint_id=None):
        d = asdict(self)
        d["checkpoint_id"] = checkpoint_id
        return d


@dataclass
class CrossingAudit:
    boundary_ts: list
    segment_norms: list
    step_norms: list
    lhs: float
    rhs: float
    continuity_residuals: list = field(default_factory=list)
    margins: tuple = (float("nan"), float("nan"))

    @property
    def regions(self):
        return len(self.boundary_ts)

    @property
    def holds(self):
        return self.lhs <= self.rhs + 1e-7 * (1.0 + self.rhs)

    @property
    def max_residual(self):
        return max(self.continuity_residuals, default=0.0)

    def to_dict(self, checkpoint_id=None):
        d = asdict(self)
        d.update(checkpoint_id=checkpoint_id, holds=self.holds)
        return d


def _check_pattern(params, pattern):
    widths = params.layer_sizes[1:-1]
    if len(pattern) != len(widths) or any(np.shape(m) != (w,) for m, w in zip(pattern, widths)):
        raise ValueError(f"pattern shapes do not match hidden widths {widths}")


def masked_weights(params, pattern):
    """Hidden weight matrices with rows of inactive neurons zeroed; output layer untouched."""
    _check_pattern(params, pattern)
    out = [w * np.asarray(m, dtype=bool)[:, None] for w, m in zip(params.weights[:-1], pattern)]
    out.append(params.weights[-1].copy())
    return out


def masked_product(params, pattern):
    """W_L' ... W_1' as one (C, d) matrix."""
    ws = masked_weights(params, pattern)
    prod = ws[-1]
    for w in reversed(ws[:-1]):
        prod = prod @ w
    return prod


def map_for_pattern(params, pattern):
    """Affine map (A, b) of the region with the given activation pattern."""
    _check_pattern(params, pattern)
    g = params.weights[-1]
    b = params.biases[-1].copy()
    for l in range(params.num_layers - 2, -1, -1):
        g = g * np.asarray(pattern[l], dtype=bool)[None, :]
        b = b + g @ params.biases[l]
        g = g @ params.weights[l]
    return EffectiveMap(g, b, [np.asarray(m, dtype=bool) for m in pattern])


def effective_map(params, x):
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (params.input_dim,):
        raise ValueError(f"expected an input of dimension {params.input_dim}")
    _, pattern, _ = forward(params, x)
    return map_for_pattern(params, pattern)


def norm_distribution_report(params, sample_inputs, threshold=2.0,
                             quantiles=(0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99, 1.0)):
    """Compare ||A(x)||_inf over samples with the unmasked product norm ||W_L ... W_1||_inf."""
    xs = np.atleast_2d(np.asarray(sample_inputs, dtype=np.float64))
    if xs.shape[0] == 0 or xs.size == 0:
        raise ValueError("no sample inputs")
    per_layer = [inf_norm(w) for w in params.weights]
    prod = params.weights[-1]
    for w in reversed(params.weights[:-1]):
        prod = prod @ w
    prod_norm = inf_norm(prod)
    eff = [inf_norm(effective_map(params, x).A) for x in xs]
    ratios = np.array(eff) / prod_norm if prod_norm > 0 else np.full(len(eff), np.inf)
    qs = np.quantile(ratios, quantiles)
    return NormReport(
        per_layer_norms=per_layer,
        product_norm=prod_norm,
        effective_norms=eff,
        ratio_quantiles={f"{q:g}": float(v) for q, v in zip(quantiles, qs)},
        fraction_within=float(np.mean(ratios <= threshold)),
        threshold=threshold,
    )


def _margin(z):
    top = np.sort(z)[::-1]
    return float(top[0] - top[1]) if top.size > 1 else float("inf")


def segment_crossing_audit(params, x1, x2):
    """Walk x1 -> x2 through its activation regions and evaluate both sides of the bound."""
    x1 = np.asarray(x1, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    if np.array_equal(x1, x2):
        raise ValueError("audit needs two distinct points")
    d = x2 - x1
    ray = Ray(params, LineProbe(x1, d, -1.0, 1.0, family="audit"))

    maps, cuts = [], [0.0]
    for _, b, seg in ray.walk(0.0, 1.0):
        maps.append(map_for_pattern(params, seg.pattern))
        cuts.append(b)
    cuts[-1] = 1.0
    points = [x1 + t * d for t in cuts]
    points[0], points[-1] = x1, x2

    seg_norms = [inf_norm(m.A) for m in maps]
    steps = [float(np.max(np.abs(q - p))) for p, q in zip(points[:-1], points[1:])]
    residuals = []
    for r in range(1, len(maps)):
        left, right = maps[r - 1](points[r]), maps[r](points[r])
        residuals.append(float(np.max(np.abs(left - right)) / max(1.0, np.max(np.abs(right)))))

    y1, y2 = forward(params, x1)[0], forward(params, x2)[0]
    return CrossingAudit(
        boundary_ts=[float(t) for t in cuts[1:-1]],
        segment_norms=seg_norms,
        step_norms=steps,
        lhs=float(np.max(np.abs(y2 - y1))),
        rhs=float(sum(n * s for n, s in zip(seg_norms, steps))),
        continuity_residuals=residuals,
        margins=(_margin(y1), _margin(y2)),
    )


def write_json(path, records):
    with open(path, "w") as fh:
        json.dump(records, fh, indent=1)
    return len(records)
