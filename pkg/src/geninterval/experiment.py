"""End-to-end experiment runs: data -> training -> probes -> exports -> manifest."""
from __future__ import annotations

import csv
import dataclasses
import json
import logging
import time
import zlib
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from . import bounds as bnd
from . import data as dt
from . import network as nw
from . import probe as pb

log = logging.getLogger(__name__)

DATASETS = ("mnist", "cifar10", "two_moons")
FAMILIES = ("pairwise", "pairwise_cross", "midline", "random", "pca")
RECORD_COLUMNS = ["epoch", "train_acc", "val_acc", "train_loss", "mean_gi"]


class UndefinedCorrelationError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    dataset: str = "mnist"
    data_dir: Optional[str] = None
    per_class: Optional[int] = 100
    val_per_class: Optional[int] = None
    two_moons_n: int = 400
    two_moons_train: int = 300
    two_moons_noise: float = 0.1
    label_random: float = 0.0
    downsample: int = 1
    arch: str = "3x128"
    use_bias: bool = True
    learning_rate: float = 0.01
    epochs: int = 5000
    batch_size: int = 32
    init_scale: object = "auto"
    target_train_acc: float = 0.999
    checkpoint_every: int = 5
    probe_class: int = 5
    other_class: int = 1
    pairwise_max_pairs: Optional[int] = 1000
    cross_pairs: int = 0
    midline_count: int = 0
    random_count: int = 0
    random_scale: float = 1.0
    pca: bool = False
    trace_count: int = 0
    trace_points: int = 301
    track_gi: bool = False
    track_pairs: int = 500
    audit_pairs: int = 0
    norm_samples: int = 0
    out: str = "runs/experiment"
    seed: int = 0

    def __post_init__(self):
        if self.dataset not in DATASETS:
            raise ValueError(f"unknown dataset {self.dataset!r}; expected one of {DATASETS}")
        if self.arch not in nw.ARCHITECTURES:
            raise ValueError(f"unknown architecture preset {self.arch!r}")
        if not 0.0 <= self.label_random <= 1.0:
            raise ValueError("label_random must lie in [0, 1]")
        if self.downsample not in (1, 2, 4):
            raise ValueError("downsample must be 1, 2 or 4")

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self):
        return dataclasses.asdict(self)

    def train_config(self):
        return nw.TrainConfig(learning_rate=self.learning_rate, epochs=self.epochs,
                              batch_size=self.batch_size, seed=sub_seed(self.seed, "shuffle"),
                              init_scale=self.init_scale, target_train_acc=self.target_train_acc,
                              checkpoint_every=self.checkpoint_every)


@dataclass
class RunManifest:
    config: dict
    checkpoint: Optional[str]
    files: list = field(default_factory=list)
    wall_clock: float = 0.0
    version: str = __version__
    train_size: int = 0
    summary: dict = field(default_factory=dict)

    def add(self, path, rows):
        self.files.append({"path": str(path), "rows": int(rows)})

    def write(self, path):
        with open(path, "w") as fh:
            json.dump(dataclasses.asdict(self), fh, indent=1)
        return path


def sub_seed(master, stage):
    """Independent per-stage seed derived from the master seed and the stage name."""
    ss = np.random.SeedSequence([int(master), zlib.crc32(stage.encode())])
    return int(ss.generate_state(1)[0])


def prepare_data(cfg):
    """Training and validation sets after subsampling, relabeling and downsampling."""
    if cfg.dataset == "two_moons":
        full = dt.two_moons(cfg.two_moons_n, cfg.two_moons_noise, sub_seed(cfg.seed, "moons"))
        train, val = dt.split(full, cfg.two_moons_train, sub_seed(cfg.seed, "split"))
    else:
        load = dt.load_mnist if cfg.dataset == "mnist" else dt.load_cifar
        train, val = load(cfg.data_dir, "train"), load(cfg.data_dir, "test")
        if cfg.per_class:
            train = dt.subsample_per_class(train, cfg.per_class, sub_seed(cfg.seed, "subsample"))
        if cfg.val_per_class:
            val = dt.subsample_per_class(val, cfg.val_per_class, sub_seed(cfg.seed, "val_subsample"))
    if cfg.label_random > 0:
        train = dt.randomize_labels(train, cfg.label_random, sub_seed(cfg.seed, "labels")).apply(train)
    if cfg.downsample > 1:
        train, val = dt.downsample(train, cfg.downsample), dt.downsample(val, cfg.downsample)
    return train, val


def build_model(cfg, train):
    sizes = nw.layer_sizes_for(cfg.arch, train.dim, train.num_classes)
    return nw.init_mlp(sizes, sub_seed(cfg.seed, "init"), cfg.init_scale, cfg.use_bias)


def tracking_probes(cfg, train):
    return pb.pairwise_probes(train, cfg.probe_class, max_pairs=cfg.track_pairs,
                              seed=sub_seed(cfg.seed, "track"))


def mean_gi(params, probes):
    return float(np.mean([r.gi for r in pb.generalization_intervals(params, probes)]))


def train_model(cfg, train, val):
    params = build_model(cfg, train)
    hook = None
    if cfg.track_gi:
        probes = tracking_probes(cfg, train)

        def hook(p, rec):
            rec.mean_gi = mean_gi(p, probes)

    return nw.train(params, train, val, cfg.train_config(), on_checkpoint=hook)


def build_probes(cfg, train):
    """Probe families enabled in ``cfg``, keyed by family name, in a fixed order."""
    c = cfg.probe_class
    fams = {}
    if cfg.pairwise_max_pairs != 0:
        fams["pairwise"] = pb.pairwise_probes(train, c, max_pairs=cfg.pairwise_max_pairs,
                                              seed=sub_seed(cfg.seed, "probe_pairwise"))
    if cfg.cross_pairs:
        fams["pairwise_cross"] = pb.pairwise_probes(train, c, cfg.other_class,
                                                    max_pairs=cfg.cross_pairs,
                                                    seed=sub_seed(cfg.seed, "probe_cross"))
    if cfg.midline_count:
        fams["midline"] = pb.triangle_midline_probes(train, c, cfg.midline_count,
                                                     seed=sub_seed(cfg.seed, "probe_midline"))
    if cfg.random_count:
        fams["random"] = pb.random_probes(train, c, cfg.random_count,
                                          seed=sub_seed(cfg.seed, "probe_random"),
                                          scale=cfg.random_scale)
    if cfg.pca:
        fams["pca"] = pb.pca_probes(train, c, cfg.other_class)
    return fams


def write_records(path, records):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RECORD_COLUMNS)
        for r in records:
            w.writerow([r.epoch, repr(r.train_acc), repr(r.val_acc), repr(r.train_loss),
                        "" if r.mean_gi is None else repr(r.mean_gi)])
    return len(records)


def read_records(path):
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(nw.EpochRecord(int(row["epoch"]), float(row["train_acc"]),
                                      float(row["val_acc"]), float(row["train_loss"]),
                                      float(row["mean_gi"]) if row.get("mean_gi") else None))
    return out


def correlation_track(records, against="val_acc"):
    """Pearson correlation of per-checkpoint mean GI with an accuracy series."""
    if against not in ("train_acc", "val_acc"):
        raise ValueError("against must be 'train_acc' or 'val_acc'")
    if len(records) < 3:
        raise ValueError("need at least 3 checkpoints")
    if any(r.mean_gi is None for r in records):
        raise ValueError("records lack mean_gi")
    g = np.array([r.mean_gi for r in records], dtype=np.float64)
    a = np.array([getattr(r, against) for r in records], dtype=np.float64)
    gc, ac = g - g.mean(), a - a.mean()
    sg, sa = np.sqrt(gc @ gc), np.sqrt(ac @ ac)
    if sg == 0 or sa == 0:
        raise UndefinedCorrelationError("a series has zero variance; correlation undefined")
    return float(np.clip(gc @ ac / (sg * sa), -1.0, 1.0))


def compare_distributions(gi_real, gi_random):
    """Side-by-side summary of two GI samples; ``median_ratio`` is random/real."""
    if not gi_real or not gi_random:
        raise ValueError("both GI samples must be non-empty")
    real = pb.gi_distribution(gi_real)
    rand = pb.gi_distribution(gi_random)
    ratio = rand.median / real.median if real.median > 0 else float("nan")
    return {
        "median_real": real.median, "median_random": rand.median,
        "mean_real": real.mean, "mean_random": rand.mean,
        "clamp_real": real.clamp_fraction, "clamp_random": rand.clamp_fraction,
        "median_ratio": ratio, "median_diff": rand.median - real.median,
    }


def probe_stage(cfg, params, train, out, manifest):
    summary = {}
    families = build_probes(cfg, train)
    start = 0
    for fam, probes in families.items():
        if not probes:
            continue
        results = pb.generalization_intervals(params, probes)
        path = out / f"gi_{fam}.csv"
        manifest.add(path, pb.write_gi_csv(path, probes, results, start_id=start))
        start += len(probes)
        dist = pb.gi_distribution(results)
        hpath = out / f"gi_hist_{fam}.csv"
        manifest.add(hpath, pb.write_histogram_csv(hpath, dist))
        summary[fam] = dist.summary
    spath = out / "gi_summary.json"
    with open(spath, "w") as fh:
        json.dump(summary, fh, indent=1)
    manifest.add(spath, len(summary))
    return families, summary


def trace_stage(cfg, params, families, out, manifest):
    for fam, probes in families.items():
        for k, p in enumerate(probes[:cfg.trace_count]):
            path = out / f"trace_{fam}_{k}.csv"
            manifest.add(path, pb.output_trace(params, p, cfg.trace_points).to_csv(path))


def bounds_stage(cfg, params, train, out, manifest, checkpoint_id):
    recs = {}
    if cfg.norm_samples:
        rng = np.random.default_rng(sub_seed(cfg.seed, "norm_samples"))
        idx = rng.choice(len(train), size=min(cfg.norm_samples, len(train)), replace=False)
        recs["norm_report"] = bnd.norm_distribution_report(params, train.inputs[np.sort(idx)]).to_dict(checkpoint_id)
    if cfg.audit_pairs:
        probes = pb.pairwise_probes(train, cfg.probe_class, max_pairs=cfg.audit_pairs,
                                    seed=sub_seed(cfg.seed, "audit"))
        recs["audits"] = [bnd.segment_crossing_audit(params, p.origin, p.origin + p.direction).to_dict(checkpoint_id)
                          for p in probes]
    if recs:
        path = out / "bounds.json"
        bnd.write_json(path, recs)
        manifest.add(path, len(recs.get("audits", [])) + ("norm_report" in recs))
    return recs


def run_experiment(cfg):
    """Run every configured stage and write exports plus ``manifest.json`` under ``cfg.out``."""
    t0 = time.time()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    train, val = prepare_data(cfg)
    params, records = train_model(cfg, train, val)
    ckpt = nw.save_checkpoint(params, out / "model.npz", seed=cfg.seed)
    manifest = RunManifest(config=cfg.to_dict(), checkpoint=str(ckpt), train_size=len(train))
    manifest.add(out / "epochs.csv", write_records(out / "epochs.csv", records))
    families, summary = probe_stage(cfg, params, train, out, manifest)
    trace_stage(cfg, params, families, out, manifest)
    bounds_stage(cfg, params, train, out, manifest, checkpoint_id=str(ckpt))
    manifest.summary = {
        "train_acc": records[-1].train_acc if records else None,
        "val_acc": records[-1].val_acc if records else None,
        "epochs": records[-1].epoch if records else 0,
        "gi": summary,
    }
    if cfg.track_gi and len(records) >= 3:
        try:
            manifest.summary["gi_val_correlation"] = correlation_track(records, "val_acc")
        except UndefinedCorrelationError:
            manifest.summary["gi_val_correlation"] = None
    manifest.wall_clock = time.time() - t0
    manifest.write(out / "manifest.json")
    return manifest
