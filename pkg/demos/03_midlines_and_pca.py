"""Other probe families: triangle midlines and principal directions.

Midlines join the midpoints of two sides of a triangle of same-class
samples (range 5). PCA probes pass through the class mean along its first
principal direction, an orthogonal second direction, and a low-variance one.
A trace along one probe shows the logits bending at each region boundary.
"""
from pathlib import Path

from geninterval import experiment as ex
from geninterval import probe as pb

from _common import mnist_dir

out = Path("runs/demo_probes")
out.mkdir(parents=True, exist_ok=True)
cfg = ex.ExperimentConfig(data_dir=mnist_dir(), pairwise_max_pairs=0, midline_count=300, pca=True)
train, val = ex.prepare_data(cfg)
params, _ = ex.train_model(cfg, train, val)

fams = ex.build_probes(cfg, train)
mid = pb.gi_distribution(pb.generalization_intervals(params, fams["midline"]))
print(f"midlines: median GI {mid.median:.3f} of a possible 5, clamped {mid.clamp_fraction:.1%}")

for p, r in zip(fams["pca"], pb.generalization_intervals(params, fams["pca"])):
    print(f"{p.family:12s} left {r.left:.3f} right {r.right:.3f} regions {r.regions_crossed}")

trace = pb.output_trace(params, fams["pca"][0], n_points=301)
trace.to_csv(out / "trace_pca_first.csv")
print("class changes along the first principal direction:",
      int((trace.pred[1:] != trace.pred[:-1]).sum()))
