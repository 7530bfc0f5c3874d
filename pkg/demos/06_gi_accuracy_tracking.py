"""Track the mean generalization interval during training.

Every 5 epochs the mean GI over a fixed set of same-class pairs is recorded
next to train and test accuracy; the correlation is computed at the end.
Equivalent CLI: geninterval train --track-gi true, then geninterval correlate.
"""
from pathlib import Path

from geninterval import experiment as ex

from _common import mnist_dir

cfg = ex.ExperimentConfig(data_dir=mnist_dir(), track_gi=True, track_pairs=100)
train, val = ex.prepare_data(cfg)
params, records = ex.train_model(cfg, train, val)
out = Path("runs/demo_tracking")
out.mkdir(parents=True, exist_ok=True)
ex.write_records(out / "epochs.csv", records)
for r in records[::4]:
    print(f"epoch {r.epoch:4d}  train {r.train_acc:.3f}  test {r.val_acc:.3f}  mean GI {r.mean_gi:.3f}")
print("r(mean GI, test acc) =", round(ex.correlation_track(records, "val_acc"), 3))
print("r(mean GI, train acc) =", round(ex.correlation_track(records, "train_acc"), 3))
