"""Two moons: a 2-D problem where the effect of random labels is easy to see.

With true labels same-class lines stay inside one decision region; with
random labels the network carves the plane into many small pieces.
"""
import numpy as np

from geninterval import experiment as ex
from geninterval import probe as pb

for frac in (0.0, 1.0):
    cfg = ex.ExperimentConfig(dataset="two_moons", probe_class=0, label_random=frac,
                              epochs=2000, pairwise_max_pairs=500)
    train, val = ex.prepare_data(cfg)
    params, records = ex.train_model(cfg, train, val)
    gis = pb.generalization_intervals(params, ex.build_probes(cfg, train)["pairwise"])
    print(f"label_random={frac:g}: train acc {records[-1].train_acc:.3f}, "
          f"median GI {np.median([g.gi for g in gis]):.3f}")
