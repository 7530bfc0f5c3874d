"""Inside each activation region a ReLU net is an affine map y = A x + b.

Check two things on a bias-free net: the masked weight product reproduces the
forward pass, and the output change between two inputs is bounded by the sum
of per-region operator norms times the step length in each region.
"""
import numpy as np

from geninterval import bounds as bd
from geninterval.network import forward, init_mlp

rng = np.random.default_rng(0)
net = init_mlp([784, 128, 128, 128, 10], seed=0, use_bias=False)
xs = rng.uniform(size=(50, 784))

err = max(np.abs(bd.effective_map(net, x).A @ x - forward(net, x)[0]).max() for x in xs)
print(f"masked product vs forward, max abs error: {err:.1e}")

rep = bd.norm_distribution_report(net, xs)
print(f"||W_L...W_1||_inf = {rep.product_norm:.3f}; "
      f"{rep.fraction_within_2x:.0%} of inputs have ||A(x)||_inf within 2x of it")

for x1, x2 in zip(xs[:5], xs[5:10]):
    a = bd.segment_crossing_audit(net, x1, x2)
    print(f"{a.regions:4d} crossings  lhs {a.lhs:8.4f} <= rhs {a.rhs:8.4f}  "
          f"continuity residual {a.max_residual:.1e}")
