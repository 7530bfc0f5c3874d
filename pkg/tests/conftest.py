import os
import struct
from pathlib import Path

import numpy as np
import pytest

from geninterval.network import init_mlp

REPO = Path(__file__).resolve().parents[1]


def find_mnist_root():
    for cand in (os.environ.get("GENINTERVAL_DATA_DIR"), REPO / "data", Path("/root/data")):
        if cand and (Path(cand) / "mnist" / "train-images-idx3-ubyte").exists():
            return Path(cand)
    return None


@pytest.fixture(scope="session")
def mnist_root():
    root = find_mnist_root()
    if root is None:
        pytest.skip("MNIST IDX files not available (set GENINTERVAL_DATA_DIR)")
    return root


def write_idx(path, magic, arr):
    arr = np.asarray(arr, dtype=np.uint8)
    with open(path, "wb") as fh:
        fh.write(struct.pack(f">I{arr.ndim}I", magic, *arr.shape))
        fh.write(arr.tobytes())
    return path


def random_net(rng, sizes=None, use_bias=True, scale=1.0):
    if sizes is None:
        depth = rng.integers(1, 4)
        sizes = [int(rng.integers(2, 6))] + [int(rng.integers(2, 9)) for _ in range(depth)] \
            + [int(rng.integers(2, 5))]
    p = init_mlp(sizes, seed=int(rng.integers(1 << 31)), init_scale=scale, use_bias=use_bias)
    if use_bias:
        for b in p.biases:
            b[:] = rng.uniform(-0.5, 0.5, b.shape)
    return p


# one line per acceptance criterion, echoed at the end of the session
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
