"""Shared helpers for the demo scripts."""
import os
import sys

from geninterval.data import data_root


def mnist_dir():
    root = data_root(os.environ.get("GENINTERVAL_DATA_DIR"))
    if not (root / "mnist").exists() and not (root / "train-images-idx3-ubyte").exists():
        sys.exit(f"MNIST not found under {root}; set GENINTERVAL_DATA_DIR (see README)")
    return str(root)
