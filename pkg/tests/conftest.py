import json
import os

import numpy as np
import pytest

from treeinteract import load_ensemble

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")


def depth1_doc():
    """Split x0 <= 0.5 into leaves 1 / 0 with equal sample halves; x1 unused."""
    return {
        "format_version": 1,
        "routing": "le-left",
        "n_features": 2,
        "baseline_offset": 0.0,
        "output_kind": "regression-value",
        "trees": [
            {
                "left": [1, -1, -1],
                "right": [2, -1, -1],
                "feature": [0, -1, -1],
                "threshold": [0.5, 0.0, 0.0],
                "count": [100.0, 50.0, 50.0],
                "value": [0.0, 1.0, 0.0],
            }
        ],
    }


def xor_doc():
    """Two-feature XOR-shaped tree: value 1 iff exactly one of x0, x1 is high."""
    return {
        "format_version": 1,
        "routing": "le-left",
        "n_features": 2,
        "baseline_offset": 0.0,
        "output_kind": "regression-value",
        "trees": [
            {
                "left": [1, 3, 5, -1, -1, -1, -1],
                "right": [2, 4, 6, -1, -1, -1, -1],
                "feature": [0, 1, 1, -1, -1, -1, -1],
                "threshold": [0.5, 0.5, 0.5, 0.0, 0.0, 0.0, 0.0],
                "count": [100.0, 50.0, 50.0, 25.0, 25.0, 25.0, 25.0],
                "value": [0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0],
            }
        ],
    }


@pytest.fixture
def depth1_ensemble():
    return load_ensemble(depth1_doc())


@pytest.fixture
def xor_ensemble():
    return load_ensemble(xor_doc())


@pytest.fixture
def demo_model_path():
    return os.path.join(DATA_DIR, "demo_depth1.json")


def write_model(tmp_path, doc, name="model.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def random_small_ensemble(rng, n_trees=1):
    from treeinteract import bench

    n = int(rng.integers(3, 9))
    depth = int(rng.integers(2, 6))
    leaves = int(rng.integers(4, 33))
    seed = int(rng.integers(1 << 31))
    ens = bench.generate_ensemble(seed, n, depth, leaves, n_trees=n_trees)
    x = bench.generate_instances(seed + 1, n, 1)[0]
    return ens, x


def rng_instances(seed, n, count):
    return np.random.default_rng(seed).uniform(0.0, 1.0, size=(count, n))
