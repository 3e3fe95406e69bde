import os
from pathlib import Path

import numpy as np
import pytest

from gossipopt import LogisticFamily


def find_a3a() -> Path | None:
    """Locate the a3a libsvm file: $A3A_PATH, tests/data/a3a, or ./data/a3a."""
    candidates = [os.environ.get("A3A_PATH")]
    here = Path(__file__).resolve().parent
    candidates += [here / "data" / "a3a", here.parent / "data" / "a3a"]
    for cand in candidates:
        if cand and Path(cand).is_file():
            return Path(cand)
    return None


def synthetic_logistic(m: int, h: int, d: int, seed: int) -> LogisticFamily:
    """Non-separable logistic data sampled from a planted linear model."""
    rng = np.random.default_rng(seed)
    w = rng.standard_normal(d)
    feats = rng.standard_normal((m, h, d))
    margins = np.einsum("ahd,d->ah", feats, w)
    labels = np.where(rng.random((m, h)) < 1.0 / (1.0 + np.exp(-margins)), 1.0, -1.0)
    return LogisticFamily(feats, labels)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
