import itertools
from fractions import Fraction

import numpy as np
import pytest

from lo_lab.core import VectorConfig


def make_config(rows, delta=None, relaxed=False):
    rows = [tuple(Fraction(c) if not isinstance(c, Fraction) else c for c in r)
            for r in rows]
    dim = len(rows[0]) if rows else 1
    return VectorConfig(dim=dim, vectors=tuple(rows), delta=delta, relaxed=relaxed)


def naive_cloud(config):
    """Independent oracle: expand all 2^n sign patterns with Fractions."""
    table = {}
    for signs in itertools.product((1, -1), repeat=config.n):
        s = tuple(sum(sg * v[k] for sg, v in zip(signs, config.vectors))
                  for k in range(config.dim))
        table[s] = table.get(s, 0) + 1
    if not table:
        table = {tuple(Fraction(0) for _ in range(config.dim)): 1}
    return table


def cloud_as_table(cloud):
    """SumCloud -> {rational point: multiplicity} for oracle comparison."""
    out = {}
    for i in range(cloud.num_atoms):
        row = cloud.atoms[i]
        key = tuple(Fraction(int(c), cloud.scale) for c in row)
        out[key] = out.get(key, 0) + int(cloud.mult[i])
    return out


def random_rational_config(rng, n, d, denom=16, max_num=3, delta=None):
    rows = []
    while len(rows) < n:
        coords = tuple(
            Fraction(int(rng.integers(-max_num * denom, max_num * denom + 1)), denom)
            for _ in range(d))
        if sum(c * c for c in coords) >= 1:
            rows.append(coords)
    return make_config(rows, delta=delta)


@pytest.fixture(params=["numba", "numpy"])
def backend(request, monkeypatch):
    monkeypatch.setenv("LO_LAB_BACKEND", request.param)
    return request.param
