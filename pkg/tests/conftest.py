import numpy as np
import pytest

from kmerhist.hashing import hash_codes
from kmerhist.sketch import SketchParams


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running acceptance checks")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def straight_line_sketch(params: SketchParams, items):
    """Plain-Python re-execution of the update rule over the same hash values.

    Returns ``{(inst, w, c): [v, p]}`` for every touched cell.
    """
    vmax = 2**31 - 2
    items = np.asarray(items, dtype=np.uint64)
    cells = {}
    for inst, seed in enumerate(params.seeds):
        hashes = hash_codes(items, seed)
        for z in hashes.tolist():
            if z == 0:
                w = params.M
            else:
                tz = 0
                while not (z >> tz) & 1:
                    tz += 1
                w = min(tz + 1, params.M)
            x = z >> w
            c = (x // params.u) % params.r
            j = x % params.u
            cell = cells.setdefault((inst, w, c), [0, 0])
            if cell[0] == -1:
                continue
            if cell[0] == 0:
                cell[0], cell[1] = 1, j
            elif cell[1] == j:
                cell[0] = min(cell[0] + 1, vmax)
            else:
                cell[0] = -1
    return cells


def sketch_cells(sketch):
    """Non-zero cells of a sketch in the same shape as :func:`straight_line_sketch`."""
    out = {}
    p = sketch.params
    for inst in range(p.t):
        for w in sketch.allocated_levels(inst):
            v, pv = sketch.level(inst, w)
            for c in np.nonzero(v)[0].tolist():
                out[(inst, w, c)] = [int(v[c]), int(pv[c])]
    return out
