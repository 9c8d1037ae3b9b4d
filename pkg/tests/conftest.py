"""Shared helpers for the statistical test gates.

Monte Carlo assertions run at level 0.01 and are retried on two further
seeds; a gate fails only if every attempt fails, which keeps the false-fail
rate around 1e-6 per gate without loosening any tolerance.
"""

import numpy as np

RESEEDS = (0, 1, 2)


def gate(check, seeds=RESEEDS) -> bool:
    """check(seed) -> bool; True as soon as one seed passes."""
    for s in seeds:
        if check(s):
            return True
    return False


def ecdf_on(values, grid) -> np.ndarray:
    values = np.sort(np.asarray(values, dtype=np.float64))
    return np.searchsorted(values, grid, side="right") / values.size
