"""Counter-based random streams.

Every stream is a Philox generator keyed by ``(master_seed, *key)``. A
replication's draws depend only on its own key, never on which worker ran it
or in what order, so aggregated results are reproducible bit for bit.
"""

import numpy as np

# Generator.random() returns multiples of 2**-53 in [0, 1); shifting by half a
# grid step keeps every draw strictly inside (0, 1) for inverse-CDF samplers.
_HALF_ULP = 2.0 ** -54


def stream(master_seed: int, *key: int) -> np.random.Generator:
    """Return an independent generator for ``key`` under ``master_seed``."""
    if master_seed < 0:
        raise ValueError(f"master_seed must be nonnegative, got {master_seed}")
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def open_uniforms(gen: np.random.Generator, shape) -> np.ndarray:
    """Uniform draws on the open interval (0, 1)."""
    return gen.random(shape) + _HALF_ULP
