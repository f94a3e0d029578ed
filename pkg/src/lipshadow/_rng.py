"""Random streams.

Every stream is a PCG64 generator seeded from ``SeedSequence([seed, *keys])``,
so a run is reproducible from its seed alone and independent of the order in
which rows or trials are executed.
"""
import numpy as np


def stream(seed, *keys):
    if seed is None:
        raise ValueError("a seed is mandatory")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), *map(int, keys)])))


def uniform_ball(rng, count, dim, radius=1.0):
    """``count`` points uniform in the ``dim``-ball, by rejection from the cube."""
    out = np.empty((count, dim))
    filled = 0
    while filled < count:
        cand = rng.uniform(-1.0, 1.0, size=(2 * (count - filled) + 8, dim))
        cand = cand[np.einsum("ij,ij->i", cand, cand) <= 1.0]
        take = min(len(cand), count - filled)
        out[filled:filled + take] = cand[:take]
        filled += take
    return radius * out
