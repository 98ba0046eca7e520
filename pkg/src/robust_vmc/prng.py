"""Counter-based pseudorandom uniforms, keyed by (seed, site index).

Uses the splitmix64 output function (Steele/Lea/Flood; Vigna's splitmix64):
the t-th uniform is a pure function of (seed, t), so replays and parallel
shards agree bit-exactly on every platform and random access is free.
"""

import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_INV53 = float(2.0 ** -53)


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def uniform_stream(seed: int, count: int, start: int = 0) -> np.ndarray:
    """Uniforms in [0, 1) for sites start .. start+count-1 under `seed`."""
    if count < 0:
        raise ValueError("count must be non-negative")
    s = np.uint64(int(seed) % (1 << 64))
    idx = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = _mix(s + idx * _GAMMA)
    return (z >> np.uint64(11)).astype(np.float64) * _INV53


def site_uniform(seed: int, site: int) -> float:
    """The single uniform consumed when measuring out at `site`."""
    return float(uniform_stream(seed, 1, start=site)[0])
