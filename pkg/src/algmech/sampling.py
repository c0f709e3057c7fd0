"""Seeded sample-point generation.

Uses a splitmix-style 64-bit generator so identical seeds give byte-identical
sample streams on every platform.  Fiber coordinates are drawn as a magnitude
in a positive range with a randomized sign, which keeps every sample away
from the zero section (the geometry lives on the slit bundle).
"""

from __future__ import annotations

from typing import Mapping, Sequence

from .jets import EvalPoint

__all__ = ["SplitMix64", "sample_points", "DEFAULT_BASE_BOX", "DEFAULT_FIBER_BOX"]

_MASK = (1 << 64) - 1
DEFAULT_BASE_BOX = (-2.0, 2.0)
DEFAULT_FIBER_BOX = (0.1, 2.0)  # magnitude range; sign drawn separately


class SplitMix64:
    """Deterministic 64-bit generator (splitmix increment/mix construction)."""

    def __init__(self, seed: int):
        self._state = seed & _MASK

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def next_float(self) -> float:
        """Uniform in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (2.0**-53)

    def uniform(self, lo: float, hi: float) -> float:
        return lo + self.next_float() * (hi - lo)

    def sign(self) -> float:
        return 1.0 if (self.next_u64() & 1) == 0 else -1.0


def sample_points(
    base_coords: Sequence[str],
    fiber_coords: Sequence[str],
    count: int,
    seed: int,
    box: Mapping[str, tuple[float, float]] | None = None,
) -> list[EvalPoint]:
    """Draw ``count`` points; fiber boxes are magnitude ranges (lo > 0)."""
    box = dict(box or {})
    rng = SplitMix64(seed)
    points = []
    for _ in range(count):
        x = [rng.uniform(*box.get(name, DEFAULT_BASE_BOX)) for name in base_coords]
        y = []
        for name in fiber_coords:
            lo, hi = box.get(name, DEFAULT_FIBER_BOX)
            y.append(rng.sign() * rng.uniform(lo, hi))
        points.append(EvalPoint.of(x, y))
    return points
