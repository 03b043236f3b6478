"""The weighting/sizing tuple shared by every recursion."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import DomainError


@dataclass(frozen=True)
class MixConfig:
    """Weight ``w`` on real data, ``n`` real and ``m`` synthetic samples per step.

    ``k = n / m`` is derived, never stored separately, so it always holds
    exactly.
    """

    w: float
    n: int
    m: int

    def __post_init__(self):
        if not (0.0 <= self.w <= 1.0):
            raise DomainError(f"w must lie in [0, 1], got {self.w}")
        if self.n < 2 or self.m < 2:
            raise DomainError(f"n and m must be >= 2, got n={self.n}, m={self.m}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "m", int(self.m))

    @property
    def k(self) -> float:
        return self.n / self.m

    def with_weight(self, w: float) -> "MixConfig":
        return MixConfig(w, self.n, self.m)
