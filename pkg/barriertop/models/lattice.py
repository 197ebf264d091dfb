from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Tuple


@dataclass(frozen=True, order=True)
class MultiIndex:
    alpha: Tuple[int, ...]

    def __post_init__(self):
        alpha = tuple(int(a) for a in self.alpha)
        if any(a < 0 for a in alpha):
            raise ValueError("multi-index entries must be non-negative")
        object.__setattr__(self, "alpha", alpha)

    def __iter__(self) -> Iterator[int]:
        return iter(self.alpha)

    def __len__(self) -> int:
        return len(self.alpha)

    @property
    def order(self) -> int:
        return sum(self.alpha)

    @property
    def factorial(self) -> int:
        out = 1
        for a in self.alpha:
            for k in range(2, a + 1):
                out *= k
        return out

    @classmethod
    def zero(cls, n: int) -> "MultiIndex":
        return cls(tuple([0] * n))

    def __str__(self) -> str:
        return "(" + ",".join(str(a) for a in self.alpha) + ")"


@dataclass(frozen=True)
class PseudoResonance:
    alpha: MultiIndex
    z0: complex
    decay_sum: float
    simple: bool


@dataclass(frozen=True)
class MuSequence:
    values: Tuple[float, ...]
    cutoff: float
    # non-negative integer combinations realizing each value
    combinations: Tuple[Tuple[Tuple[int, ...], ...], ...] = ()

    def __len__(self) -> int:
        return len(self.values)

    def index_of(self, value: float, tol: float = 1e-9) -> int:
        for k, mu in enumerate(self.values):
            if abs(mu - value) <= tol * max(1.0, abs(value)):
                return k
        return -1

    def is_prefix_of(self, other: "MuSequence", tol: float = 1e-12) -> bool:
        if len(self.values) > len(other.values):
            return False
        return all(abs(a - b) <= tol for a, b in zip(self.values, other.values))
