"""Bit-string genotypes and the ONEMAX / TWOMAX / NMAX fitness functions.

A genotype is a 1-D ``uint8`` array of 0/1 values. Whole populations are
``(M, length)`` arrays of the same dtype, which lets fitness be computed from
per-block ones counts without touching the bits again.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np


class DimensionError(ValueError):
    pass


class InvalidSpecError(ValueError):
    pass


class Kind(str, Enum):
    ONEMAX = "onemax"
    NMAX = "nmax"


@dataclass(frozen=True)
class ProblemSpec:
    kind: Kind
    b: int
    L: int = 1

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.b < 1:
            raise InvalidSpecError(f"b must be >= 1, got {self.b}")
        if self.kind is Kind.ONEMAX and self.L != 1:
            raise InvalidSpecError("ONEMAX has a single block (L = 1)")
        if self.kind is Kind.NMAX:
            if self.b % 2:
                raise InvalidSpecError(f"NMAX needs an even block length, got b={self.b}")
            if self.L < 1:
                raise InvalidSpecError(f"L must be >= 1, got {self.L}")

    @classmethod
    def onemax(cls, b: int) -> "ProblemSpec":
        return cls(Kind.ONEMAX, b)

    @classmethod
    def nmax(cls, b: int, L: int = 10) -> "ProblemSpec":
        return cls(Kind.NMAX, b, L)

    @property
    def length(self) -> int:
        return self.b * self.L

    @property
    def max_fitness(self) -> int:
        if self.kind is Kind.ONEMAX:
            return self.b
        return self.L * self.b // 2

    @property
    def n_optima(self) -> int:
        return 1 if self.kind is Kind.ONEMAX else 2 ** self.L

    def block_ones(self, genomes: np.ndarray) -> np.ndarray:
        """Ones count of every block: shape ``(..., L)``."""
        g = np.asarray(genomes)
        if g.shape[-1] != self.length:
            raise DimensionError(f"genotype length {g.shape[-1]} != {self.length}")
        return g.reshape(*g.shape[:-1], self.L, self.b).sum(axis=-1, dtype=np.int64)

    def fitness_from_blocks(self, block_ones: np.ndarray) -> np.ndarray:
        if self.kind is Kind.ONEMAX:
            return block_ones.sum(axis=-1)
        return np.abs(self.b // 2 - block_ones).sum(axis=-1)

    def fitness(self, genomes: np.ndarray):
        """Fitness of one genotype (int) or of each row of a population."""
        f = self.fitness_from_blocks(self.block_ones(genomes))
        return int(f) if np.ndim(f) == 0 else f

    def is_optimal(self, genomes: np.ndarray):
        f = self.fitness(genomes)
        return f == self.max_fitness

    def as_dict(self) -> dict:
        return {"kind": self.kind.value, "b": self.b, "L": self.L}


def _bits(g) -> np.ndarray:
    if isinstance(g, str):
        return parse_genotype(g)
    return np.asarray(g, dtype=np.uint8)


def onemax(g, spec: ProblemSpec | None = None) -> int:
    g = _bits(g)
    if spec is not None:
        if spec.kind is not Kind.ONEMAX:
            raise InvalidSpecError("onemax called with a non-ONEMAX spec")
        if g.size != spec.length:
            raise DimensionError(f"genotype length {g.size} != b={spec.b}")
    return int(g.sum())


def twomax(s) -> int:
    s = _bits(s)
    if s.size % 2:
        raise InvalidSpecError(f"TWOMAX needs an even length, got {s.size}")
    return abs(s.size // 2 - int(s.sum()))


def nmax(g, spec: ProblemSpec) -> int:
    g = _bits(g)
    if g.size != spec.length:
        raise DimensionError(f"genotype length {g.size} != L*b = {spec.length}")
    return sum(twomax(block) for block in g.reshape(spec.L, spec.b))


def is_optimal(g, spec: ProblemSpec) -> bool:
    return bool(spec.is_optimal(_bits(g)))


def hamming_distance(a, b) -> int:
    a, b = _bits(a), _bits(b)
    if a.shape != b.shape:
        raise DimensionError(f"length mismatch: {a.size} vs {b.size}")
    return int(np.count_nonzero(a != b))


def complement(g) -> np.ndarray:
    return 1 - _bits(g)


def parse_genotype(text: str) -> np.ndarray:
    if not text or set(text) - {"0", "1"}:
        raise ValueError(f"not a bit string: {text!r}")
    return np.frombuffer(text.encode("ascii"), dtype=np.uint8) - ord("0")


def format_genotype(g) -> str:
    return (np.asarray(g, dtype=np.uint8) + ord("0")).tobytes().decode("ascii")


def random_genomes(m: int, spec: ProblemSpec, rng: np.random.Generator) -> np.ndarray:
    return rng.integers(0, 2, size=(m, spec.length), dtype=np.uint8)
