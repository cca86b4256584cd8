"""Domain types shared by all modules: defectivity vectors, defective sets,
the approximate-recovery distance, and the error metrics reported in
experiments.

Items are 0-indexed throughout.  All types are immutable values and all
operations are pure.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np


@dataclass(frozen=True)
class DefectivityVector:
    """Binary status of n items; 1 marks a defective item."""

    bits: tuple

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        if any(b not in (0, 1) for b in bits):
            raise ValueError("defectivity entries must be 0 or 1")
        object.__setattr__(self, "bits", bits)

    @property
    def n(self) -> int:
        return len(self.bits)

    @property
    def k(self) -> int:
        """Number of defective items."""
        return sum(self.bits)

    def to_string(self) -> str:
        return "".join(str(b) for b in self.bits)

    def to_numpy(self) -> np.ndarray:
        return np.array(self.bits, dtype=np.uint8)

    def support(self) -> "DefectiveSet":
        return DefectiveSet(tuple(j for j, b in enumerate(self.bits) if b), self.n)

    @classmethod
    def from_string(cls, text: str) -> "DefectivityVector":
        text = text.strip()
        if not all(c in "01" for c in text):
            raise ValueError("defectivity string must contain only 0/1")
        return cls(tuple(int(c) for c in text))

    @classmethod
    def from_json(cls, text: str) -> "DefectivityVector":
        return cls(tuple(json.loads(text)))

    @classmethod
    def parse(cls, text: str) -> "DefectivityVector":
        """Accept either the compact 0/1 string or a JSON array."""
        text = text.strip()
        if text.startswith("["):
            return cls.from_json(text)
        return cls.from_string(text)

    @classmethod
    def from_array(cls, arr: Iterable[int]) -> "DefectivityVector":
        return cls(tuple(int(v) for v in arr))


@dataclass(frozen=True)
class DefectiveSet:
    """A set of defective item indices inside an ambient universe of n items."""

    members: tuple
    n: int

    def __post_init__(self):
        members = tuple(sorted(int(j) for j in self.members))
        if len(set(members)) != len(members):
            raise ValueError("defective set indices must be distinct")
        if members and (members[0] < 0 or members[-1] >= self.n):
            raise ValueError("defective set indices must lie in [0, n)")
        object.__setattr__(self, "members", members)

    @property
    def k(self) -> int:
        return len(self.members)

    def to_vector(self) -> DefectivityVector:
        bits = [0] * self.n
        for j in self.members:
            bits[j] = 1
        return DefectivityVector(tuple(bits))

    @classmethod
    def from_vector(cls, u: DefectivityVector) -> "DefectiveSet":
        return u.support()


@dataclass(frozen=True)
class ErrorReport:
    """False positive / false negative counts and their k-normalized rates.

    Rates are ``None`` when the truth has no defectives (k = 0); the counts
    are still valid.  ``wall_time`` holds the decode wall time in seconds so
    experiment reports can reproduce timing curves without a separate type.
    """

    fp: int
    fn: int
    fp_rate: Optional[float]
    fn_rate: Optional[float]
    wall_time: float = 0.0


def count_fp_fn(truth: DefectivityVector, estimate: DefectivityVector,
                wall_time: float = 0.0) -> ErrorReport:
    """Count false positives/negatives of ``estimate`` against ``truth``.

    fp = items marked defective that are not; fn = defectives missed.
    Rates divide by the truth's k and are ``None`` when k = 0.
    """
    if truth.n != estimate.n:
        raise ValueError(f"dimension mismatch: truth n={truth.n}, estimate n={estimate.n}")
    fp = sum(1 for a, b in zip(truth.bits, estimate.bits) if b == 1 and a == 0)
    fn = sum(1 for a, b in zip(truth.bits, estimate.bits) if b == 0 and a == 1)
    k = truth.k
    if k == 0:
        return ErrorReport(fp, fn, None, None, wall_time)
    return ErrorReport(fp, fn, fp / k, fn / k, wall_time)


def approx_distance(a: DefectiveSet, b: DefectiveSet) -> int:
    """Approximate-recovery distance max(|a \\ b|, |b \\ a|).

    Symmetric, zero iff the sets coincide, and for equal-size sets equal to
    the common one-sided difference size.
    """
    if a.n != b.n:
        raise ValueError(f"dimension mismatch: a.n={a.n}, b.n={b.n}")
    sa, sb = set(a.members), set(b.members)
    return max(len(sa - sb), len(sb - sa))
