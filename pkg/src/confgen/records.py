"""Calibration/test records and their flat batch layout."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from confgen.errors import ValidationError
from confgen.selection import Direction, ScoreSequence


@dataclass(frozen=True)
class InstanceAdmissibilities:
    values: tuple
    normalizer: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if not all(np.isfinite(self.values)):
            raise ValidationError("instance admissibilities must be finite")
        if self.normalizer is not None:
            n = float(self.normalizer)
            if not n > 0:
                raise ValidationError("normalizer must be positive")
            object.__setattr__(self, "normalizer", n)

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class GenerationRecord:
    id: str
    scores: ScoreSequence
    adms: InstanceAdmissibilities
    dedup_keys: Optional[tuple] = None

    def __post_init__(self):
        if len(self.scores) != len(self.adms):
            raise ValidationError(
                f"record {self.id!r}: {len(self.scores)} scores but {len(self.adms)} admissibilities"
            )
        if self.dedup_keys is not None:
            keys = tuple(str(k) for k in self.dedup_keys)
            if len(keys) != len(self.scores):
                raise ValidationError(f"record {self.id!r}: dedup_keys length mismatch")
            object.__setattr__(self, "dedup_keys", keys)

    @classmethod
    def make(
        cls,
        id,
        scores: Sequence[float],
        adm: Sequence[float],
        direction: Direction | str = Direction.UP,
        normalizer: Optional[float] = None,
        dedup_keys: Optional[Sequence[str]] = None,
    ) -> "GenerationRecord":
        return cls(
            str(id),
            ScoreSequence(tuple(scores), Direction(direction)),
            InstanceAdmissibilities(tuple(adm), normalizer),
            None if dedup_keys is None else tuple(dedup_keys),
        )

    def __len__(self):
        return len(self.scores)


@dataclass
class RecordBatch:
    """Ragged records flattened into contiguous arrays.

    Record ``r`` owns elements ``offsets[r]:offsets[r+1]``. ``normalizers``
    holds NaN where a record gave none.
    """

    scores: np.ndarray
    adms: np.ndarray
    offsets: np.ndarray
    direction: Direction
    normalizers: np.ndarray
    ids: Optional[list] = None
    keys: Optional[list] = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return len(self.offsets) - 1

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.offsets)

    @classmethod
    def from_records(cls, records: Sequence[GenerationRecord]) -> "RecordBatch":
        if len(records) == 0:
            raise ValidationError("empty calibration set")
        dirs = {r.scores.direction for r in records}
        if len(dirs) > 1:
            raise ValidationError("records mix score directions")
        lengths = np.fromiter((len(r) for r in records), dtype=np.int64, count=len(records))
        offsets = np.zeros(len(records) + 1, dtype=np.int64)
        np.cumsum(lengths, out=offsets[1:])
        scores = np.fromiter(
            (s for r in records for s in r.scores.scores), dtype=float, count=int(offsets[-1])
        )
        adms = np.fromiter(
            (a for r in records for a in r.adms.values), dtype=float, count=int(offsets[-1])
        )
        norms = np.array(
            [np.nan if r.adms.normalizer is None else r.adms.normalizer for r in records],
            dtype=float,
        )
        keys = None
        if any(r.dedup_keys is not None for r in records):
            keys = [r.dedup_keys for r in records]
        return cls(scores, adms, offsets, dirs.pop(), norms, [r.id for r in records], keys)

    def record(self, r: int) -> GenerationRecord:
        lo, hi = self.offsets[r], self.offsets[r + 1]
        norm = self.normalizers[r]
        return GenerationRecord.make(
            self.ids[r] if self.ids else str(r),
            self.scores[lo:hi].tolist(),
            self.adms[lo:hi].tolist(),
            self.direction,
            None if np.isnan(norm) else float(norm),
            None if self.keys is None else self.keys[r],
        )

    def records(self) -> list:
        return [self.record(r) for r in range(self.n)]

    def take(self, idx: Sequence[int]) -> "RecordBatch":
        return RecordBatch.from_records([self.record(int(i)) for i in idx])
