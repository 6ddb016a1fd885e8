"""
Matrix bodies used by endomorphism-ring elements.

``BlockMatrix`` is a dense square array of scalars.  ``PatternMatrix`` is an
omega x omega row-finite matrix: a finite set of constant diagonals (bands)
that start at some row, plus a finite list of sparse corrections.
"""
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

from .adic_core import AdicScalar, RingDescriptor
from .errors import InputError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BlockMatrix:
    rows: Tuple[Tuple[AdicScalar, ...], ...]

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[AdicScalar]]) -> "BlockMatrix":
        size = len(rows)
        if any(len(row) != size for row in rows):
            raise InputError(f"Block matrix must be square, got {size} rows of lengths {[len(r) for r in rows]}")
        return cls(tuple(tuple(row) for row in rows))

    @property
    def size(self) -> int:
        return len(self.rows)

    def entry(self, j: int, i: int) -> AdicScalar:
        return self.rows[j][i]

    def map_entries(self, fn: Callable[[int, int, AdicScalar], AdicScalar]) -> "BlockMatrix":
        return BlockMatrix(tuple(tuple(fn(j, i, x) for i, x in enumerate(row)) for j, row in enumerate(self.rows)))

    def transpose(self) -> "BlockMatrix":
        return BlockMatrix(tuple(zip(*self.rows)))

    def to_lists(self) -> List[List[AdicScalar]]:
        return [list(row) for row in self.rows]


@dataclass(frozen=True)
class Band:
    """Entry ``entry`` at every position (j, j + offset) with j >= start."""
    offset: int
    entry: AdicScalar
    start: int = 0


SparseEntry = Tuple[int, int, AdicScalar]


def _collect(entries: Iterable[SparseEntry]) -> Dict[Tuple[int, int], AdicScalar]:
    acc: Dict[Tuple[int, int], AdicScalar] = {}
    for j, i, value in entries:
        if j < 0 or i < 0:
            raise InputError(f"Negative matrix position ({j}, {i})")
        key = (j, i)
        acc[key] = acc[key] + value if key in acc else value
    return acc


@dataclass(frozen=True)
class PatternMatrix:
    """Banded row-finite matrix over omega in canonical form.

    Canonical form: at most one band per offset, holding the eventual value of
    that diagonal and the smallest start from which the diagonal is constant;
    every other nonzero entry is listed in ``sparse`` (sorted, no zeros).
    Equality of canonical forms is equality of matrices.
    """
    ring: RingDescriptor
    bands: Tuple[Band, ...] = ()
    sparse: Tuple[SparseEntry, ...] = ()

    @classmethod
    def build(cls, ring: RingDescriptor, bands: Iterable[Band] = (), sparse: Iterable[SparseEntry] = ()) -> "PatternMatrix":
        bands = list(bands)
        entries = _collect(sparse)
        by_offset: Dict[int, List[Band]] = {}
        for band in bands:
            if band.entry.ring != ring:
                raise InputError(f"Band entry over {band.entry.ring.label} in a matrix over {ring.label}")
            by_offset.setdefault(band.offset, []).append(
                Band(band.offset, band.entry, max(band.start, 0, -band.offset)))
        out_bands: List[Band] = []
        out_sparse: Dict[Tuple[int, int], AdicScalar] = {}
        for (j, i), value in entries.items():
            if value.ring != ring:
                raise InputError(f"Sparse entry over {value.ring.label} in a matrix over {ring.label}")
            if i - j not in by_offset:
                out_sparse[(j, i)] = value
        for offset, group in by_offset.items():
            eventual = ring.zero()
            for band in group:
                eventual = eventual + band.entry
            first_row = max(0, -offset)
            on_diagonal = {j: v for (j, i), v in entries.items() if i - j == offset}
            horizon = max([band.start for band in group] + [j + 1 for j in on_diagonal] + [first_row])

            def actual(j: int) -> AdicScalar:
                value = on_diagonal.get(j, ring.zero())
                for band in group:
                    if j >= band.start:
                        value = value + band.entry
                return value

            start = horizon
            while start > first_row and actual(start - 1) == eventual:
                start -= 1
            for j in range(first_row, start):
                value = actual(j)
                if not value.is_zero():
                    out_sparse[(j, j + offset)] = value
            if not eventual.is_zero():
                out_bands.append(Band(offset, eventual, start))
        sparse_sorted = tuple((j, i, v) for (j, i), v in sorted(out_sparse.items()) if not v.is_zero())
        return cls(ring, tuple(sorted(out_bands, key=lambda b: b.offset)), sparse_sorted)

    @classmethod
    def zero(cls, ring: RingDescriptor) -> "PatternMatrix":
        return cls(ring)

    @classmethod
    def identity(cls, ring: RingDescriptor) -> "PatternMatrix":
        return cls.build(ring, [Band(0, ring.one())])

    @classmethod
    def single_band(cls, ring: RingDescriptor, offset: int, entry: AdicScalar, start: int = 0) -> "PatternMatrix":
        return cls.build(ring, [Band(offset, entry, start)])

    @classmethod
    def from_sparse(cls, ring: RingDescriptor, entries: Iterable[SparseEntry]) -> "PatternMatrix":
        return cls.build(ring, (), entries)

    # -- structure ------------------------------------------------------

    @cached_property
    def _sparse_rows(self) -> Dict[int, List[Tuple[int, AdicScalar]]]:
        rows: Dict[int, List[Tuple[int, AdicScalar]]] = {}
        for j, i, value in self.sparse:
            rows.setdefault(j, []).append((i, value))
        return rows

    @cached_property
    def _sparse_lookup(self) -> Dict[Tuple[int, int], AdicScalar]:
        return {(j, i): v for j, i, v in self.sparse}

    def is_zero(self) -> bool:
        return not self.bands and not self.sparse

    @property
    def regular_from(self) -> int:
        """Every row at or beyond this index is a translate of the previous one."""
        starts = [b.start for b in self.bands] + [j + 1 for j, _, _ in self.sparse]
        return max(starts, default=0)

    @property
    def offsets(self) -> Tuple[int, ...]:
        return tuple(b.offset for b in self.bands)

    def entry(self, j: int, i: int) -> AdicScalar:
        for band in self.bands:
            if i - j == band.offset and j >= band.start:
                return band.entry
        return self._sparse_lookup.get((j, i), self.ring.zero())

    def row(self, j: int) -> List[Tuple[int, AdicScalar]]:
        """Nonzero entries of row j as (column, value), sorted by column."""
        found = dict(self._sparse_rows.get(j, ()))
        for band in self.bands:
            if j >= band.start:
                found[j + band.offset] = band.entry
        return sorted(found.items())

    def column_entries(self, i: int) -> List[Tuple[int, AdicScalar]]:
        found = {j: v for j, col, v in self.sparse if col == i}
        for band in self.bands:
            j = i - band.offset
            if j >= band.start:
                found[j] = band.entry
        return sorted(found.items())

    def row_support(self, rows: Iterable[int]) -> List[int]:
        cols = set()
        for j in rows:
            cols.update(i for i, _ in self.row(j))
        return sorted(cols)

    def window(self, size: int) -> List[List[AdicScalar]]:
        """Dense top-left ``size`` x ``size`` corner."""
        out = [[self.ring.zero() for _ in range(size)] for _ in range(size)]
        for j in range(size):
            for i, value in self.row(j):
                if i < size:
                    out[j][i] = value
        return out

    def restrict_rows(self, rows: Iterable[int]) -> "PatternMatrix":
        keep = [(j, i, v) for j in rows for i, v in self.row(j)]
        return PatternMatrix.from_sparse(self.ring, keep)

    # -- arithmetic -----------------------------------------------------

    def map_entries(self, fn: Callable[[AdicScalar], AdicScalar], ring: Optional[RingDescriptor] = None) -> "PatternMatrix":
        target = ring or self.ring
        return PatternMatrix.build(
            target,
            [Band(b.offset, fn(b.entry), b.start) for b in self.bands],
            [(j, i, fn(v)) for j, i, v in self.sparse])

    def __add__(self, other: "PatternMatrix") -> "PatternMatrix":
        return PatternMatrix.build(self.ring, self.bands + other.bands, self.sparse + other.sparse)

    def __neg__(self) -> "PatternMatrix":
        return self.map_entries(lambda x: -x)

    def __sub__(self, other: "PatternMatrix") -> "PatternMatrix":
        return self + (-other)

    def scale(self, scalar: AdicScalar) -> "PatternMatrix":
        return self.map_entries(lambda x: scalar * x)

    def __matmul__(self, other: "PatternMatrix") -> "PatternMatrix":
        bands: List[Band] = []
        sparse: List[SparseEntry] = []
        for left in self.bands:
            for right in other.bands:
                bands.append(Band(left.offset + right.offset, left.entry * right.entry,
                                  max(left.start, right.start - left.offset)))
        for j, i, value in self.sparse:
            for col, entry in other.row(i):
                sparse.append((j, col, value * entry))
        for i, col, value in other.sparse:
            for band in self.bands:
                j = i - band.offset
                if j >= band.start:
                    sparse.append((j, col, band.entry * value))
        return PatternMatrix.build(self.ring, bands, sparse)

    def transpose(self) -> "PatternMatrix":
        return PatternMatrix.build(
            self.ring,
            [Band(-b.offset, b.entry, b.start + b.offset) for b in self.bands],
            [(i, j, v) for j, i, v in self.sparse])

    def __str__(self) -> str:
        parts = [f"band(offset={b.offset}, entry={b.entry}, from={b.start})" for b in self.bands]
        parts += [f"[{j},{i}]={v}" for j, i, v in self.sparse]
        return "PatternMatrix(" + ", ".join(parts) + ")" if parts else "PatternMatrix(0)"
