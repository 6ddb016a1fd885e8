"""
Decomposition of modules over the base ring into cyclic summands with local
endomorphism rings, and the shapes of the Hom blocks between such summands.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

from .adic_core import INFINITY, AdicScalar, RingDescriptor
from .errors import BackendUnsupported, InputError
from .linalg import ScalarMatrix, identity_matrix

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LocalModule:
    """R/t^length, or the rank-one free module when ``length`` is None."""
    length: Optional[int] = None

    @classmethod
    def torsion(cls, length: int) -> "LocalModule":
        if not isinstance(length, int) or length < 1:
            raise InputError(f"Torsion exponent must be a positive integer, got {length!r}")
        return cls(length)

    @classmethod
    def free(cls) -> "LocalModule":
        return cls(None)

    @property
    def is_free(self) -> bool:
        return self.length is None

    def __str__(self) -> str:
        return "Free" if self.is_free else f"Torsion({self.length})"


def hom_block_shape(src: LocalModule, dst: LocalModule) -> Union[int, float]:
    """Length of the cyclic module Hom(src, dst); INFINITY for Free -> Free."""
    if src.is_free:
        return INFINITY if dst.is_free else dst.length
    if dst.is_free:
        return 0
    return min(src.length, dst.length)


def hom_generator_exponent(src: LocalModule, dst: LocalModule) -> int:
    """Hom(src, dst) is generated by x -> t^e x with e returned here."""
    if src.is_free or dst.is_free:
        return 0
    return max(0, dst.length - src.length)


@dataclass(frozen=True)
class DecomposedModule:
    ring: RingDescriptor
    summands: Tuple[LocalModule, ...] = ()
    omega: Optional[LocalModule] = None

    def __post_init__(self):
        object.__setattr__(self, "summands", tuple(self.summands))
        if self.ring.is_pattern:
            if self.summands or self.omega != LocalModule.free():
                raise BackendUnsupported("Pattern modules are described as free^omega")
            return
        n = self.ring.precision
        for summand in self.summands:
            if summand.is_free:
                raise InputError("Free summands exist only in the pattern backend")
            if not 1 <= summand.length <= n:
                raise InputError(f"Torsion exponent {summand.length} outside 1..{n} for {self.ring.label}")
        if self.omega is not None:
            if self.summands or self.omega != LocalModule.torsion(1) or n != 1:
                raise BackendUnsupported("Countable truncated modules exist only as torsion(1)^omega over the residue field")

    @classmethod
    def of_torsion(cls, ring: RingDescriptor, lengths: Sequence[int]) -> "DecomposedModule":
        return cls(ring, tuple(LocalModule.torsion(k) for k in lengths))

    @classmethod
    def free_omega(cls, ring: RingDescriptor) -> "DecomposedModule":
        return cls(ring, (), LocalModule.free())

    @classmethod
    def residue_omega(cls, prime: int) -> "DecomposedModule":
        return cls(RingDescriptor.truncated(prime, 1), (), LocalModule.torsion(1))

    @property
    def is_countable(self) -> bool:
        return self.omega is not None

    @property
    def size(self) -> Union[int, float]:
        return INFINITY if self.is_countable else len(self.summands)

    def summand(self, index: int) -> LocalModule:
        if self.is_countable:
            return self.omega
        return self.summands[index]

    def iso_class(self, index: int) -> Tuple[str, LocalModule]:
        return (self.ring.backend.value, self.summand(index))

    @property
    def iso_classes(self) -> Dict[LocalModule, Optional[Tuple[int, ...]]]:
        """Fibers of the iso-class map in order of first appearance.

        A countable module has the single class ``omega`` whose fiber is every
        index; it is reported as None.
        """
        if self.is_countable:
            return {self.omega: None}
        classes: Dict[LocalModule, List[int]] = {}
        for index, summand in enumerate(self.summands):
            classes.setdefault(summand, []).append(index)
        return {key: tuple(indices) for key, indices in classes.items()}

    @property
    def is_uniform(self) -> bool:
        return len(self.iso_classes) <= 1

    @property
    def total_length(self) -> Union[int, float]:
        if self.is_countable:
            return INFINITY
        return sum(s.length for s in self.summands)

    def hom_shape(self, j: int, i: int) -> Union[int, float]:
        """Shape of block (j, i), the maps M_j -> M_i."""
        return hom_block_shape(self.summand(j), self.summand(i))

    def exponent(self, j: int, i: int) -> int:
        return hom_generator_exponent(self.summand(j), self.summand(i))

    def class_residue_module(self, key: LocalModule) -> "DecomposedModule":
        """Carrier of the residue matrices of one iso class."""
        if self.is_countable:
            return DecomposedModule.residue_omega(self.ring.prime)
        count = len(self.iso_classes[key])
        return DecomposedModule.of_torsion(self.ring.residue_field(), [1] * count)

    @property
    def label(self) -> str:
        if self.is_countable:
            return f"{self.omega}^omega over {self.ring.label}"
        return " + ".join(str(s) for s in self.summands) + f" over {self.ring.label}" if self.summands else f"0 over {self.ring.label}"


@dataclass(frozen=True)
class SmithResult:
    """U·P·V = D with D diagonal; ``U_inv``·D·``V_inv`` = P."""
    module: DecomposedModule
    U: Tuple[Tuple[AdicScalar, ...], ...]
    V: Tuple[Tuple[AdicScalar, ...], ...]
    U_inv: Tuple[Tuple[AdicScalar, ...], ...]
    V_inv: Tuple[Tuple[AdicScalar, ...], ...]
    diagonal: Tuple[AdicScalar, ...]
    summand_rows: Tuple[int, ...] = field(default=())


def _freeze(matrix: ScalarMatrix) -> Tuple[Tuple[AdicScalar, ...], ...]:
    return tuple(tuple(row) for row in matrix)


def smith_decompose(presentation: Sequence[Sequence[AdicScalar]], ring: RingDescriptor) -> SmithResult:
    """Decompose coker(presentation) on a free module of rank len(presentation)."""
    if not ring.is_truncated:
        raise BackendUnsupported("Smith decomposition needs a finite presentation over a truncated ring")
    m = len(presentation)
    n = len(presentation[0]) if m else 0
    if any(len(row) != n for row in presentation):
        raise InputError("Presentation rows have different lengths")
    a = [[ring.scalar(x) for x in row] for row in presentation]
    U = identity_matrix(ring, m)
    U_inv = identity_matrix(ring, m)
    V = identity_matrix(ring, n)
    V_inv = identity_matrix(ring, n)

    for s in range(min(m, n)):
        candidates = [(a[r][c].valuation(), r, c) for r in range(s, m) for c in range(s, n)]
        v, r, c = min(candidates)
        if v == INFINITY:
            break
        logger.debug(f"SNF step {s}: pivot ({r}, {c}) of valuation {v}")
        if r != s:
            a[s], a[r] = a[r], a[s]
            U[s], U[r] = U[r], U[s]
            for row in U_inv:
                row[s], row[r] = row[r], row[s]
        if c != s:
            for row in a:
                row[s], row[c] = row[c], row[s]
            for row in V:
                row[s], row[c] = row[c], row[s]
            V_inv[s], V_inv[c] = V_inv[c], V_inv[s]
        unit_inv = a[s][s].shift_down(v).invert()
        for r in range(s + 1, m):
            if a[r][s].is_zero():
                continue
            q = a[r][s].shift_down(v) * unit_inv
            a[r] = [x - q * y for x, y in zip(a[r], a[s])]
            U[r] = [x - q * y for x, y in zip(U[r], U[s])]
            for row in U_inv:
                row[s] = row[s] + q * row[r]
        for c in range(s + 1, n):
            if a[s][c].is_zero():
                continue
            q = a[s][c].shift_down(v) * unit_inv
            for row in a:
                row[c] = row[c] - q * row[s]
            for row in V:
                row[c] = row[c] - q * row[s]
            V_inv[s] = [x + q * y for x, y in zip(V_inv[s], V_inv[c])]

    diagonal = tuple(a[i][i] for i in range(min(m, n)))
    exponents = []
    for i in range(m):
        k = min(diagonal[i].valuation(), ring.precision) if i < n else ring.precision
        if k > 0:
            exponents.append((k, i))
    exponents.sort()
    module = DecomposedModule.of_torsion(ring, [k for k, _ in exponents])
    logger.debug(f"SNF of {m}x{n} presentation: {module.label}")
    return SmithResult(module, _freeze(U), _freeze(V), _freeze(U_inv), _freeze(V_inv), diagonal,
                       tuple(i for _, i in exponents))
