"""
JSON file formats.

Scalars are written in the textual syntax of ``AdicScalar.parse``.  Rings are
``{"p": 2, "N": 4}`` for F_p[t]/(t^N) and ``{"p": 2}`` for F_p[t]_(t); module
descriptors list summands as ``{"torsion": k}`` or name ``"pattern":
"free^omega"``.  Matrices carry a ``"convention": "right-action"`` header: row
j of an endomorphism is the image of the j-th summand generator.  Wherever a
module, matrix or idempotent is expected a file name may stand instead,
resolved against the directory of the referring file.  Files never contain
timestamps, so identical inputs produce identical bytes.
"""
import json
import logging
import os
import tempfile
from contextlib import contextmanager
from dataclasses import asdict
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from .adic_core import RingDescriptor
from .covers import (CoverResult, FgDiscreteModule, Side, relation_component,
                     relation_values)
from .duality import DualityMatrix, FormalFamily, GeometricTail, MatrixSide
from .endo_topology import EndoElement, TranslatedFamily
from .errors import FormatError, InputError
from .idempotent_calculus import IdempotentFamily
from .matrices import Band, PatternMatrix
from .module_decomp import DecomposedModule, LocalModule

logger = logging.getLogger(__name__)

CONVENTION = "right-action"
FREE_OMEGA = "free^omega"
DEFAULT_PATTERN_PRIME = 2

Document = Union[str, Dict[str, Any]]
BAND_KEYS = {"offset", "entry", "from"}


@contextmanager
def _schema(what: str):
    try:
        yield
    except (KeyError, TypeError, IndexError, AttributeError, ValueError) as e:
        if isinstance(e, InputError):
            raise
        raise FormatError(f"Malformed {what}: {e!r}") from e


# -- files ---------------------------------------------------------------------

def write_json(path: Union[str, Path], data: Any) -> Path:
    """Write ``data`` atomically: temp file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as f:
            json.dump(data, f, indent=2)
            f.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    logger.debug(f"Wrote {path}")
    return path


def read_json(path: Union[str, Path]) -> Any:
    path = Path(path)
    try:
        with open(path, "r") as f:
            return json.load(f)
    except FileNotFoundError as e:
        raise InputError(f"No such file: {path}") from e
    except json.JSONDecodeError as e:
        raise FormatError(f"{path} is not valid JSON: {e}") from e


def _dereference(data: Any, base: Optional[Path]) -> Tuple[Any, Optional[Path]]:
    """Load ``data`` when it names a file; ``base`` follows to the loaded file's directory."""
    if not isinstance(data, str):
        return data, base
    path = Path(data) if base is None else base / data
    return read_json(path), path.parent


def _base_of(path: Union[str, Path]) -> Path:
    return Path(path).parent


# -- rings and modules ---------------------------------------------------------------

def ring_to_dict(ring: RingDescriptor) -> Dict[str, Any]:
    if ring.is_truncated:
        return {"p": ring.prime, "N": ring.precision}
    return {"p": ring.prime}


def ring_from_dict(data: Dict[str, Any]) -> RingDescriptor:
    """{"p": p, "N": N} is F_p[t]/(t^N); without "N" it is F_p[t]_(t)."""
    with _schema("ring"):
        unknown = set(data) - {"p", "N"}
        if unknown:
            raise FormatError(f"Unknown ring keys {sorted(unknown)}")
        if data.get("N") is None:
            return RingDescriptor.pattern(data["p"])
        return RingDescriptor.truncated(data["p"], data["N"])


def _local_to_dict(summand: LocalModule) -> Dict[str, Any]:
    return {"free": True} if summand.is_free else {"torsion": summand.length}


def _local_from_dict(data: Dict[str, Any]) -> LocalModule:
    with _schema("summand"):
        if set(data) == {"torsion"}:
            return LocalModule.torsion(data["torsion"])
        if data == {"free": True}:
            return LocalModule.free()
    raise FormatError(f"Unknown summand {data!r}")


def module_to_dict(module: DecomposedModule) -> Dict[str, Any]:
    if module.ring.is_pattern:
        return {"pattern": FREE_OMEGA, "ring": ring_to_dict(module.ring)}
    data: Dict[str, Any] = {"ring": ring_to_dict(module.ring),
                            "summands": [_local_to_dict(s) for s in module.summands]}
    if module.omega is not None:
        data["omega"] = _local_to_dict(module.omega)
    return data


def module_from_dict(data: Document, default_ring: Optional[RingDescriptor] = None,
                     default_pattern: Optional[RingDescriptor] = None,
                     base: Optional[Path] = None) -> DecomposedModule:
    """A module descriptor, or the name of a descriptor file.

    ``default_ring`` is used when a finite descriptor names no ring,
    ``default_pattern`` when ``{"pattern": "free^omega"}`` names none.
    """
    data, base = _dereference(data, base)
    with _schema("module descriptor"):
        pattern = data.get("pattern")
        if pattern is not None and pattern != FREE_OMEGA:
            raise FormatError(f"Unknown countable module {pattern!r}")
        if "ring" in data:
            ring = ring_from_dict(data["ring"])
        elif pattern is not None:
            ring = default_pattern or RingDescriptor.pattern(DEFAULT_PATTERN_PRIME)
        else:
            ring = default_ring
        if ring is None:
            raise FormatError("Module descriptor names no ring")
        summands = tuple(_local_from_dict(s) for s in data.get("summands", []))
        if pattern is not None:
            omega = LocalModule.free()
        elif data.get("omega") is not None:
            omega = _local_from_dict(data["omega"])
        else:
            omega = None
    return DecomposedModule(ring, summands, omega)


def load_module(path: Union[str, Path], default_ring: Optional[RingDescriptor] = None,
                default_pattern: Optional[RingDescriptor] = None) -> DecomposedModule:
    return module_from_dict(read_json(path), default_ring, default_pattern, _base_of(path))


def presentation_from_dict(data: Dict[str, Any], default_ring: Optional[RingDescriptor] = None) -> tuple:
    """(ring, rows of scalars) from {"ring": ..., "rows": [[scalar, ...], ...]} or a bare nested array."""
    with _schema("presentation"):
        if isinstance(data, list):
            data = {"rows": data}
        if "ring" in data or default_ring is None:
            ring = ring_from_dict(data["ring"])
        else:
            ring = default_ring
        rows = [[ring.scalar(x) for x in row] for row in data["rows"]]
    if rows and any(len(row) != len(rows[0]) for row in rows):
        raise FormatError("Presentation rows have different lengths")
    return ring, rows


def presentation_to_dict(ring: RingDescriptor, rows) -> Dict[str, Any]:
    return {"ring": ring_to_dict(ring), "rows": [[str(ring.scalar(x)) for x in row] for row in rows]}


# -- matrices ------------------------------------------------------------------

def pattern_to_dict(pattern: PatternMatrix) -> Dict[str, Any]:
    return {
        "bands": [{"offset": b.offset, "entry": str(b.entry), "from": b.start} for b in pattern.bands],
        "sparse": [[j, i, str(v)] for j, i, v in pattern.sparse],
    }


def _band_from_dict(ring: RingDescriptor, data: Dict[str, Any]) -> Band:
    unknown = set(data) - BAND_KEYS
    if unknown:
        raise FormatError(f"Unknown band keys {sorted(unknown)}")
    return Band(int(data["offset"]), ring.scalar(data["entry"]), int(data.get("from", 0)))


def pattern_from_dict(ring: RingDescriptor, data: Dict[str, Any]) -> PatternMatrix:
    """{"bands": [{"offset", "entry", "from"}], "sparse": [[j, i, scalar]]}."""
    with _schema("pattern matrix"):
        bands = [_band_from_dict(ring, b) for b in data.get("bands", [])]
        sparse = [(int(j), int(i), ring.scalar(v)) for j, i, v in data.get("sparse", [])]
        return PatternMatrix.build(ring, bands, sparse)


def _element_body(element: EndoElement) -> Dict[str, Any]:
    if element.is_pattern:
        return pattern_to_dict(element.body)
    return {"rows": [[str(x) for x in row] for row in element.body.rows]}


def _element_from_body(module: DecomposedModule, data: Dict[str, Any]) -> EndoElement:
    with _schema("matrix body"):
        if module.is_countable:
            if "rows" in data:
                raise FormatError("Countable modules take bands and sparse entries, not rows")
            return EndoElement.from_pattern(module, pattern_from_dict(module.ring, data))
        return EndoElement.from_rows(module, data["rows"])


def element_to_dict(element: EndoElement) -> Dict[str, Any]:
    data = {"convention": CONVENTION, "module": module_to_dict(element.module)}
    data.update(_element_body(element))
    return data


def element_from_dict(data: Document, base: Optional[Path] = None,
                      default_module: Optional[DecomposedModule] = None,
                      default_pattern: Optional[RingDescriptor] = None) -> EndoElement:
    """A matrix file: a module reference plus "rows", or "bands" and "sparse" for free^omega.

    A band description without a module reference lives on free^omega over
    ``default_pattern``.
    """
    data, base = _dereference(data, base)
    with _schema("matrix"):
        if data.get("convention", CONVENTION) != CONVENTION:
            raise FormatError(f"Unsupported matrix convention {data['convention']!r}")
        if "module" in data:
            module = module_from_dict(data["module"], default_pattern=default_pattern, base=base)
        elif default_module is not None:
            module = default_module
        elif "bands" in data or "sparse" in data:
            module = DecomposedModule.free_omega(default_pattern or RingDescriptor.pattern(DEFAULT_PATTERN_PRIME))
        else:
            raise FormatError("Matrix carries no module reference")
    return _element_from_body(module, data)


def load_element(path: Union[str, Path], default_pattern: Optional[RingDescriptor] = None) -> EndoElement:
    return element_from_dict(read_json(path), _base_of(path), default_pattern=default_pattern)


def _same_module(elements: Sequence[EndoElement], module: Optional[DecomposedModule], what: str) -> DecomposedModule:
    if module is None:
        if not elements:
            raise FormatError(f"Cannot tell the module of {what} without members or a module reference")
        module = elements[0].module
    if any(x.module != module for x in elements):
        raise FormatError(f"All matrices of {what} must share one module")
    return module


# -- families ----------------------------------------------------------------------

def _translated_to_dict(tail: TranslatedFamily) -> Dict[str, Any]:
    return {
        "template": [[r, c, str(v)] for r, c, v in tail.template],
        "start": tail.start,
        "constant": None if tail.constant is None else pattern_to_dict(tail.constant),
    }


def _translated_from_dict(module: DecomposedModule, data: Dict[str, Any]) -> TranslatedFamily:
    with _schema("translated family"):
        template = tuple((int(r), int(c), module.ring.scalar(v)) for r, c, v in data["template"])
        constant = data.get("constant")
        return TranslatedFamily(module, template, int(data.get("start", 0)),
                                None if constant is None else pattern_from_dict(module.ring, constant))


def family_to_dict(family: IdempotentFamily) -> Dict[str, Any]:
    data: Dict[str, Any] = {
        "convention": CONVENTION,
        "module": module_to_dict(family.module),
        "members": [_element_body(m) for m in family.members],
        "complete": family.complete,
    }
    if family.tail is not None:
        data["tail"] = _translated_to_dict(family.tail)
    if family.witnesses:
        data["witnesses"] = [_element_body(w) for w in family.witnesses]
    return data


def _is_flag(item: Any) -> bool:
    return isinstance(item, dict) and set(item) == {"complete"}


def family_from_dict(data: Union[Document, List[Any]], base: Optional[Path] = None,
                     default_pattern: Optional[RingDescriptor] = None) -> IdempotentFamily:
    """A family file: {"members": [matrix or file name, ...], "complete": bool}.

    The list form ``["e1.json", "e2.json", {"complete": true}]`` is read the
    same way.  Countable families add a translated ``"tail"``.
    """
    data, base = _dereference(data, base)
    with _schema("idempotent family"):
        if isinstance(data, list):
            flags = [item for item in data if _is_flag(item)]
            data = {"members": [item for item in data if not _is_flag(item)],
                    "complete": any(flag["complete"] for flag in flags)}
        module = None
        if "module" in data:
            module = module_from_dict(data["module"], default_pattern=default_pattern, base=base)
        members = tuple(element_from_dict(m, base, module, default_pattern) for m in data.get("members", []))
        module = _same_module(members, module, "a family")
        complete = data.get("complete", False)
        if not isinstance(complete, bool):
            raise FormatError(f"'complete' must be a boolean, got {complete!r}")
        tail = data.get("tail")
        witnesses = tuple(_element_from_body(module, w) for w in data.get("witnesses", []))
    return IdempotentFamily(module, members, None if tail is None else _translated_from_dict(module, tail),
                            complete, witnesses)


def load_family(path: Union[str, Path], default_pattern: Optional[RingDescriptor] = None) -> IdempotentFamily:
    return family_from_dict(read_json(path), _base_of(path), default_pattern)


# -- finitely generated modules and covers -------------------------------------------

def _side(value: Any) -> Side:
    try:
        return Side(value)
    except ValueError as e:
        raise FormatError(f"Unknown side {value!r}") from e


def _relation_to_list(m: FgDiscreteModule, relation: Sequence[EndoElement]) -> List[str]:
    values: List[str] = []
    for e, x in zip(m.generators, relation):
        values.extend(str(v) for v in relation_values(e, m.side, x))
    return values


def fg_module_to_dict(m: FgDiscreteModule) -> Dict[str, Any]:
    return {
        "convention": CONVENTION,
        "module": module_to_dict(m.module),
        "generators": [_element_body(e) for e in m.generators],
        "relations": [_relation_to_list(m, relation) for relation in m.relations],
        "side": m.side.value,
    }


def fg_module_from_dict(data: Document, base: Optional[Path] = None,
                        default_ring: Optional[RingDescriptor] = None) -> FgDiscreteModule:
    """{"generators": [idempotent or file name, ...], "relations": [[scalar, ...], ...], "side": ...}.

    A relation lists, generator after generator, the pivot row (right side)
    or pivot column (left side) of its component; see ``relation_component``.
    """
    data, base = _dereference(data, base)
    with _schema("finitely generated module"):
        side = _side(data.get("side", "right"))
        module = None
        if "module" in data:
            module = module_from_dict(data["module"], default_ring, base=base)
        generators = tuple(element_from_dict(e, base, module) for e in data["generators"])
        module = _same_module(generators, module, "a finitely generated module")
        unrelated = FgDiscreteModule(module, generators, (), side)
        n = len(module.summands)
        relations = []
        for row in data.get("relations", []):
            if isinstance(row, str) or len(row) != n * len(generators):
                raise FormatError(f"A relation lists {n} scalars per generator, got {row!r}")
            relations.append(tuple(relation_component(e, side, row[k * n:(k + 1) * n])
                                   for k, e in enumerate(generators)))
    return FgDiscreteModule(module, unrelated.generators, tuple(relations), side)


def load_fg_module(path: Union[str, Path], default_ring: Optional[RingDescriptor] = None) -> FgDiscreteModule:
    return fg_module_from_dict(read_json(path), _base_of(path), default_ring)


def cover_to_dict(cover: CoverResult) -> Dict[str, Any]:
    return {
        "target": fg_module_to_dict(cover.target),
        "source": [_element_body(e) for e in cover.source],
        "images": [[_element_body(x) for x in image] for image in cover.images],
        "kernel_span": [list(v) for v in cover.kernel_span],
    }


def cover_from_dict(data: Dict[str, Any], base: Optional[Path] = None) -> CoverResult:
    with _schema("projective cover"):
        target = fg_module_from_dict(data["target"], base)
        module = target.module
        source = tuple(_element_from_body(module, e) for e in data["source"])
        images = tuple(tuple(_element_from_body(module, x) for x in image) for image in data["images"])
        kernel = tuple(tuple(int(c) for c in v) for v in data["kernel_span"])
        return CoverResult(target, source, images, kernel)


def certificate_to_dict(certificate) -> Optional[Dict[str, Any]]:
    """Plain JSON form of a non-invertibility certificate (lists, not tuples)."""
    if certificate is None:
        return None
    data = {"kind": type(certificate).__name__}
    data.update(asdict(certificate))
    return json.loads(json.dumps(data))


# -- duality matrices ----------------------------------------------------------------

def _formal_to_dict(family: FormalFamily) -> Dict[str, Any]:
    data: Dict[str, Any] = {"head": [str(x) for x in family.head], "size": family.size}
    if family.tail is not None:
        data["tail"] = {"from": family.tail.start, "initial": str(family.tail.initial),
                        "ratio": str(family.tail.ratio)}
    return data


def formal_from_dict(ring: RingDescriptor, data: Dict[str, Any]) -> FormalFamily:
    with _schema("formal family"):
        head = tuple(ring.scalar(x) for x in data.get("head", []))
        tail = data.get("tail")
        if tail is not None:
            tail = GeometricTail(int(tail["from"]), ring.scalar(tail["initial"]), ring.scalar(tail["ratio"]))
        return FormalFamily(ring, head, tail, data.get("size"))


def formal_to_dict(family: FormalFamily) -> Dict[str, Any]:
    data = {"ring": ring_to_dict(family.ring)}
    data.update(_formal_to_dict(family))
    return data


def duality_to_dict(matrix: DualityMatrix) -> Dict[str, Any]:
    """The matrix format of endomorphisms under a {"rows": "Y", "cols": "X"} header."""
    data: Dict[str, Any] = {"rows": "Y", "cols": "X", "side": matrix.side.value, "ring": ring_to_dict(matrix.ring)}
    if matrix.is_pattern:
        data.update(pattern_to_dict(matrix.pattern))
    elif matrix.is_element_grid:
        data["module"] = module_to_dict(matrix.module)
        data["elements"] = [[_element_body(x) for x in row] for row in matrix.elements]
    elif all(row.tail is None for row in matrix.rows):
        data["entries"] = [[str(x) for x in row] for row in matrix.to_lists()]
    else:
        data["families"] = [_formal_to_dict(row) for row in matrix.rows]
    return data


def duality_from_dict(data: Document, base: Optional[Path] = None,
                      default_ring: Optional[RingDescriptor] = None) -> DualityMatrix:
    data, base = _dereference(data, base)
    with _schema("duality matrix"):
        if data.get("rows") != "Y" or data.get("cols") != "X":
            raise FormatError("Duality matrices are oriented with rows Y and columns X")
        try:
            side = MatrixSide(data["side"])
        except ValueError as e:
            raise FormatError(f"Unknown side {data['side']!r}") from e
        ring = ring_from_dict(data["ring"]) if "ring" in data else default_ring
        if ring is None:
            raise FormatError("Duality matrix names no ring")
        if "elements" in data:
            module = module_from_dict(data["module"], ring, ring if ring.is_pattern else None, base)
            grid = [[element_from_dict(x, base, module) for x in row] for row in data["elements"]]
            return DualityMatrix.from_elements(grid, side)
        if "bands" in data or "sparse" in data:
            return DualityMatrix.from_pattern(pattern_from_dict(ring, data), side)
        if "families" in data:
            return DualityMatrix(ring, side, tuple(formal_from_dict(ring, row) for row in data["families"]))
        return DualityMatrix.from_rows(ring, data["entries"], side)


def load_duality(path: Union[str, Path], default_ring: Optional[RingDescriptor] = None) -> DualityMatrix:
    return duality_from_dict(read_json(path), _base_of(path), default_ring)


# -- reports -------------------------------------------------------------------------

def claims_to_list(claims) -> List[Dict[str, Any]]:
    return [{"claim": c.claim, "outcome": c.outcome, "witness": c.witness} for c in claims]


def claims_from_list(data: Any) -> List[Dict[str, Any]]:
    if not isinstance(data, list):
        raise FormatError("A report is a JSON list of claims")
    for item in data:
        if not isinstance(item, dict) or not {"claim", "outcome", "witness"} <= set(item):
            raise FormatError(f"Malformed claim {item!r}")
        if not isinstance(item["outcome"], bool):
            raise FormatError(f"Claim outcome must be a boolean: {item!r}")
    return data
