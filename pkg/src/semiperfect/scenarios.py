import json
import logging
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import pandas as pd
import psutil
import yaml

from .adic_core import AdicScalar, RingDescriptor
from .covers import (Side, projective_cover_fg, projective_cover_fg_contramodule,
                     radical_of_fg_discrete)
from .duality import Direction, MatrixSide, dual_matrix, projector_duality_holds
from .endo_topology import (EndoElement, SupportGrowthCertificate, TranslatedFamily,
                            decide_invertible, is_locally_split_mono,
                            jacobson_membership, project_to_semisimple)
from .errors import NonInvertibleSum
from .formats import (certificate_to_dict, claims_from_list, claims_to_list,
                      cover_from_dict, cover_to_dict, duality_from_dict,
                      duality_to_dict, element_from_dict, element_to_dict,
                      family_from_dict, family_to_dict, fg_module_from_dict,
                      fg_module_to_dict, load_duality, load_element,
                      load_fg_module, load_module, module_to_dict,
                      presentation_from_dict, presentation_to_dict, read_json,
                      ring_to_dict, write_json)
from .idempotent_calculus import (IdempotentFamily, certify_semiperfect, family_sum,
                                  hensel_lift_with_trace, newton_step_bound,
                                  orthogonalize_finite_family, split_idempotent)
from .linalg import matmul
from .matrices import PatternMatrix
from .module_decomp import DecomposedModule, smith_decompose

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

DEFAULT_CONFIG: Dict[str, Dict[str, Any]] = {
    "ring": {"prime": 2, "precision": 4},
    "pattern": {"prime": 2},
    "scenario": {"seed": 0, "split_depth": 8, "certificate_levels": 8},
    "execution": {"max_workers": 4},
    "results": {"output_dir": "scenario_results", "formats": ["json", "csv"]},
    "logging": {"level": "INFO"},
}


@dataclass(frozen=True)
class Claim:
    claim: str
    outcome: bool
    witness: Any = None


@dataclass
class ScenarioReport:
    """Claims checked by one verb, and the files backing their witnesses."""
    verb: str
    claims: List[Claim] = field(default_factory=list)
    artifacts: List[str] = field(default_factory=list)

    def add(self, claim: str, outcome: bool, witness: Any = None) -> Claim:
        entry = Claim(claim, bool(outcome), witness)
        self.claims.append(entry)
        if entry.outcome:
            logger.info(f"Claim {claim}: true")
        else:
            logger.warning(f"Claim {claim}: FALSE")
        return entry

    @property
    def passed(self) -> bool:
        return all(c.outcome for c in self.claims)

    @property
    def file_name(self) -> str:
        return f"{self.verb.replace('-', '_')}_report.json"

    def save(self, results_dir: Path, formats: List[str]) -> Path:
        """Save the report as JSON, plus a CSV claims table if configured."""
        json_file = write_json(results_dir / self.file_name, claims_to_list(self.claims))
        if "csv" in formats:
            rows = [{"claim": c.claim, "outcome": c.outcome,
                     "witness": json.dumps(c.witness, sort_keys=True)} for c in self.claims]
            csv_file = json_file.with_suffix(".csv")
            pd.DataFrame(rows, columns=["claim", "outcome", "witness"]).to_csv(csv_file, index=False)
            logger.info(f"CSV report saved to {csv_file}")
        logger.info(f"Report saved to {json_file}")
        return json_file


def _merge(defaults: Dict[str, Any], loaded: Optional[Dict[str, Any]]) -> Dict[str, Any]:
    merged = {section: dict(values) for section, values in defaults.items()}
    for section, values in (loaded or {}).items():
        if isinstance(values, dict):
            merged.setdefault(section, {}).update(values)
        else:
            merged[section] = values
    return merged


class ScenarioRunner:
    def __init__(self, config_path: Optional[str] = None, overrides: Optional[Dict[str, Dict[str, Any]]] = None):
        """Initialize the runner from a YAML config and CLI overrides."""
        self.config = _merge(self._load_config(config_path), overrides)
        self.results_dir = Path(self.config["results"]["output_dir"])
        self.results_dir.mkdir(parents=True, exist_ok=True)
        self.max_workers = int(self.config["execution"]["max_workers"])
        self.seed = int(self.config["scenario"]["seed"])

    def _load_config(self, config_path: Optional[str]) -> Dict[str, Any]:
        """Load scenario configuration; fall back to defaults when the file is missing."""
        if config_path is None or not Path(config_path).exists():
            if config_path is not None:
                logger.warning(f"Config file {config_path} not found; using built-in defaults")
            return _merge(DEFAULT_CONFIG, None)
        with open(config_path, 'r') as f:
            return _merge(DEFAULT_CONFIG, yaml.safe_load(f))

    @property
    def ring(self) -> RingDescriptor:
        return RingDescriptor.truncated(int(self.config["ring"]["prime"]), int(self.config["ring"]["precision"]))

    @property
    def pattern_ring(self) -> RingDescriptor:
        return RingDescriptor.pattern(int(self.config["pattern"]["prime"]))

    @property
    def formats(self) -> List[str]:
        return list(self.config["results"]["formats"])

    def _artifact(self, report: ScenarioReport, name: str, data: Any) -> str:
        write_json(self.results_dir / name, data)
        report.artifacts.append(name)
        return name

    def _finish(self, report: ScenarioReport) -> ScenarioReport:
        report.save(self.results_dir, self.formats)
        process = psutil.Process()
        logger.info(f"{report.verb}: rss={process.memory_info().rss} bytes, cpu={process.cpu_percent()}%")
        return report

    # -- verbs ---------------------------------------------------------------

    def cmd_sample(self, rows: int = 3, cols: int = 3) -> ScenarioReport:
        """Write a random presentation over the configured ring, drawn from the seed."""
        logger.info(f"Sampling a {rows}x{cols} presentation over {self.ring.label} with seed {self.seed}")
        report = ScenarioReport("sample")
        rows_data = random_presentation(self.ring, rows, cols, random.Random(self.seed))
        name = self._artifact(report, "presentation.json", presentation_to_dict(self.ring, rows_data))
        report.add("presentation_written", True, {"presentation": name, "seed": self.seed})
        return self._finish(report)

    def cmd_decompose(self, presentation_path: str) -> ScenarioReport:
        logger.info(f"Decomposing {presentation_path}")
        ring, rows = presentation_from_dict(read_json(presentation_path), self.ring)
        result = smith_decompose(rows, ring)
        report = ScenarioReport("decompose")
        self._artifact(report, "smith_input.json", presentation_to_dict(ring, rows))
        module_file = self._artifact(report, "module.json", module_to_dict(result.module))
        smith_file = self._artifact(report, "smith.json", {
            "ring": ring_to_dict(ring),
            "U": [[str(x) for x in row] for row in result.U],
            "V": [[str(x) for x in row] for row in result.V],
            "U_inv": [[str(x) for x in row] for row in result.U_inv],
            "V_inv": [[str(x) for x in row] for row in result.V_inv],
            "diagonal": [str(x) for x in result.diagonal],
            "summand_rows": list(result.summand_rows),
        })
        report.add("smith_witness", _smith_holds(self.results_dir, smith_file),
                   {"presentation": "smith_input.json", "smith": smith_file, "module": module_file})
        logger.info(f"Decomposed into {result.module.label}")
        return self._finish(report)

    def cmd_certify_semiperfect(self, descriptor_path: Optional[str] = None) -> ScenarioReport:
        if descriptor_path is None:
            module = DecomposedModule.free_omega(self.pattern_ring)
        else:
            module = load_module(descriptor_path, self.ring, self.pattern_ring)
        logger.info(f"Certifying semiperfectness for {module.label}")
        family = certify_semiperfect(module, self.max_workers)
        report = ScenarioReport("certify-semiperfect")
        name = self._artifact(report, "family.json", family_to_dict(family))
        audit = family.audit(self.max_workers)
        report.add("family_invariants", audit.passes(require_complete=True),
                   {"family": name, "failures": list(audit.failures)})
        report.add("projector_duality", _projectors_dualize(_idempotents_of(family)), {"family": name})
        return self._finish(report)

    def cmd_jacobson_gap(self) -> ScenarioReport:
        """The band h (offset 1, entry t) on free^omega lies in the topological radical but not in H."""
        ring = self.pattern_ring
        module = DecomposedModule.free_omega(ring)
        levels = int(self.config["scenario"]["certificate_levels"])
        depth = int(self.config["scenario"]["split_depth"])
        logger.info(f"Running the Jacobson gap scenario over {ring.label} (levels={levels}, K={depth})")
        report = ScenarioReport("jacobson-gap")
        t = ring.uniformizer()
        h = EndoElement.from_pattern(module, PatternMatrix.single_band(ring, 1, t))
        u = EndoElement.identity(module) - h

        h_file = self._artifact(report, "h.json", element_to_dict(h))
        u_file = self._artifact(report, "one_minus_h.json", element_to_dict(u))
        in_radical = report.add("h_in_topological_radical", jacobson_membership(h), {"element": h_file})

        verdict = decide_invertible(u, levels=levels, max_workers=self.max_workers)
        certificate = verdict.certificate
        cert_file = self._artifact(report, "support_growth.json", certificate_to_dict(certificate))
        grows = (verdict.is_not_invertible and isinstance(certificate, SupportGrowthCertificate)
                 and certificate.holds() and len(certificate.levels) == levels)
        not_invertible = report.add("one_minus_h_not_invertible", grows,
                                    {"element": u_file, "certificate": cert_file, "levels": levels})

        splittings = []
        split_ok = True
        for k in range(depth + 1):
            witness = is_locally_split_mono(u, range(k + 1))
            if witness is False:
                split_ok = False
                break
            splittings.append({"k": k, "file": self._artifact(report, f"splitting_E{k}.json",
                                                                element_to_dict(witness))})
        split = report.add("one_minus_h_locally_split_mono", split_ok,
                           {"element": u_file, "splittings": splittings})

        bad = bad_lifting_family(module)
        bad_file = self._artifact(report, "bad_family.json", family_to_dict(bad))
        report.add("bad_lifting_non_invertible_sum",
                   _raises_non_invertible_sum(bad, levels, self.max_workers), {"family": bad_file, "levels": levels})

        good = certify_semiperfect(module, self.max_workers)
        good_file = self._artifact(report, "good_family.json", family_to_dict(good))
        report.add("good_lifting_complete_orthogonal_local",
                   good.audit(self.max_workers).passes(require_complete=True), {"family": good_file})

        report.add("conclusion_abstract_radical_strictly_smaller",
                   in_radical.outcome and not_invertible.outcome and split.outcome,
                   {"depends_on": ["h_in_topological_radical", "one_minus_h_not_invertible",
                                   "one_minus_h_locally_split_mono"],
                    "statement": "h lies in the topological radical but not in H, so H is strictly "
                                 "smaller and the topological radical is its closure"})
        return self._finish(report)

    def cmd_lift(self, matrix_path: str) -> ScenarioReport:
        seed = load_element(matrix_path, self.pattern_ring)
        trace = hensel_lift_with_trace(seed)
        report = ScenarioReport("lift")
        seed_file = self._artifact(report, "seed.json", element_to_dict(seed))
        lifted_file = self._artifact(report, "lifted.json", element_to_dict(trace.result))
        report.add("lift_idempotent", _lift_holds(seed, trace.result) and trace.steps <= newton_step_bound(seed.module),
                   {"seed": seed_file, "lifted": lifted_file, "steps": trace.steps,
                    "defect_orders": [str(order) for order in trace.defect_orders]})
        report.add("projector_duality", projector_duality_holds(trace.result), {"element": lifted_file})
        logger.info(f"Lifted in {trace.steps} Newton steps")
        return self._finish(report)

    def cmd_split(self, matrix_path: str) -> ScenarioReport:
        e = load_element(matrix_path, self.pattern_ring)
        depth = int(self.config["scenario"]["split_depth"])
        result = split_idempotent(e, depth=depth)
        report = ScenarioReport("split")
        input_file = self._artifact(report, "split_input.json", element_to_dict(e))
        family_file = self._artifact(report, "split_family.json", family_to_dict(result.family))
        remainder_file = self._artifact(report, "split_remainders.json", [
            {"k": k, "remainder": element_to_dict(r)} for k, r in result.remainders])
        report.add("split_family_valid", _split_family_holds(self.results_dir, family_file, input_file),
                   {"input": input_file, "family": family_file})
        report.add("split_remainders_in_chain", _remainders_hold(self.results_dir, remainder_file),
                   {"remainders": remainder_file})
        report.add("projector_duality", _projectors_dualize(_idempotents_of(result.family)), {"family": family_file})
        logger.info(f"Split into {len(result.family.members)} local idempotents"
                    + (" and a countable tail" if result.family.tail is not None else ""))
        return self._finish(report)

    def cmd_radical(self, module_path: str) -> ScenarioReport:
        m = load_fg_module(module_path, self.ring)
        result = radical_of_fg_discrete(m)
        report = ScenarioReport("radical")
        module_file = self._artifact(report, "fg_module.json", fg_module_to_dict(m))
        radical_file = self._artifact(report, "radical.json", _radical_summary(result))
        report.add("radical_quotient_semisimple", result.is_semisimple_quotient,
                   {"module": module_file, "radical": radical_file})
        return self._finish(report)

    def cmd_cover(self, module_path: str) -> ScenarioReport:
        m = load_fg_module(module_path, self.ring)
        cover = projective_cover_fg_contramodule(m) if m.side is Side.LEFT else projective_cover_fg(m)
        report = ScenarioReport("cover")
        cover_file = self._artifact(report, "cover.json", cover_to_dict(cover))
        report.add("projective_cover_certificate", cover.verify(), {"cover": cover_file})
        return self._finish(report)

    def cmd_dual(self, matrix_path: str) -> ScenarioReport:
        matrix = load_duality(matrix_path, self.ring)
        direction = Direction.CONTRA_TO_PROD if matrix.side is MatrixSide.CONTRA else Direction.PROD_TO_CONTRA
        dual = dual_matrix(matrix, direction)
        report = ScenarioReport("dual")
        input_file = self._artifact(report, "dual_input.json", duality_to_dict(matrix))
        dual_file = self._artifact(report, "dual.json", duality_to_dict(dual))
        report.add("dual_involution", _dual_holds(self.results_dir, input_file, dual_file),
                   {"input": input_file, "dual": dual_file})
        return self._finish(report)

    def verify_report(self, directory: Optional[str] = None) -> ScenarioReport:
        """Reload every report in ``directory`` and re-verify each witness from the artifacts."""
        base = Path(directory) if directory is not None else self.results_dir
        reports = sorted(base.glob("*_report.json"))
        check = ScenarioReport("verify")
        if not reports:
            check.add("reports_present", False, {"directory": str(base)})
            return check
        for path in reports:
            claims = claims_from_list(read_json(path))
            outcomes = {item["claim"]: item["outcome"] for item in claims}
            for item in claims:
                verifier = _VERIFIERS.get(item["claim"])
                rechecked = verifier(base, item["witness"], outcomes) if verifier else item["outcome"]
                check.add(f"{path.stem}:{item['claim']}", item["outcome"] and rechecked,
                          {"report": path.name, "recorded": item["outcome"], "rechecked": rechecked})
        process = psutil.Process()
        logger.info(f"verify: rss={process.memory_info().rss} bytes, cpu={process.cpu_percent()}%")
        return check


# -- scenario data -----------------------------------------------------------------

def random_presentation(ring: RingDescriptor, rows: int, cols: int, rng: random.Random) -> List[List[AdicScalar]]:
    n = ring.precision
    return [[AdicScalar.from_coefficients(ring, [rng.randrange(ring.prime) for _ in range(n)])
             for _ in range(cols)] for _ in range(rows)]


def bad_lifting_family(module: DecomposedModule) -> IdempotentFamily:
    """Members E_mm - t·E_{m,m+1}: local idempotents summing to 1 - h."""
    ring = module.ring
    tail = TranslatedFamily(module, ((0, 0, ring.one()), (0, 1, -ring.uniformizer())), 0)
    return IdempotentFamily(module, (), tail, False)


def _raises_non_invertible_sum(family, levels: int, max_workers: int) -> bool:
    try:
        orthogonalize_finite_family(family, levels=levels, max_workers=max_workers)
    except NonInvertibleSum as e:
        logger.info(f"Orthogonalization obstructed: {e}")
        return isinstance(e.certificate, SupportGrowthCertificate) and e.certificate.holds()
    return False


def _radical_summary(result) -> Dict[str, Any]:
    return {
        "radical_dimension": result.radical_dimension,
        "relation_dimension": result.relation_dimension,
        "quotient_dimension": result.quotient_dimension,
        "simple_generators": list(result.simple_generators),
        "simple_dimensions": list(result.simple_dimensions),
    }


# -- witness checks ----------------------------------------------------------------

def _smith_holds(base: Path, smith_file: str, presentation_file: str = "smith_input.json") -> bool:
    ring, rows = presentation_from_dict(read_json(base / presentation_file))
    data = read_json(base / smith_file)
    scalar = ring.scalar
    U = [[scalar(x) for x in row] for row in data["U"]]
    V = [[scalar(x) for x in row] for row in data["V"]]
    U_inv = [[scalar(x) for x in row] for row in data["U_inv"]]
    V_inv = [[scalar(x) for x in row] for row in data["V_inv"]]
    diagonal = [scalar(x) for x in data["diagonal"]]
    m = len(rows)
    n = len(rows[0]) if rows else 0
    D = [[diagonal[i] if i == j and i < len(diagonal) else ring.zero() for j in range(n)] for i in range(m)]
    if m == 0 or n == 0:
        return True
    return matmul(ring, matmul(ring, U, rows), V) == D and matmul(ring, matmul(ring, U_inv, D), V_inv) == rows


def _lift_holds(seed: EndoElement, lifted: EndoElement) -> bool:
    return lifted @ lifted == lifted and project_to_semisimple(lifted) == project_to_semisimple(seed)


def _split_family_holds(base: Path, family_file: str, input_file: str) -> bool:
    family = family_from_dict(read_json(base / family_file))
    e = element_from_dict(read_json(base / input_file))
    return family.audit().passes(require_complete=family.complete) and family_sum(family) == e


def _remainders_hold(base: Path, remainder_file: str) -> bool:
    entries = read_json(base / remainder_file)
    for entry in entries:
        remainder = element_from_dict(entry["remainder"])
        if not remainder.rows_vanish(range(entry["k"] + 1)) or remainder @ remainder != remainder:
            return False
    return True


def _idempotents_of(family: IdempotentFamily) -> List[EndoElement]:
    """Finite members, plus the first member of a translated tail."""
    members = list(family.members)
    if family.tail is not None:
        members.append(family.tail.member(family.tail.start))
    return members


def _projectors_dualize(elements: List[EndoElement]) -> bool:
    return all(projector_duality_holds(e) for e in elements)


def _dual_holds(base: Path, input_file: str, dual_file: str) -> bool:
    original = duality_from_dict(read_json(base / input_file))
    dual = duality_from_dict(read_json(base / dual_file))
    direction = Direction.CONTRA_TO_PROD if dual.side is MatrixSide.CONTRA else Direction.PROD_TO_CONTRA
    return dual.side is not original.side and dual_matrix(dual, direction) == original


def _verify_support_growth(base: Path, witness: Dict[str, Any], _outcomes) -> bool:
    u = element_from_dict(read_json(base / witness["element"]))
    verdict = decide_invertible(u, levels=int(witness["levels"]))
    return verdict.is_not_invertible and certificate_to_dict(verdict.certificate) == read_json(
        base / witness["certificate"])


def _verify_splittings(base: Path, witness: Dict[str, Any], _outcomes) -> bool:
    u = element_from_dict(read_json(base / witness["element"]))
    for entry in witness["splittings"]:
        g = element_from_dict(read_json(base / entry["file"]))
        projector = EndoElement.projector(u.module, range(entry["k"] + 1))
        if projector @ u @ g != projector:
            return False
    return bool(witness["splittings"])


def _verify_family(base: Path, witness: Dict[str, Any], _outcomes) -> bool:
    family = family_from_dict(read_json(base / witness["family"]))
    return family.audit().passes(require_complete=True)


def _verify_bad_family(base: Path, witness: Dict[str, Any], _outcomes) -> bool:
    return _raises_non_invertible_sum(family_from_dict(read_json(base / witness["family"])),
                                      int(witness.get("levels", 8)), 4)


def _verify_conclusion(_base: Path, witness: Dict[str, Any], outcomes: Dict[str, bool]) -> bool:
    return all(outcomes.get(claim, False) for claim in witness["depends_on"])


def _verify_radical(base: Path, witness: Dict[str, Any], _outcomes) -> bool:
    m = fg_module_from_dict(read_json(base / witness["module"]))
    return _radical_summary(radical_of_fg_discrete(m)) == read_json(base / witness["radical"])


def _verify_cover(base: Path, witness: Dict[str, Any], _outcomes) -> bool:
    return cover_from_dict(read_json(base / witness["cover"])).verify()


_VERIFIERS: Dict[str, Callable[[Path, Any, Dict[str, bool]], bool]] = {
    "presentation_written": lambda base, w, _: (base / w["presentation"]).exists(),
    "smith_witness": lambda base, w, _: _smith_holds(base, w["smith"], w["presentation"]),
    "family_invariants": _verify_family,
    "h_in_topological_radical": lambda base, w, _: jacobson_membership(element_from_dict(read_json(base / w["element"]))),
    "one_minus_h_not_invertible": _verify_support_growth,
    "one_minus_h_locally_split_mono": _verify_splittings,
    "bad_lifting_non_invertible_sum": _verify_bad_family,
    "good_lifting_complete_orthogonal_local": _verify_family,
    "conclusion_abstract_radical_strictly_smaller": _verify_conclusion,
    "lift_idempotent": lambda base, w, _: _lift_holds(element_from_dict(read_json(base / w["seed"])),
                                                      element_from_dict(read_json(base / w["lifted"]))),
    "split_family_valid": lambda base, w, _: _split_family_holds(base, w["family"], w["input"]),
    "split_remainders_in_chain": lambda base, w, _: _remainders_hold(base, w["remainders"]),
    "radical_quotient_semisimple": _verify_radical,
    "projective_cover_certificate": _verify_cover,
    "dual_involution": lambda base, w, _: _dual_holds(base, w["input"], w["dual"]),
    "projector_duality": lambda base, w, _: _projectors_dualize(
        _idempotents_of(family_from_dict(read_json(base / w["family"]))) if "family" in w
        else [element_from_dict(read_json(base / w["element"]))]),
}
