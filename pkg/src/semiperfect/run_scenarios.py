import argparse
import json
import logging
import sys
from typing import Any, Dict, List, Optional

import yaml

from .errors import BackendUnsupported, InputError, SemiperfectError
from .scenarios import DEFAULT_CONFIG, LOG_FORMAT, ScenarioRunner

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CLAIM_FAILED = 1
EXIT_INVALID_INPUT = 2
EXIT_UNSUPPORTED = 3


def _ring_flag(value: str) -> Dict[str, int]:
    try:
        prime, precision = (int(part) for part in value.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"--ring expects 'p,N', got {value!r}")
    return {"prime": prime, "precision": precision}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description='Exact computations in topologically semiperfect rings')
    parser.add_argument('--config', default='config/scenario_config.yaml',
                        help='Path to scenario configuration file')
    parser.add_argument('--ring', type=_ring_flag, help='Truncated ring F_p[t]/(t^N) as p,N')
    parser.add_argument('--pattern', type=int, metavar='P', help='Pattern ring F_p[t]_(t) with prime P')
    parser.add_argument('--seed', type=int, help='Seed for randomized verbs')
    parser.add_argument('--out', help='Directory for emitted files')
    parser.add_argument('--split-depth', type=int, help='Depth K of the chain of open ideals')
    parser.add_argument('--levels', type=int, help='Truncation levels of support-growth certificates')
    parser.add_argument('--log-level', choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'],
                        help='Override the configured log level')

    verbs = parser.add_subparsers(dest='verb', required=True)
    sample = verbs.add_parser('sample', help='Write a random presentation drawn from the seed')
    sample.add_argument('--rows', type=int, default=3)
    sample.add_argument('--cols', type=int, default=3)
    verbs.add_parser('decompose', help='Smith decomposition of a presentation file').add_argument('input')
    certify = verbs.add_parser('certify-semiperfect', help='Complete family of local idempotents')
    certify.add_argument('input', nargs='?', help='Module descriptor; omit with --pattern for free^omega')
    verbs.add_parser('jacobson-gap', help='Topological versus abstract Jacobson radical')
    verbs.add_parser('lift', help='Newton lift of an idempotent residue').add_argument('input')
    verbs.add_parser('split', help='Split an idempotent into local idempotents').add_argument('input')
    verbs.add_parser('radical', help='Radical of a finitely generated module').add_argument('input')
    verbs.add_parser('cover', help='Projective cover of a finitely generated module').add_argument('input')
    verbs.add_parser('dual', help='Reinterpret a matrix on the other side of the duality').add_argument('input')
    verbs.add_parser('verify', help='Re-verify every report in a directory').add_argument('directory', nargs='?')
    return parser


def overrides_from_args(args: argparse.Namespace) -> Dict[str, Dict[str, Any]]:
    overrides: Dict[str, Dict[str, Any]] = {}

    def put(section: str, key: str, value: Any) -> None:
        if value is not None:
            overrides.setdefault(section, {})[key] = value

    if args.ring is not None:
        overrides["ring"] = dict(args.ring)
    put("pattern", "prime", args.pattern)
    put("scenario", "seed", args.seed)
    put("scenario", "split_depth", args.split_depth)
    put("scenario", "certificate_levels", args.levels)
    put("results", "output_dir", args.out)
    put("logging", "level", args.log_level)
    return overrides


def _configured_level(config_path: str, override: Optional[str]) -> str:
    if override:
        return override
    try:
        with open(config_path, 'r') as f:
            loaded = yaml.safe_load(f) or {}
        return loaded.get("logging", {}).get("level", DEFAULT_CONFIG["logging"]["level"])
    except (OSError, yaml.YAMLError, AttributeError):
        return DEFAULT_CONFIG["logging"]["level"]


def run(args: argparse.Namespace) -> int:
    runner = ScenarioRunner(args.config, overrides_from_args(args))
    if args.verb == 'sample':
        report = runner.cmd_sample(args.rows, args.cols)
    elif args.verb == 'decompose':
        report = runner.cmd_decompose(args.input)
    elif args.verb == 'certify-semiperfect':
        if args.input is None and args.pattern is None:
            raise InputError("certify-semiperfect needs a descriptor file or --pattern")
        report = runner.cmd_certify_semiperfect(args.input)
    elif args.verb == 'jacobson-gap':
        report = runner.cmd_jacobson_gap()
    elif args.verb == 'lift':
        report = runner.cmd_lift(args.input)
    elif args.verb == 'split':
        report = runner.cmd_split(args.input)
    elif args.verb == 'radical':
        report = runner.cmd_radical(args.input)
    elif args.verb == 'cover':
        report = runner.cmd_cover(args.input)
    elif args.verb == 'dual':
        report = runner.cmd_dual(args.input)
    else:
        report = runner.verify_report(args.directory)

    print(f"\n{report.verb} summary:")
    for claim in report.claims:
        print(f"- {claim.claim}: {'true' if claim.outcome else 'FALSE'}")
    return EXIT_OK if report.passed else EXIT_CLAIM_FAILED


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, _configured_level(args.config, args.log_level)),
                        format=LOG_FORMAT)
    try:
        return run(args)
    except BackendUnsupported as e:
        logger.error(f"Unsupported operation: {e}")
        return EXIT_UNSUPPORTED
    except (InputError, json.JSONDecodeError, yaml.YAMLError) as e:
        logger.error(f"Invalid input: {e}")
        return EXIT_INVALID_INPUT
    except SemiperfectError as e:
        logger.error(f"Mathematical obstruction: {e}")
        return EXIT_CLAIM_FAILED
    except Exception as e:
        logger.error(f"Error running scenario: {str(e)}", exc_info=True)
        raise


if __name__ == '__main__':
    sys.exit(main())
