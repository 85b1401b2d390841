# SpikeLab command line entry point
import argparse
import asyncio
import logging
import sys

from .config import LOG_LEVEL
from .core.constants import EXIT_CHECK_FAILED, EXIT_CONFIG_INVALID, EXIT_OK, EXIT_SOLVER_FAILURE, HELP_MAIN_TEXT
from .core.database import get_recent_runs, init_db
from .core.exceptions import AcceptanceError, ConfigError, ParameterDomainError, PositivityError, SolverError
from .modules.scenarios import list_scenarios, load_scenario, resolve_scenario, run_scenario, scenario_to_ini, validate_scenario

logging.basicConfig(
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s", level=getattr(logging, LOG_LEVEL)
)
logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spikelab", description=HELP_MAIN_TEXT,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    verbs = parser.add_subparsers(dest="verb", required=True)

    run_parser = verbs.add_parser("run", help="run a built-in scenario or an INI document")
    run_parser.add_argument("target", help="built-in scenario name or path to an INI document")
    run_parser.add_argument("--check", action="store_true", help="evaluate acceptance checks, exit 4 on failure")
    run_parser.add_argument("--output", default=None, help="root directory for artifacts")

    verbs.add_parser("list", help="show built-in scenarios and their defaults")

    validate_parser = verbs.add_parser("validate", help="parse and validate an INI document")
    validate_parser.add_argument("path")

    history_parser = verbs.add_parser("history", help="show recorded runs")
    history_parser.add_argument("n", nargs="?", type=int, default=10)
    return parser


# --- VERBS ---
async def run_command(args) -> int:
    scenario = resolve_scenario(args.target)
    manifest = await run_scenario(scenario, output_root=args.output, check=args.check)
    print(f"{scenario.name}: {len(manifest['artifacts'])} artifacts in {manifest['wall_time']:.1f}s")
    for check in manifest.get("checks", []):
        print(f"  [{'PASS' if check['passed'] else 'FAIL'}] {check['check']}")
    return EXIT_OK


def list_command() -> int:
    for name, scenario in list_scenarios().items():
        print(f"# {name} ({scenario.kind})")
        print(scenario_to_ini(scenario))
    return EXIT_OK


def validate_command(args) -> int:
    scenario = validate_scenario(load_scenario(args.path))
    print(f"{scenario.name}: valid {scenario.kind} scenario")
    return EXIT_OK


def history_command(args) -> int:
    init_db()
    runs = get_recent_runs(args.n)
    if not runs:
        print("No runs recorded yet.")
    for entry in runs:
        wall = f"{entry['wall_time']:.1f}s" if entry["wall_time"] is not None else "-"
        print(f"{entry['id']:>5}  {entry['started_at']}  {entry['scenario']:<12} {entry['kind']:<15} {entry['status']:<7} {wall}")
    return EXIT_OK


async def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.verb == "run":
            return await run_command(args)
        if args.verb == "list":
            return list_command()
        if args.verb == "validate":
            return validate_command(args)
        return history_command(args)
    except (ConfigError, ParameterDomainError) as e:
        logger.error(f"Invalid configuration: {e}")
        return EXIT_CONFIG_INVALID
    except AcceptanceError as e:
        logger.error(f"{e}")
        return EXIT_CHECK_FAILED
    except (SolverError, PositivityError) as e:
        logger.error(f"Solver failure: {e}", exc_info=True)
        return EXIT_SOLVER_FAILURE


def cli() -> None:
    try:
        sys.exit(asyncio.run(main()))
    except KeyboardInterrupt:
        logger.info("SpikeLab stopped by user.")
    except Exception as e:
        logger.critical(f"SpikeLab crashed unexpectedly at top level: {e}", exc_info=True)
        sys.exit(1)


if __name__ == "__main__":
    cli()
