import argparse
import logging
import sys
from pathlib import Path

from src.config import ConfigError, Settings, load_config
from src.output import ComparisonReport, write_output
from src.scenarios import InfeasibleMappingError, run_scenario

logger = logging.getLogger(__name__)

SCENARIOS = ("vacuum", "matter", "levels", "compare", "map-experiment")

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_COMPARISON_FAILED = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nu-walk",
        description="Quantum-walk simulation of neutrino flavor oscillations",
    )
    parser.add_argument("scenario", choices=SCENARIOS)
    parser.add_argument("--config", required=True, help="JSON scenario configuration")
    parser.add_argument("--out", help="output file (default: output.path, NU_WALK_OUTPUT_DIR or stdout)")
    parser.add_argument("--format", choices=("csv", "json"), help="output format (default: output.format)")
    return parser


def _output_path(args, config, settings: Settings):
    if args.out:
        return Path(args.out)
    if config.output.path:
        return Path(config.output.path)
    if settings.output_dir is not None:
        extension = args.format or config.output.format
        return settings.output_dir / f"{config.scenario}.{extension}"
    return None


def _fail(key: str, message: str) -> int:
    logger.error(f"{key}: {message}")
    print(f"error: {key}: {message}", file=sys.stderr)
    return EXIT_INVALID


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    try:
        settings = Settings.from_env()
    except ValueError as e:
        return _fail("environment", str(e))

    logging.basicConfig(
        level=getattr(logging, settings.log_level),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        stream=sys.stderr,
    )

    config = None
    try:
        config = load_config(args.config)
        if config.scenario != args.scenario:
            raise ConfigError("scenario", f"config is for '{config.scenario}', not '{args.scenario}'")
        result = run_scenario(config, show_progress=settings.show_progress)
    except ConfigError as e:
        return _fail(e.key, e.message)
    except InfeasibleMappingError as e:
        return _fail("lattice.steps", str(e))
    except ValueError as e:
        return _fail(config.scenario if config is not None else "config", str(e))

    fmt = args.format or config.output.format
    path = _output_path(args, config, settings)
    text = write_output(result, fmt, path)
    if path is None:
        sys.stdout.write(text)

    if isinstance(result, ComparisonReport) and not result.passed:
        print(
            f"error: compare: max deviation {result.max_deviation:.3e} exceeds {result.tolerance:.1e}",
            file=sys.stderr,
        )
        return EXIT_COMPARISON_FAILED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
