"""
Run every bundled example config and check its output.

Configs with a golden file under data/golden/ must reproduce it: byte for
byte, or value for value within GOLDEN_TOLERANCE for walk outputs whose last
printed digits depend on the platform's floating point. The rest are run
twice and must produce identical bytes.
"""
from pathlib import Path
from typing import Dict, List
import argparse
import logging
import math
import sys

from src.config import load_config
from src.scenarios import run_scenario

logger = logging.getLogger(__name__)

ROOT = Path(__file__).resolve().parent.parent
EXAMPLES_DIR = ROOT / "data" / "examples"
GOLDEN_DIR = ROOT / "data" / "golden"
GOLDEN_TOLERANCE = 1e-9


def render_example(config_path: Path) -> str:
    config = load_config(config_path)
    return run_scenario(config).render(config.output.format)


def _cells(line: str) -> List[str]:
    if line.startswith("# "):
        return line[2:].split("=", 1)
    return line.split(",")


def _cells_agree(expected: str, actual: str, tolerance: float) -> bool:
    if expected == actual:
        return True
    try:
        first, second = float(expected), float(actual)
    except ValueError:
        return False
    return math.isclose(first, second, rel_tol=tolerance, abs_tol=tolerance)


def outputs_agree(expected: str, actual: str, tolerance: float = GOLDEN_TOLERANCE) -> bool:
    """
    Compare two CSV outputs cell by cell, numbers within `tolerance`.

    `# key=value` comment lines are compared the same way; headers and any
    other text must match exactly.
    """
    expected_lines, actual_lines = expected.splitlines(), actual.splitlines()
    if len(expected_lines) != len(actual_lines):
        return False
    for expected_line, actual_line in zip(expected_lines, actual_lines):
        expected_cells, actual_cells = _cells(expected_line), _cells(actual_line)
        if len(expected_cells) != len(actual_cells):
            return False
        if not all(_cells_agree(e, a, tolerance) for e, a in zip(expected_cells, actual_cells)):
            return False
    return True


def run_evaluation(
    examples_dir: Path = EXAMPLES_DIR,
    golden_dir: Path = GOLDEN_DIR,
    update: bool = False,
) -> List[Dict[str, str]]:
    results = []

    for config_path in sorted(Path(examples_dir).glob("*.json")):
        config = load_config(config_path)
        golden_path = Path(golden_dir) / f"{config_path.stem}.{config.output.format}"
        text = render_example(config_path)

        if update:
            status = "updated" if golden_path.exists() else "created"
            golden_path.parent.mkdir(parents=True, exist_ok=True)
            golden_path.write_text(text, encoding="utf-8", newline="\n")
        elif golden_path.exists():
            golden = golden_path.read_text(encoding="utf-8")
            if golden == text:
                status = "match"
            elif config.output.format == "csv" and outputs_agree(golden, text):
                status = "close"
            else:
                status = "mismatch"
        else:
            status = "deterministic" if render_example(config_path) == text else "nondeterministic"

        logger.info({"event": "example", "config": config_path.name, "status": status})
        results.append({"config": config_path.name, "status": status})

    return results


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="Check bundled examples against golden outputs")
    parser.add_argument("--update", action="store_true", help="write golden files for every example")
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
    results = run_evaluation(update=args.update)
    failed = [r for r in results if r["status"] in ("mismatch", "nondeterministic")]
    for result in results:
        print(f"{result['status']:>16}  {result['config']}")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
