#!/usr/bin/env python3
"""
Test runner for the splurge-cnoma-capacity package.

Runs one test group under pytest: the per-module suites, the layered
unit/integration/edge-case suites, the timing suite, or everything that is
not marked slow.
"""

import argparse
import logging
import subprocess
import sys
from pathlib import Path
from typing import Dict, List, Tuple

logger = logging.getLogger(__name__)
logging.basicConfig(level=logging.INFO)

TESTS_DIR = Path(__file__).resolve().parent

# group -> (paths relative to tests/, extra pytest arguments, description)
GROUPS: Dict[str, Tuple[List[str], List[str], str]] = {
    'all': (['.'], [], "All tests"),
    'fast': (['.'], ['-m', 'not slow'], "All tests except those marked slow"),
    'modules': (
        [
            'test_special_fn.py', 'test_channel.py', 'test_oam.py', 'test_mc_sim.py', 'test_closed_form.py',
            'test_experiments.py', 'test_config.py', 'test_results_store.py', 'test_cli.py',
        ],
        [],
        "Per-module suites"
    ),
    'unit': (['unit'], [], "Unit tests"),
    'integration': (['integration'], [], "Monte Carlo against closed-form integration tests"),
    'edge': (['edge_cases'], [], "Limiting channels and extreme operating points"),
    'performance': (['performance'], ['-x', '-s'], "Timing tests with logged summaries"),
}


def run_command(cmd: List[str], description: str) -> int:
    """Run a command and return its exit code."""
    logger.info("=" * 60)
    logger.info(f"Running: {description}")
    logger.info(f"Command: {' '.join(cmd)}")
    logger.info("=" * 60)
    try:
        return subprocess.run(cmd, check=False).returncode
    except KeyboardInterrupt:
        logger.info("Test run interrupted by user.")
        return 1


def main() -> int:
    """Parse the group and options, then run pytest."""
    parser = argparse.ArgumentParser(
        description="Run tests for splurge-cnoma-capacity",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python tests/run_tests.py fast                 # Everything except slow tests
  python tests/run_tests.py integration -v       # Monte Carlo against closed form, verbose
  python tests/run_tests.py --coverage modules   # Per-module suites with coverage
        """
    )
    parser.add_argument('group', choices=sorted(GROUPS), help='Test group to run')
    parser.add_argument('--coverage', action='store_true', help='Report coverage of splurge_cnoma_capacity')
    parser.add_argument('--verbose', '-v', action='store_true', help='Verbose pytest output')
    parser.add_argument('--fail-fast', '-x', action='store_true', help='Stop on first failure')
    args = parser.parse_args()

    paths, extra, description = GROUPS[args.group]
    cmd = [sys.executable, '-m', 'pytest', *extra]
    if args.coverage:
        cmd.extend(['--cov=splurge_cnoma_capacity', '--cov-report=term-missing'])
    if args.verbose:
        cmd.append('-v')
    if args.fail_fast and '-x' not in cmd:
        cmd.append('-x')

    existing = [str(TESTS_DIR / path) for path in paths if (TESTS_DIR / path).exists()]
    if not existing:
        logger.warning(f"No test paths found for group '{args.group}'")
        return 1
    return run_command(cmd + existing, description)


if __name__ == '__main__':
    sys.exit(main())
