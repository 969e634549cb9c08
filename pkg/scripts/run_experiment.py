#!/usr/bin/env python3
"""
Run a batch of experiment presets and print a summary.

Each preset is run through the same entry point as `python -m qbspeed.cli`,
with its outputs under <output-root>/<preset name>.

Usage:
    python scripts/run_experiment.py
    python scripts/run_experiment.py config/rabi_speed.json config/witness_ghz.json --seed 7
    python scripts/run_experiment.py --output-root output/nightly --jobs 4
"""
import argparse
import sys
import time
from pathlib import Path

from qbspeed.cli.main import main as run_one

CONFIG_DIR = Path(__file__).resolve().parent.parent / 'config'
EXIT_LABELS = {0: 'ok', 2: 'config error', 3: 'numerical failure', 4: 'verification failure'}


def run_batch(configs, output_root: Path, seed=None, jobs=None):
    """Run each preset in turn; returns a list of (name, exit code, seconds)."""
    results = []
    for path in configs:
        name = Path(path).stem
        argv = [str(path), '--output', str(output_root / name)]
        if seed is not None:
            argv += ['--seed', str(seed)]
        if jobs is not None:
            argv += ['--jobs', str(jobs)]

        print(f"\nRunning {name}")
        print("-" * 60)
        started = time.monotonic()
        code = run_one(argv)
        elapsed = time.monotonic() - started
        results.append((name, code, elapsed))
    return results


def main():
    parser = argparse.ArgumentParser(
        description='Run quantum battery speed experiment presets'
    )
    parser.add_argument(
        'configs',
        nargs='*',
        help='Preset files (default: every JSON file in config/)'
    )
    parser.add_argument(
        '--output-root',
        default='output',
        help='Directory receiving one subdirectory per preset'
    )
    parser.add_argument(
        '--seed', '-s',
        type=int,
        help='Seed override applied to every preset'
    )
    parser.add_argument(
        '--jobs', '-j',
        type=int,
        help='Worker threads applied to every preset'
    )
    args = parser.parse_args()

    configs = args.configs or sorted(str(p) for p in CONFIG_DIR.glob('*.json'))
    if not configs:
        print(f"No presets found in {CONFIG_DIR}")
        return 2

    print("=" * 60)
    print("Quantum Battery Speed - Experiment Batch")
    print("=" * 60)
    print(f"Presets: {len(configs)}")
    print(f"Output root: {args.output_root}")

    results = run_batch(configs, Path(args.output_root), seed=args.seed, jobs=args.jobs)

    print("\n" + "=" * 60)
    print("Summary")
    print("=" * 60)
    for name, code, elapsed in results:
        mark = '✓' if code == 0 else '✗'
        print(f"{mark} {name:<28} {EXIT_LABELS.get(code, f'exit {code}'):<22} {elapsed:7.1f}s")

    failed = [code for _, code, _ in results if code != 0]
    print(f"\n{len(results) - len(failed)}/{len(results)} presets succeeded")
    return max(failed) if failed else 0


if __name__ == '__main__':
    sys.exit(main())
