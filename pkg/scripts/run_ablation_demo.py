"""Run the agent ablation matrix over a synthetic dataset with echo backends
and print the table. Echo backends reproduce gold workflows through the full
engine, so the interesting rows are the ones that cannot complete at all.

    python3 scripts/run_ablation_demo.py [seed]
"""

from __future__ import annotations

import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from workteam.config import DepsBuilder, load_config  # noqa: E402
from workteam.evaluation import (  # noqa: E402
    generate_synthetic_dataset,
    make_echo_deps,
    render_table,
    run_ablation,
)


def main() -> None:
    seed = int(sys.argv[1]) if len(sys.argv) > 1 else 1
    config = load_config(ROOT / "fixtures" / "echo_config.json")
    builder = DepsBuilder(config)
    samples = generate_synthetic_dataset(seed, 8, 4, builder.registry)
    rows = run_ablation(samples, lambda s: make_echo_deps(builder.registry, s))
    print(f"{len(samples)} synthetic samples (seed {seed}), echo backends\n")
    print(render_table(rows))
    print("\n('-' marks a metric the configuration cannot produce)")


if __name__ == "__main__":
    main()
