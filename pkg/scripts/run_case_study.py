"""Replay the scripted case-study session and print the transcript + workflow.

    python3 scripts/run_case_study.py
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from workteam import run_session, serialize_workflow  # noqa: E402
from workteam.config import DepsBuilder, load_config  # noqa: E402


def main() -> None:
    config = load_config(ROOT / "fixtures" / "casestudy" / "config.json")
    builder = DepsBuilder(config)
    session = json.loads(
        (ROOT / "fixtures" / "casestudy" / "golden_session.json").read_text(encoding="utf-8")
    )
    result = run_session(session["instruction"], deps=builder.deps())
    print("instruction:")
    print(f"  {session['instruction']}\n")
    print("transcript:")
    for event in result.transcript.events:
        payload = json.dumps(event.payload, ensure_ascii=False)
        if len(payload) > 100:
            payload = payload[:97] + "..."
        print(f"  {event.seq:2d} {event.actor:<14} {event.kind:<12} {payload}")
    print("\nfinal workflow:")
    print(serialize_workflow(result.workflow))


if __name__ == "__main__":
    main()
