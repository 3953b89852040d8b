"""Dataset schema (JSON Lines) and corpus statistics.

One sample per line: {"id", "type", "instruction", "input_workflow"?, "gold_workflow"}.
``type`` is "creation" or "modification"; modification samples must carry the
workflow being modified, creation samples must not.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from ..registry import Registry
from ..workflow import (
    TaskStep,
    Workflow,
    WorkflowError,
    validate_workflow,
    workflow_to_obj,
)

SAMPLE_TYPES = ("creation", "modification")


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class DatasetSample:
    id: str
    type: str
    instruction: str
    gold_workflow: Workflow
    input_workflow: Optional[Workflow] = None


@dataclass(frozen=True)
class DatasetStats:
    size: int
    component_count: int
    param_count: int
    avg_components: float
    avg_params_per_component: float


def _workflow_from_obj(data, where: str) -> Workflow:
    if not isinstance(data, list):
        raise DatasetError(f"{where}: workflow must be a JSON array")
    steps = []
    for i, obj in enumerate(data):
        if not isinstance(obj, dict) or "task" not in obj or set(obj) - {"task", "parameter"}:
            raise DatasetError(f"{where}: step {i} must be a {{task, parameter}} object")
        try:
            steps.append(TaskStep(obj["task"], obj.get("parameter", {})))
        except WorkflowError as exc:
            raise DatasetError(f"{where}: step {i}: {exc}") from exc
    return Workflow(tuple(steps))


def sample_from_obj(obj: dict, where: str = "sample") -> DatasetSample:
    if not isinstance(obj, dict):
        raise DatasetError(f"{where}: expected an object")
    required = {"id", "type", "instruction", "gold_workflow"}
    missing = required - set(obj)
    if missing:
        raise DatasetError(f"{where}: missing fields {sorted(missing)}")
    extra = set(obj) - required - {"input_workflow"}
    if extra:
        raise DatasetError(f"{where}: unknown fields {sorted(extra)}")
    sid, stype, instruction = obj["id"], obj["type"], obj["instruction"]
    if not isinstance(sid, str) or not sid:
        raise DatasetError(f"{where}: id must be a non-empty string")
    if stype not in SAMPLE_TYPES:
        raise DatasetError(f"{where}: type must be one of {SAMPLE_TYPES}")
    if not isinstance(instruction, str) or not instruction:
        raise DatasetError(f"{where}: instruction must be a non-empty string")
    gold = _workflow_from_obj(obj["gold_workflow"], f"{where}.gold_workflow")
    input_wf = None
    if stype == "modification":
        if "input_workflow" not in obj:
            raise DatasetError(f"{where}: modification sample requires input_workflow")
        input_wf = _workflow_from_obj(obj["input_workflow"], f"{where}.input_workflow")
    elif "input_workflow" in obj:
        raise DatasetError(f"{where}: creation sample must not carry input_workflow")
    return DatasetSample(sid, stype, instruction, gold, input_wf)


def sample_to_obj(sample: DatasetSample) -> dict:
    obj = {
        "id": sample.id,
        "type": sample.type,
        "instruction": sample.instruction,
        "gold_workflow": workflow_to_obj(sample.gold_workflow),
    }
    if sample.input_workflow is not None:
        obj["input_workflow"] = workflow_to_obj(sample.input_workflow)
    return obj


def load_dataset(path: str | Path, registry: Optional[Registry] = None) -> list[DatasetSample]:
    """Read a JSONL dataset; with a registry, gold workflows must validate."""
    p = Path(path)
    if not p.is_file():
        raise DatasetError(f"dataset file not found: {p}")
    samples = []
    for lineno, line in enumerate(p.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DatasetError(f"line {lineno}: invalid JSON: {exc}") from exc
        sample = sample_from_obj(obj, f"line {lineno}")
        if registry is not None:
            report = validate_workflow(sample.gold_workflow, registry)
            if not report.ok:
                detail = "; ".join(i.detail for i in report.issues)
                raise DatasetError(f"line {lineno}: gold workflow invalid: {detail}")
        samples.append(sample)
    return samples


def save_dataset(samples: Sequence[DatasetSample], path: str | Path) -> None:
    lines = [
        json.dumps(sample_to_obj(s), sort_keys=True, separators=(",", ":"), ensure_ascii=False)
        for s in samples
    ]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def compute_stats(samples: Sequence[DatasetSample]) -> DatasetStats:
    """Counts over gold workflows: steps and parameters, with the two averages."""
    size = len(samples)
    component_count = sum(len(s.gold_workflow.steps) for s in samples)
    param_count = sum(
        len(step.parameter) for s in samples for step in s.gold_workflow.steps
    )
    return DatasetStats(
        size=size,
        component_count=component_count,
        param_count=param_count,
        avg_components=component_count / size if size else 0.0,
        avg_params_per_component=param_count / component_count if component_count else 0.0,
    )
