"""Workflow data model: task steps, flows, parsing, canonical JSON, validation, diffing.

A workflow is an ordered list of task steps; each step names a component and
carries a parameter map. A component flow is the same structure with every
parameter map empty (the orchestration result, before filling).

Wire format: a JSON array of objects, each ``{"task": <str>, "parameter": <obj>}``.
``parameter`` may be omitted on input (treated as empty) but is always emitted
for workflows. Flows serialize without the ``parameter`` key.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Union

ParamValue = Union[None, bool, int, float, str, dict, list]

# Sentinel for "key absent" in diffs (None is a legal parameter value).
MISSING = object()


class WorkflowError(ValueError):
    """A workflow or step violates the data model."""


class WorkflowParseError(WorkflowError):
    """Input text is not a valid workflow in the wire format."""


def _check_value(value: Any, where: str) -> None:
    if value is None or isinstance(value, (str, bool)):
        return
    if isinstance(value, (int, float)):
        if isinstance(value, float) and not math.isfinite(value):
            raise WorkflowError(f"{where}: non-finite number {value!r}")
        return
    if isinstance(value, dict):
        for k, v in value.items():
            if not isinstance(k, str) or not k:
                raise WorkflowError(f"{where}: map keys must be non-empty strings")
            _check_value(v, f"{where}.{k}")
        return
    if isinstance(value, list):
        for i, v in enumerate(value):
            _check_value(v, f"{where}[{i}]")
        return
    raise WorkflowError(f"{where}: unsupported value type {type(value).__name__}")


@dataclass(frozen=True)
class TaskStep:
    """One workflow step: a component name plus its parameter map."""

    task: str
    parameter: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not isinstance(self.task, str) or not self.task:
            raise WorkflowError("step task name must be a non-empty string")
        if not isinstance(self.parameter, dict):
            raise WorkflowError(f"step {self.task!r}: parameter must be a map")
        for key, value in self.parameter.items():
            if not isinstance(key, str) or not key:
                raise WorkflowError(f"step {self.task!r}: parameter names must be non-empty strings")
            _check_value(value, f"{self.task}.{key}")


@dataclass(frozen=True)
class Workflow:
    """Ordered steps with populated parameters."""

    steps: tuple[TaskStep, ...] = ()

    def task_sequence(self) -> tuple[str, ...]:
        return tuple(s.task for s in self.steps)


@dataclass(frozen=True)
class ComponentFlow:
    """Ordered steps without parameters (orchestration output)."""

    steps: tuple[TaskStep, ...] = ()

    def __post_init__(self) -> None:
        for s in self.steps:
            if s.parameter:
                raise WorkflowError(f"flow step {s.task!r} must not carry parameters")

    def task_sequence(self) -> tuple[str, ...]:
        return tuple(s.task for s in self.steps)


def flow_of(workflow: Workflow) -> ComponentFlow:
    """Project a workflow onto its task sequence."""
    return ComponentFlow(tuple(TaskStep(s.task) for s in workflow.steps))


@dataclass(frozen=True)
class Issue:
    step_index: int
    kind: str  # unknown-component | unknown-parameter | type-mismatch
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    issues: tuple[Issue, ...] = ()


def _reject_duplicates(pairs: list[tuple[str, Any]]) -> dict:
    out: dict = {}
    for key, value in pairs:
        if key in out:
            raise WorkflowParseError(f"duplicate key {key!r} in object")
        out[key] = value
    return out


def _reject_constant(name: str) -> None:
    raise WorkflowParseError(f"non-finite number constant {name!r}")


def _loads_strict(text: str) -> Any:
    try:
        return json.loads(
            text, object_pairs_hook=_reject_duplicates, parse_constant=_reject_constant
        )
    except WorkflowParseError:
        raise
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise WorkflowParseError(f"malformed JSON: {exc}") from exc


def _step_from_obj(obj: Any, index: int, *, allow_parameter: bool = True) -> TaskStep:
    if not isinstance(obj, dict):
        raise WorkflowParseError(f"step {index}: expected an object, got {type(obj).__name__}")
    allowed = {"task", "parameter"} if allow_parameter else {"task"}
    extra = set(obj) - allowed
    if extra:
        raise WorkflowParseError(f"step {index}: unexpected keys {sorted(extra)}")
    if "task" not in obj:
        raise WorkflowParseError(f"step {index}: missing 'task'")
    params = obj.get("parameter", {})
    if not isinstance(params, dict):
        raise WorkflowParseError(f"step {index}: 'parameter' must be an object")
    try:
        return TaskStep(obj["task"], params)
    except WorkflowError as exc:
        raise WorkflowParseError(f"step {index}: {exc}") from exc


def parse_workflow(text: str) -> Workflow:
    """Parse the wire format into a Workflow, preserving step order.

    Raises WorkflowParseError on malformed JSON, a top-level shape other than a
    list of {task, parameter} objects, duplicate keys inside one object, or
    non-finite numbers.
    """
    data = _loads_strict(text)
    if not isinstance(data, list):
        raise WorkflowParseError("top level must be a JSON array of steps")
    return Workflow(tuple(_step_from_obj(obj, i) for i, obj in enumerate(data)))


def parse_flow(text: str) -> ComponentFlow:
    """Parse a component flow: a JSON array of {"task": name} objects.

    An explicit empty "parameter" object is tolerated on input.
    """
    data = _loads_strict(text)
    if not isinstance(data, list):
        raise WorkflowParseError("top level must be a JSON array of steps")
    steps = []
    for i, obj in enumerate(data):
        step = _step_from_obj(obj, i)
        if step.parameter:
            raise WorkflowParseError(f"step {i}: flow steps must not carry parameters")
        steps.append(TaskStep(step.task))
    return ComponentFlow(tuple(steps))


def _canonical_dumps(data: Any) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def step_to_obj(step: TaskStep) -> dict:
    return {"task": step.task, "parameter": step.parameter}


def workflow_to_obj(workflow: Workflow) -> list[dict]:
    return [step_to_obj(s) for s in workflow.steps]


def flow_to_obj(flow: ComponentFlow) -> list[dict]:
    return [{"task": s.task} for s in flow.steps]


def serialize_workflow(workflow: Workflow) -> str:
    """Canonical form: keys sorted, no insignificant whitespace, step order kept.

    Byte-identical across runs and platforms for equal workflows.
    """
    return _canonical_dumps(workflow_to_obj(workflow))


def serialize_flow(flow: ComponentFlow) -> str:
    return _canonical_dumps(flow_to_obj(flow))


def values_equal(a: ParamValue, b: ParamValue) -> bool:
    """Deep equality after canonicalization.

    Distinguishes kinds that Python ``==`` conflates: ``1 != 1.0 != True`` and
    ``"2" != 2``. Strings compare byte-exact.
    """
    return _canonical_dumps(a) == _canonical_dumps(b)


def validate_flow(flow: ComponentFlow, registry) -> ValidationReport:
    """One unknown-component issue per step whose task is not in the registry."""
    issues = [
        Issue(i, "unknown-component", f"component {s.task!r} is not in the registry")
        for i, s in enumerate(flow.steps)
        if s.task not in registry.components
    ]
    return ValidationReport(not issues, tuple(issues))


_KINDS = {str: "string", bool: "boolean", int: "number", float: "number", dict: "object", list: "list"}


def json_kind(value: ParamValue) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):  # bool is an int subclass; check first
        return "boolean"
    return _KINDS[type(value)]


def validate_workflow(workflow: Workflow, registry) -> ValidationReport:
    """Check filled steps against the registry's blank templates.

    Issues: unknown components, parameter keys absent from the component's
    blank template, and values whose JSON kind differs from the template
    default's kind. A null template default imposes no kind constraint.
    """
    issues: list[Issue] = []
    for i, step in enumerate(workflow.steps):
        template = registry.templates.get(step.task)
        if step.task not in registry.components or template is None:
            issues.append(Issue(i, "unknown-component", f"component {step.task!r} is not in the registry"))
            continue
        for key, value in step.parameter.items():
            if key not in template.parameter:
                issues.append(
                    Issue(i, "unknown-parameter", f"{step.task!r} has no parameter {key!r}")
                )
                continue
            default = template.parameter[key]
            if default is None:
                continue
            want, got = json_kind(default), json_kind(value)
            if want != got:
                issues.append(
                    Issue(i, "type-mismatch", f"{step.task}.{key}: expected {want}, got {got}")
                )
    return ValidationReport(not issues, tuple(issues))


@dataclass(frozen=True)
class ParamChange:
    step_index: int
    key: str
    before: Any  # MISSING when the key was added
    after: Any  # MISSING when the key was removed


@dataclass(frozen=True)
class StepEdit:
    index: int
    step: TaskStep


@dataclass(frozen=True)
class WorkflowDiff:
    added_steps: tuple[StepEdit, ...] = ()
    removed_steps: tuple[StepEdit, ...] = ()
    changed_params: tuple[ParamChange, ...] = ()

    def is_empty(self) -> bool:
        return not (self.added_steps or self.removed_steps or self.changed_params)


def diff_workflows(a: Workflow, b: Workflow) -> WorkflowDiff:
    """Structural diff from a to b.

    Positional: steps at the same index with the same task compare parameter by
    parameter; a task change at one index is a removed+added pair; length
    differences become removed/added tail steps. Empty diff iff the canonical
    serializations are equal.
    """
    added: list[StepEdit] = []
    removed: list[StepEdit] = []
    changed: list[ParamChange] = []
    common = min(len(a.steps), len(b.steps))
    for i in range(common):
        sa, sb = a.steps[i], b.steps[i]
        if sa.task != sb.task:
            removed.append(StepEdit(i, sa))
            added.append(StepEdit(i, sb))
            continue
        for key in sorted(set(sa.parameter) | set(sb.parameter)):
            before = sa.parameter.get(key, MISSING)
            after = sb.parameter.get(key, MISSING)
            if before is MISSING or after is MISSING:
                changed.append(ParamChange(i, key, before, after))
            elif not values_equal(before, after):
                changed.append(ParamChange(i, key, before, after))
    for i in range(common, len(a.steps)):
        removed.append(StepEdit(i, a.steps[i]))
    for i in range(common, len(b.steps)):
        added.append(StepEdit(i, b.steps[i]))
    return WorkflowDiff(tuple(added), tuple(removed), tuple(changed))


def apply_diff(a: Workflow, diff: WorkflowDiff) -> Workflow:
    """Replay a diff produced by diff_workflows(a, b), yielding b."""
    steps: dict[int, TaskStep] = dict(enumerate(a.steps))
    for edit in diff.removed_steps:
        steps.pop(edit.index, None)
    for edit in diff.added_steps:
        steps[edit.index] = edit.step
    by_index: dict[int, dict] = {i: dict(s.parameter) for i, s in steps.items()}
    for change in diff.changed_params:
        params = by_index[change.step_index]
        if change.after is MISSING:
            params.pop(change.key, None)
        else:
            params[change.key] = change.after
    return Workflow(
        tuple(TaskStep(steps[i].task, by_index[i]) for i in sorted(steps))
    )
