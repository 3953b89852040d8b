"""The component orchestration and parameter filling tools.

Both are LLM-backed: orchestration turns an instruction plus candidate
components into an ordered component flow; filling populates each step's blank
parameter template. Outputs are requested as bare JSON arrays. A reply that
fails to parse or validate gets one corrective re-ask, then the failure
escalates.

Filling trusts the model only for the values it mentions: keys the model omits
are completed from the blank template defaults engine-side, and keys outside
the template are rejected. The returned workflow therefore always carries
exactly the template's key set per step.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass

from .gateway import (
    ActionParseError,
    Backend,
    ChatMessage,
    complete,
    extract_json_array,
)
from .registry import BlankTemplate, ParamDescription
from .retrieval import ScoredComponent
from .workflow import (
    ComponentFlow,
    TaskStep,
    Workflow,
    WorkflowError,
    WorkflowParseError,
    json_kind,
    serialize_flow,
)


class ToolOutputError(RuntimeError):
    """The tool model produced unusable output even after the corrective re-ask."""


@dataclass(frozen=True)
class OrchestrationRequest:
    inst_o: str
    candidates: tuple[ScoredComponent, ...]

    def __post_init__(self) -> None:
        if not self.candidates:
            raise ValueError("orchestration requires a non-empty candidate list")


@dataclass(frozen=True)
class FillingRequest:
    inst_f: str
    flow: ComponentFlow
    descriptions: tuple[ParamDescription, ...]
    templates: tuple[BlankTemplate, ...]

    def __post_init__(self) -> None:
        if not (len(self.flow.steps) == len(self.descriptions) == len(self.templates)):
            raise ValueError("flow, descriptions and templates must be parallel")
        for step, desc, tmpl in zip(self.flow.steps, self.descriptions, self.templates):
            if step.task != desc.component or step.task != tmpl.component:
                raise ValueError(
                    f"misaligned filling request at {step.task!r} "
                    f"(description {desc.component!r}, template {tmpl.component!r})"
                )


ORCHESTRATION_SYSTEM_PROMPT = (
    "You are the component orchestration tool in the NL2Workflow system. Given a "
    "user instruction and a list of candidate components, select the components "
    "the instruction needs and arrange them in the order the instruction implies. "
    'Output a single JSON array of objects of the form {"task": "<component-name>"}, '
    "using only names from the candidate list, and output nothing else."
)

FILLING_SYSTEM_PROMPT = (
    "You are the parameter filling tool in the NL2Workflow system. Given a user "
    "instruction, a component flow, and each component's parameter descriptions "
    "and parameter template, fill in the parameter values the instruction "
    "specifies. Keep every other parameter at its template value. Output a single "
    'JSON array of objects of the form {"task": "<component-name>", "parameter": '
    "{...}}, one per flow step in the same order, and output nothing else."
)


def build_orchestration_prompt(req: OrchestrationRequest) -> list[ChatMessage]:
    """Deterministic prompt; candidate block sorted by component name."""
    lines = [f"Instruction:\n{req.inst_o}", "", "Candidate components:"]
    for sc in sorted(req.candidates, key=lambda sc: sc.component.name):
        lines.append(f"- {sc.component.name}: {sc.component.description}")
    return [
        ChatMessage("system", ORCHESTRATION_SYSTEM_PROMPT),
        ChatMessage("user", "\n".join(lines)),
    ]


def _describe_params(desc: ParamDescription) -> list[str]:
    out = []
    for name in sorted(desc.params):
        f = desc.params[name]
        out.append(f"    {name}: {f.meaning} (type: {f.type}; allowed: {f.allowed})")
    return out


def build_filling_prompt(req: FillingRequest) -> list[ChatMessage]:
    """Deterministic prompt; one block per flow step in positional order."""
    lines = [f"Instruction:\n{req.inst_f}", "", f"Component flow:\n{serialize_flow(req.flow)}", ""]
    for i, (step, desc, tmpl) in enumerate(
        zip(req.flow.steps, req.descriptions, req.templates)
    ):
        lines.append(f"Step {i + 1}: {step.task}")
        lines.append("  parameter descriptions:")
        lines.extend(_describe_params(desc) or ["    (no parameters)"])
        template_json = json.dumps(tmpl.parameter, sort_keys=True, ensure_ascii=False)
        lines.append(f"  parameter template: {template_json}")
        lines.append("")
    return [
        ChatMessage("system", FILLING_SYSTEM_PROMPT),
        ChatMessage("user", "\n".join(lines).rstrip()),
    ]


def _ask_array(llm: Backend, messages: list[ChatMessage], validate, corrective: str):
    """Complete, parse the array, validate; one corrective retry on any failure."""
    text = complete(llm, messages)
    try:
        return validate(extract_json_array(text))
    except (ActionParseError, WorkflowError, ToolOutputError) as first:
        retry_messages = messages + [
            ChatMessage("assistant", text),
            ChatMessage("user", f"{corrective} Problem with your last reply: {first}"),
        ]
        retry = complete(llm, retry_messages)
        try:
            return validate(extract_json_array(retry))
        except (ActionParseError, WorkflowError, ToolOutputError) as second:
            raise ToolOutputError(str(second)) from second


def orchestrate(req: OrchestrationRequest, llm: Backend) -> ComponentFlow:
    """Generate a component flow; every task must come from the candidate set."""
    allowed = {sc.component.name for sc in req.candidates}

    def validate(data: list) -> ComponentFlow:
        steps = []
        for i, obj in enumerate(data):
            if not isinstance(obj, dict) or set(obj) - {"task", "parameter"} or "task" not in obj:
                raise ToolOutputError(f"flow step {i} must be an object with a 'task' field")
            if obj.get("parameter"):
                raise ToolOutputError(f"flow step {i} must not carry parameters")
            name = obj["task"]
            if not isinstance(name, str) or not name:
                raise ToolOutputError(f"flow step {i} has an invalid task name")
            if name not in allowed:
                raise ToolOutputError(f"component {name!r} is not among the candidates")
            steps.append(TaskStep(name))
        if not steps:
            raise ToolOutputError("orchestration produced an empty flow")
        return ComponentFlow(tuple(steps))

    corrective = (
        'Reply with exactly one JSON array of {"task": "<name>"} objects, non-empty, '
        "using only candidate component names."
    )
    return _ask_array(llm, build_orchestration_prompt(req), validate, corrective)


def fill_parameters(req: FillingRequest, llm: Backend) -> Workflow:
    """Fill each step's template; omitted keys fall back to template defaults."""

    def validate(data: list) -> Workflow:
        if len(data) != len(req.flow.steps):
            raise ToolOutputError(
                f"expected {len(req.flow.steps)} steps, got {len(data)}"
            )
        steps = []
        for i, (obj, flow_step, tmpl) in enumerate(zip(data, req.flow.steps, req.templates)):
            if not isinstance(obj, dict) or "task" not in obj:
                raise ToolOutputError(f"step {i} must be an object with a 'task' field")
            if obj["task"] != flow_step.task:
                raise ToolOutputError(
                    f"step {i} changed task {flow_step.task!r} to {obj['task']!r}"
                )
            provided = obj.get("parameter", {})
            if not isinstance(provided, dict):
                raise ToolOutputError(f"step {i}: 'parameter' must be an object")
            merged = copy.deepcopy(tmpl.parameter)
            for key, value in provided.items():
                if key not in merged:
                    raise ToolOutputError(f"step {i}: {flow_step.task!r} has no parameter {key!r}")
                default = merged[key]
                if default is not None and json_kind(default) != json_kind(value):
                    raise ToolOutputError(
                        f"step {i}: {flow_step.task}.{key} must be of kind {json_kind(default)}"
                    )
                merged[key] = value
            steps.append(TaskStep(flow_step.task, merged))
        return Workflow(tuple(steps))

    corrective = (
        'Reply with exactly one JSON array of {"task", "parameter"} objects, one per '
        "flow step in order, using only parameter names from each step's template."
    )
    return _ask_array(llm, build_filling_prompt(req), validate, corrective)
