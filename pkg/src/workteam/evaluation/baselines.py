"""Reference systems: a single-model prompt baseline and a retrieve-then-generate baseline.

Both generate the whole workflow in one completion. The single-model baseline
sees every component plus a few in-context examples; the retrieval baseline
sees only the top-k components most similar to the instruction. Unparseable
predictions score as empty workflows (automatic misses) rather than aborting a
run; only transport failures escalate.
"""

from __future__ import annotations

from typing import Optional, Sequence

from ..gateway import ActionParseError, Backend, ChatMessage, complete, extract_json_array
from ..registry import Registry, list_components
from ..retrieval import ComponentFilter, Embedder
from ..workflow import TaskStep, Workflow, WorkflowError, serialize_workflow, workflow_to_obj
import json

from .dataset import DatasetSample
from .synth import generate_synthetic_dataset

BASELINE_SYSTEM_PROMPT = (
    "You are a workflow generation expert. I will provide you with a textual "
    "instruction and descriptions of all candidate components, including their "
    "functionalities and detailed parameter information. Please select the "
    "appropriate components based on the instruction, arrange them according to "
    "the logical flow specified in the instruction, and finally populate the "
    "parameters of the selected components as indicated by the instruction."
)

EXAMPLE_SEPARATOR = "------------"


def _component_information(registry: Registry, names: Optional[Sequence[str]] = None) -> str:
    chosen = sorted(names) if names is not None else [c.name for c in list_components(registry)]
    lines = []
    for name in chosen:
        comp = registry.components[name]
        lines.append(f"- {comp.name}: {comp.description}")
        desc = registry.descriptions[name]
        tmpl = registry.templates[name]
        for pname in sorted(tmpl.parameter):
            f = desc.params.get(pname)
            meaning = f.meaning if f else ""
            ptype = f.type if f else ""
            allowed = f.allowed if f else ""
            default = json.dumps(tmpl.parameter[pname], sort_keys=True, ensure_ascii=False)
            lines.append(
                f"    {pname}: {meaning} (type: {ptype}; allowed: {allowed}; default: {default})"
            )
    return "\n".join(lines)


def _instruction_block(sample: DatasetSample) -> str:
    text = sample.instruction
    if sample.input_workflow is not None:
        text += f"\nCurrent workflow: {serialize_workflow(sample.input_workflow)}"
    return text


def build_baseline_prompt(
    sample: DatasetSample,
    registry: Registry,
    examples: Sequence[DatasetSample],
    candidate_names: Optional[Sequence[str]] = None,
) -> list[ChatMessage]:
    """The one-shot generation prompt; example blocks appear once per example."""
    parts = ["Component Information:", _component_information(registry, candidate_names), ""]
    if examples:
        parts.append("Examples:")
        for ex in examples:
            parts.append(EXAMPLE_SEPARATOR)
            parts.append(f"**Instruction**: {_instruction_block(ex)}")
            parts.append(
                f"**Output Workflow**: {json.dumps(workflow_to_obj(ex.gold_workflow), sort_keys=True, ensure_ascii=False)}"
            )
        parts.append("")
    parts.append("Now the input is:")
    parts.append(f"**Instruction**: {_instruction_block(sample)}")
    parts.append("**Output Workflow**:")
    return [
        ChatMessage("system", BASELINE_SYSTEM_PROMPT),
        ChatMessage("user", "\n".join(parts)),
    ]


def parse_prediction(text: str) -> Workflow:
    """Best-effort workflow from model text; anything unusable becomes empty."""
    try:
        data = extract_json_array(text)
        steps = []
        for obj in data:
            if not isinstance(obj, dict) or "task" not in obj:
                return Workflow()
            params = obj.get("parameter", {})
            if not isinstance(params, dict):
                return Workflow()
            steps.append(TaskStep(obj["task"], params))
        return Workflow(tuple(steps))
    except (ActionParseError, WorkflowError):
        return Workflow()


def run_baseline_single_llm(
    samples: Sequence[DatasetSample],
    registry: Registry,
    llm: Backend,
    n_shots: int = 3,
    examples: Optional[Sequence[DatasetSample]] = None,
) -> list[Workflow]:
    """One prediction per sample from the all-components prompt."""
    if examples is None:
        examples = generate_synthetic_dataset(0, n_shots, 0, registry)
    shots = list(examples)[:n_shots]
    preds = []
    for sample in samples:
        messages = build_baseline_prompt(sample, registry, shots)
        text = complete(llm, messages)
        preds.append(parse_prediction(text))
    return preds


def run_baseline_rag(
    samples: Sequence[DatasetSample],
    registry: Registry,
    embedder: Embedder,
    llm: Backend,
    k: int = 10,
) -> list[Workflow]:
    """Retrieve top-k candidates per instruction, then generate in one call."""
    component_filter = ComponentFilter(registry, embedder)
    preds = []
    for sample in samples:
        candidates = component_filter.filter(sample.instruction, k)
        names = [sc.component.name for sc in candidates]
        messages = build_baseline_prompt(sample, registry, examples=[], candidate_names=names)
        text = complete(llm, messages)
        preds.append(parse_prediction(text))
    return preds
