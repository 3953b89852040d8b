"""End-to-end evaluation drivers: engine runs over datasets and the agent
ablation matrix, plus rule-based fake backends for wiring checks.

The echo backends act like perfectly trained models: agents follow the
standard action chain and the tools answer with the sample's gold flow and
workflow. They exercise the full control loop (action parsing, tool calls,
validation, transcripts) and must drive every metric to 1.0; the garbage
backends must drive every metric to 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

from ..agents import EngineConfig, EngineDeps, EngineError, orchestrator_run, run_session
from ..gateway import Backend, ChatMessage, FunctionBackend
from ..registry import Registry
from ..retrieval import ComponentFilter, HashEmbedder
from ..tools import FILLING_SYSTEM_PROMPT, ORCHESTRATION_SYSTEM_PROMPT
from ..workflow import Workflow, flow_of, serialize_flow, serialize_workflow
from .dataset import DatasetSample
from .metrics import MetricsReport, arrangement_match, evaluate

DepsFactory = Callable[[Optional[DatasetSample]], EngineDeps]


@dataclass(frozen=True)
class AgentMask:
    supervisor: bool
    orchestrator: bool
    filler: bool

    @property
    def label(self) -> str:
        parts = [
            name
            for name, on in (("S", self.supervisor), ("O", self.orchestrator), ("F", self.filler))
            if on
        ]
        return "+".join(parts) if parts else "none"


FULL_TEAM = AgentMask(True, True, True)

# Row order: full team, no supervisor, orchestrator only, filler only, supervisor only.
DEFAULT_MATRIX = (
    FULL_TEAM,
    AgentMask(False, True, True),
    AgentMask(False, True, False),
    AgentMask(False, False, True),
    AgentMask(True, False, False),
)


@dataclass(frozen=True)
class AblationResult:
    emr: Optional[float]
    aa: Optional[float]
    pa: Optional[float]
    completed: bool
    note: str = ""
    report: Optional[MetricsReport] = None

    def to_obj(self) -> dict:
        return {
            "emr": self.emr,
            "aa": self.aa,
            "pa": self.pa,
            "completed": self.completed,
            "note": self.note,
        }


def _apply_mask(deps: EngineDeps, mask: AgentMask) -> EngineDeps:
    config = replace(
        deps.config,
        supervisor_enabled=mask.supervisor,
        orchestrator_enabled=mask.orchestrator,
        filler_enabled=mask.filler,
    )
    return replace(deps, config=config)


def run_workteam(
    samples: Sequence[DatasetSample],
    deps_factory: DepsFactory,
    mask: AgentMask = FULL_TEAM,
) -> list[Optional[Workflow]]:
    """One engine session per sample; engine failures become None (misses)."""
    preds: list[Optional[Workflow]] = []
    for sample in samples:
        deps = _apply_mask(deps_factory(sample), mask)
        try:
            result = run_session(sample.instruction, sample.input_workflow, deps=deps)
            preds.append(result.workflow)
        except EngineError:
            preds.append(None)
    return preds


def score_predictions(
    preds: Sequence[Optional[Workflow]], samples: Sequence[DatasetSample]
) -> MetricsReport:
    pairs = [
        (pred if pred is not None else Workflow(), sample.gold_workflow)
        for pred, sample in zip(preds, samples)
    ]
    return evaluate(pairs)


def _arrangement_only_row(
    samples: Sequence[DatasetSample], deps_factory: DepsFactory, mask: AgentMask
) -> AblationResult:
    """Orchestrator without filler: only the task arrangement can be scored."""
    hits = 0
    any_flow = False
    for sample in samples:
        deps = _apply_mask(deps_factory(sample), mask)
        try:
            flow = orchestrator_run(sample.instruction, deps)
        except EngineError:
            continue
        any_flow = True
        pred = Workflow(flow.steps)
        if arrangement_match(pred, sample.gold_workflow):
            hits += 1
    if not any_flow:
        return AblationResult(None, None, None, False, "the task cannot be completed")
    aa = hits / len(samples) if samples else 0.0
    return AblationResult(None, aa, None, True, "arrangement only")


def run_ablation(
    samples: Sequence[DatasetSample],
    deps_factory: DepsFactory,
    masks: Sequence[AgentMask] = DEFAULT_MATRIX,
) -> dict[str, AblationResult]:
    """Run each agent configuration over the samples.

    Configurations that cannot produce workflows at all (no orchestrator or no
    filler) come back as failure rows rather than errors.
    """
    rows: dict[str, AblationResult] = {}
    for mask in masks:
        if mask.orchestrator and not mask.filler:
            rows[mask.label] = _arrangement_only_row(samples, deps_factory, mask)
            continue
        preds = run_workteam(samples, deps_factory, mask)
        if preds and all(p is None for p in preds):
            rows[mask.label] = AblationResult(
                None, None, None, False, "the task cannot be completed"
            )
            continue
        report = score_predictions(preds, samples)
        rows[mask.label] = AblationResult(
            report.emr, report.aa, report.pa, True, report=report
        )
    return rows


def _action(analysis: str, action: str) -> str:
    return json.dumps({"analysis": analysis, "action": action}, ensure_ascii=False)


def _chain_backend(actions: list[tuple[str, str]]) -> Backend:
    """Replays an action chain by counting prior assistant turns in the prompt."""

    def fn(messages: Sequence[ChatMessage]) -> str:
        turn = sum(1 for m in messages if m.role == "assistant")
        analysis, action = actions[min(turn, len(actions) - 1)]
        return _action(analysis, action)

    return FunctionBackend(fn)


def make_echo_deps(
    registry: Registry,
    sample: DatasetSample,
    config: Optional[EngineConfig] = None,
    component_filter: Optional[ComponentFilter] = None,
) -> EngineDeps:
    """Deps whose fakes reproduce the sample's gold workflow through the engine."""
    gold = sample.gold_workflow

    def tool_fn(messages: Sequence[ChatMessage]) -> str:
        system = messages[0].content
        if system == ORCHESTRATION_SYSTEM_PROMPT:
            return serialize_flow(flow_of(gold))
        if system == FILLING_SYSTEM_PROMPT:
            return serialize_workflow(gold)
        raise AssertionError("echo tool backend got an unexpected prompt")

    if config is None:
        config = EngineConfig(k=max(10, len(registry.components)))
    return EngineDeps(
        registry=registry,
        component_filter=component_filter or ComponentFilter(registry, HashEmbedder()),
        supervisor=_chain_backend(
            [
                ("Plan: orchestrate the components, then fill parameters.", "<orchestrator_agent>"),
                ("The component flow looks right; filling parameters next.", "<filler_agent>"),
                ("The workflow is complete. Returning it to the user.", "<end>"),
            ]
        ),
        orchestrator=_chain_backend(
            [
                ("Filtering candidate components first.", "<call_selector>"),
                ("Arranging the candidates into a component flow.", "<call_arrange>"),
                ("The component flow is ready.", "<end>"),
            ]
        ),
        filler=_chain_backend(
            [
                ("Looking up the parameter templates.", "<call_lookup>"),
                ("Filling the parameters from the instruction.", "<call_filling>"),
                ("Parameters filled.", "<end>"),
            ]
        ),
        tools=FunctionBackend(tool_fn),
        config=config,
    )


GARBAGE_TEXT = "sorry, I only speak prose {{{ not actionable"


def make_garbage_deps(
    registry: Registry,
    config: Optional[EngineConfig] = None,
    component_filter: Optional[ComponentFilter] = None,
) -> EngineDeps:
    """Deps whose backends never produce a parseable reply."""
    garbage = FunctionBackend(lambda messages: GARBAGE_TEXT)
    return EngineDeps(
        registry=registry,
        component_filter=component_filter or ComponentFilter(registry, HashEmbedder()),
        supervisor=garbage,
        orchestrator=garbage,
        filler=garbage,
        tools=garbage,
        config=config or EngineConfig(),
    )


def make_echo_baseline_backend(samples: Sequence[DatasetSample]) -> Backend:
    """A generation backend that answers each baseline prompt with its gold workflow."""
    by_instruction = {s.instruction: s.gold_workflow for s in samples}

    def fn(messages: Sequence[ChatMessage]) -> str:
        prompt = messages[-1].content
        for instruction, gold in by_instruction.items():
            if instruction in prompt.rsplit("Now the input is:", 1)[-1]:
                return serialize_workflow(gold)
        raise AssertionError("echo baseline backend found no matching sample")

    return FunctionBackend(fn)


def make_garbage_backend() -> Backend:
    return FunctionBackend(lambda messages: GARBAGE_TEXT)
