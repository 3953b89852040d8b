"""The multi-agent control loop: supervisor planning, orchestrator and filler
sub-loops, reflection, session state, and the retry/termination policy.

A session processes one user message per round. The supervisor reads the
message, routes to the orchestrator (component flow) and/or the filler
(parameter values), reviews each returned result, and either accepts it,
rejects it with feedback for re-execution, or ends the round. The orchestrator
and filler are small action loops of their own, driving the filtering,
orchestration, lookup and filling tools.

Hard bounds make every session terminate: each agent gets at most
``max_turns`` LLM turns per task, and at most ``max_reflections`` sub-results
may be rejected per session. Exceeding either raises a typed error carrying
the transcript so far.
"""

from __future__ import annotations

import copy
import json
import time
import uuid
from dataclasses import dataclass, field, replace
from typing import Any, Literal, Optional, Union

from .gateway import (
    Backend,
    ChatMessage,
    FILLER_ACTIONS,
    GatewayError,
    ORCHESTRATOR_ACTIONS,
    SUPERVISOR_ACTIONS,
    _find_json_values,
    request_action,
)
from .registry import BlankTemplate, Registry, RegistryError, lookup_templates
from .retrieval import ComponentFilter
from .tools import FillingRequest, OrchestrationRequest, ToolOutputError, fill_parameters, orchestrate
from .workflow import (
    ComponentFlow,
    TaskStep,
    Workflow,
    WorkflowError,
    flow_of,
    flow_to_obj,
    serialize_flow,
    serialize_workflow,
    validate_flow,
    validate_workflow,
    workflow_to_obj,
)

SUPERVISOR_PROMPT = """You are the supervisor agent in the NL2Workflow system, capable of directly interacting with users and automatically calling two agents based on user instructions: the orchestrator agent and the filler agent.

Your job is to receive messages from users:

1. First, you need to judge the user's instructions and plan tasks flexibly, for example:
(1) If the user's intention is to generate workflows from natural language, then first call the orchestrator agent to get the orchestration result, and then call the filler agent to get the final result, and return it to the user;
(2) If the user's intention is to modify the structure of the workflow, then you may need to call the orchestrator agent to make modifications to the workflow;
(3) If the user's intention is to modify the parameters in the workflow, then you may directly call the filler agent.

2. Determine if the results returned by the orchestrator agent/the filler agent have any issues. If there are problems with the results, you need to call the orchestrator agent/the filler agent again. (Please note that even after parameter filling, it is normal for some components to have no parameters or incomplete parameters, and there is no need to call again in such cases.)

3. Determine if the user instruction has been solved. If it has been solved, return the final result to the user.

Notice:
1. Do not create/modify workflows on your own; just call agents according to user intent.
2. Keep replies concise.

Your output should be in JSON: {"analysis": xxxx, "action": xxxx}

where the 'analysis' field is for your problem analysis process or reply to the user, and the 'action' field includes these actions: None (no call), <orchestrator_agent> (call the orchestrator agent), <filler_agent> (call the filler agent), <end> (end operation).

Note that you can only output a single such JSON content at a time, and it is not allowed to output multiple at once!"""

ORCHESTRATOR_PROMPT = """You are the orchestrator agent in the NL2Workflow system, and you can call two tools: the component filtering tool and the component orchestration tool.

You need to judge the user's instructions and plan tasks flexibly, for example:
1. If the user's intent is to generate a component flow based on their instructions, you should first call the component filtering tool to filter components from the component set, and then call the component orchestration tool to generate the component flow;
2. If the user's intent is to modify the component flow, you should first call the component filtering tool to filter out candidate components, and then use your own capabilities to modify the component flow provided by the user;
3. For other intents, respond according to your own capabilities.

Notice:
1. Do not orchestrate on your own ability! Determine when to call the component filtering tool and the component orchestration tool and initiate the calls.
2. Keep replies concise.

Your output should be in JSON: {"analysis": xxxx, "action": xxxx}

where the 'analysis' field is for your problem analysis process or reply to the user, and the 'action' field includes four actions: None (no call), <call_selector> (call the component filtering tool), <call_arrange> (call the component orchestration tool), <end> (end operation).

Note that you can only output a single such JSON content at a time, and it is not allowed to output multiple at once!"""

FILLER_PROMPT = """You are the filler agent in the NL2Workflow system. Your role is to fill in parameters for each component in the component flows according to user instructions and the generated workflows. You can call two tools: the blank parameter template lookup tool and the parameter filling tool.

You need to judge the user's instructions and plan tasks flexibly, for example:
1. If the user's intent is to fill in parameters based on user instructions and the component flow, you need to first call the blank parameter template lookup tool to find the blank parameter templates corresponding to the components, and then call the parameter filling tool to fill in parameters for each component in the component flow.
2. If the user's intent is to modify the parameters in an existing workflow, you need to call the parameter filling tool to modify the parameters.
3. For other intents, respond according to your own capabilities.

Notice:
1. Do not fill the parameters on your own ability! Determine when to call the blank parameter template lookup tool and the parameter filling tool and initiate the calls.
2. Keep replies concise.

Your output should be in JSON: {"analysis": xxxx, "action": xxxx}

where the 'analysis' field is for your problem analysis process or reply to the user, and the 'action' field includes four actions: None (no call), <call_lookup> (call the blank parameter template lookup tool), <call_filling> (call the parameter filling tool), <end> (end operation).

Note that you can only output a single such JSON content at a time, and it is not allowed to output multiple at once!"""


Route = Literal["invoke-orchestrator", "invoke-filler", "reply-user", "end"]

_ROUTES: dict[str, Route] = {
    "<orchestrator_agent>": "invoke-orchestrator",
    "<filler_agent>": "invoke-filler",
    "None": "reply-user",
    "<end>": "end",
}


class EngineError(RuntimeError):
    """Base for engine failures; carries the transcript when raised by a session."""

    def __init__(self, message: str, transcript: "Transcript | None" = None):
        super().__init__(message)
        self.transcript = transcript


class AgentDisabledError(EngineError):
    pass


class TurnLimitError(EngineError):
    pass


class ReflectionLimitError(EngineError):
    pass


class EmptyFlowError(EngineError):
    pass


class ProtocolError(EngineError):
    """An agent violated the tool-call protocol or produced an invalid result."""


class SessionError(EngineError):
    """Wrapper for non-engine failures escalated out of a session."""


@dataclass
class EngineConfig:
    k: int = 10
    max_reflections: int = 2  # rejected sub-results allowed per session
    max_turns: int = 8  # LLM turns per agent per task
    temperature: float = 0.0
    supervisor_enabled: bool = True
    orchestrator_enabled: bool = True
    filler_enabled: bool = True


@dataclass
class EngineDeps:
    registry: Registry
    component_filter: ComponentFilter
    supervisor: Optional[Backend] = None
    orchestrator: Optional[Backend] = None
    filler: Optional[Backend] = None
    tools: Optional[Backend] = None
    config: EngineConfig = field(default_factory=EngineConfig)


@dataclass(frozen=True)
class TranscriptEvent:
    seq: int
    actor: str
    kind: str  # agent-action | tool-result | error
    payload: Any
    timestamp: float


class Transcript:
    """Append-only, replayable event log of agent actions and tool calls."""

    def __init__(self) -> None:
        self.events: list[TranscriptEvent] = []

    def append(self, actor: str, kind: str, payload: Any) -> TranscriptEvent:
        event = TranscriptEvent(len(self.events), actor, kind, payload, time.time())
        self.events.append(event)
        return event

    def actor_sequence(self) -> list[str]:
        return [e.actor for e in self.events]

    def to_objs(self) -> list[dict]:
        return [
            {"actor": e.actor, "kind": e.kind, "payload": e.payload, "seq": e.seq}
            for e in self.events
        ]

    def to_jsonl(self) -> str:
        return "\n".join(
            json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
            for obj in self.to_objs()
        )


@dataclass
class SessionState:
    session_id: str
    user_instruction: str = ""
    history: dict[str, list[ChatMessage]] = field(default_factory=dict)
    current_flow: Optional[ComponentFlow] = None
    current_workflow: Optional[Workflow] = None
    reflection_count: int = 0
    turn_count: dict[str, int] = field(default_factory=dict)


@dataclass(frozen=True)
class SupervisorDecision:
    analysis: str
    route: Route
    feedback: Optional[str] = None  # set only when re-dispatching a rejected result


@dataclass(frozen=True)
class ReflectionOutcome:
    accepted: bool
    feedback: Optional[str]
    decision: SupervisorDecision


@dataclass(frozen=True)
class TurnResult:
    reply: str
    workflow: Optional[Workflow]
    transcript_delta: list[TranscriptEvent]


@dataclass(frozen=True)
class SessionResult:
    workflow: Workflow
    transcript: Transcript
    reply: str


def _sub_instruction(
    instruction: str,
    flow: Optional[ComponentFlow] = None,
    feedback: Optional[str] = None,
) -> str:
    parts = [instruction]
    if flow is not None:
        parts.append(f"Current component flow:\n{serialize_flow(flow)}")
    if feedback:
        parts.append(f"feedback: {feedback}")
    return "\n\n".join(parts)


def supervisor_step(
    state: SessionState,
    incoming: Union[ChatMessage, str],
    deps: EngineDeps,
    transcript: Optional[Transcript] = None,
) -> SupervisorDecision:
    """One supervisor turn: ingest a user message or sub-agent result, decide a route."""
    if not deps.config.supervisor_enabled or deps.supervisor is None:
        raise AgentDisabledError("supervisor agent is disabled")
    used = state.turn_count.get("supervisor", 0)
    if used >= deps.config.max_turns:
        raise TurnLimitError(
            f"supervisor exceeded {deps.config.max_turns} turns in one round"
        )
    state.turn_count["supervisor"] = used + 1
    history = state.history.setdefault(
        "supervisor", [ChatMessage("system", SUPERVISOR_PROMPT)]
    )
    message = incoming if isinstance(incoming, ChatMessage) else ChatMessage("user", incoming)
    history.append(message)
    action, exchanged = request_action(
        deps.supervisor, history, SUPERVISOR_ACTIONS, temperature=deps.config.temperature
    )
    history.extend(exchanged)
    if transcript is not None:
        transcript.append(
            "supervisor", "agent-action", {"analysis": action.analysis, "action": action.action}
        )
    return SupervisorDecision(action.analysis, _ROUTES[action.action])


def _flow_from_text(text: str) -> Optional[ComponentFlow]:
    """The last JSON array of {"task": name} objects embedded in free text, if any."""
    best: Optional[ComponentFlow] = None
    for _, value in _find_json_values(text, "["):
        if not isinstance(value, list) or not value:
            continue
        steps = []
        for obj in value:
            if (
                isinstance(obj, dict)
                and set(obj) <= {"task", "parameter"}
                and isinstance(obj.get("task"), str)
                and obj["task"]
                and not obj.get("parameter")
            ):
                steps.append(TaskStep(obj["task"]))
            else:
                steps = []
                break
        if steps:
            best = ComponentFlow(tuple(steps))
    return best


def orchestrator_run(
    inst_o: str,
    deps: EngineDeps,
    transcript: Optional[Transcript] = None,
) -> ComponentFlow:
    """Orchestrator sub-loop: filter candidates, arrange them into a component flow.

    The agent may also hand back a flow it edited itself (structure
    modifications); such flows skip candidate containment but must still
    validate against the registry.
    """
    config = deps.config
    if not config.orchestrator_enabled or deps.orchestrator is None:
        raise AgentDisabledError("orchestrator agent is disabled")
    history = [ChatMessage("system", ORCHESTRATOR_PROMPT), ChatMessage("user", inst_o)]
    candidates = None
    flow: Optional[ComponentFlow] = None
    for turn in range(config.max_turns):
        state_key = "orchestrator"
        action, exchanged = request_action(
            deps.orchestrator, history, ORCHESTRATOR_ACTIONS, temperature=config.temperature
        )
        history.extend(exchanged)
        if transcript is not None:
            transcript.append(
                state_key, "agent-action", {"analysis": action.analysis, "action": action.action}
            )
        self_made = _flow_from_text(action.analysis)
        if self_made is not None:
            flow = self_made
        if action.action == "<call_selector>":
            candidates = deps.component_filter.filter(inst_o, config.k)
            names = [sc.component.name for sc in candidates]
            if transcript is not None:
                transcript.append("selector-tool", "tool-result", names)
            history.append(
                ChatMessage(
                    "user",
                    "component filtering tool result (candidate components):\n"
                    + json.dumps(names, ensure_ascii=False),
                )
            )
        elif action.action == "<call_arrange>":
            if candidates is None:
                raise ProtocolError("orchestration tool called before component filtering")
            if deps.tools is None:
                raise AgentDisabledError("tool backend is not configured")
            flow = orchestrate(OrchestrationRequest(inst_o, tuple(candidates)), deps.tools)
            if transcript is not None:
                transcript.append("arrange-tool", "tool-result", flow_to_obj(flow))
            history.append(
                ChatMessage(
                    "user",
                    "component orchestration tool result (component flow):\n"
                    + serialize_flow(flow),
                )
            )
        elif action.action == "<end>":
            if flow is None or not flow.steps:
                raise EmptyFlowError("orchestrator ended without producing a component flow")
            report = validate_flow(flow, deps.registry)
            if not report.ok:
                detail = "; ".join(i.detail for i in report.issues)
                raise ProtocolError(f"orchestrated flow is invalid: {detail}")
            return flow
        # "None": conversational turn, keep looping
    raise TurnLimitError(f"orchestrator exceeded {config.max_turns} turns")


def _seed_templates(
    templates: list[BlankTemplate],
    flow: ComponentFlow,
    existing: Optional[Workflow],
) -> list[BlankTemplate]:
    """Pre-populate blank templates with the current workflow's values.

    Used for modification rounds so the filling tool only needs to change what
    the instruction asks for. Steps match positionally by task name; keys
    outside the template are dropped.
    """
    if existing is None:
        return templates
    seeded = []
    for i, (step, tmpl) in enumerate(zip(flow.steps, templates)):
        params = copy.deepcopy(tmpl.parameter)
        if i < len(existing.steps) and existing.steps[i].task == step.task:
            for key, value in existing.steps[i].parameter.items():
                if key in params:
                    params[key] = copy.deepcopy(value)
        seeded.append(BlankTemplate(tmpl.component, params))
    return seeded


def filler_run(
    inst_p: str,
    flow: ComponentFlow,
    deps: EngineDeps,
    transcript: Optional[Transcript] = None,
    existing: Optional[Workflow] = None,
) -> Workflow:
    """Filler sub-loop: look up templates, fill parameters, validate the result."""
    config = deps.config
    if not config.filler_enabled or deps.filler is None:
        raise AgentDisabledError("filler agent is disabled")
    report = validate_flow(flow, deps.registry)
    if not report.ok:
        detail = "; ".join(i.detail for i in report.issues)
        raise ProtocolError(f"cannot fill an invalid flow: {detail}")
    history = [
        ChatMessage("system", FILLER_PROMPT),
        ChatMessage("user", _sub_instruction(inst_p, flow=flow)),
    ]
    looked: Optional[tuple[list, list]] = None
    workflow: Optional[Workflow] = None
    for turn in range(config.max_turns):
        action, exchanged = request_action(
            deps.filler, history, FILLER_ACTIONS, temperature=config.temperature
        )
        history.extend(exchanged)
        if transcript is not None:
            transcript.append(
                "filler", "agent-action", {"analysis": action.analysis, "action": action.action}
            )
        if action.action == "<call_lookup>":
            descriptions, templates = lookup_templates(flow, deps.registry)
            templates = _seed_templates(templates, flow, existing)
            looked = (descriptions, templates)
            payload = [{"task": t.component, "parameter": t.parameter} for t in templates]
            if transcript is not None:
                transcript.append("lookup-tool", "tool-result", payload)
            history.append(
                ChatMessage(
                    "user",
                    "template lookup tool result (parameter templates):\n"
                    + json.dumps(payload, sort_keys=True, ensure_ascii=False),
                )
            )
        elif action.action == "<call_filling>":
            if looked is None:
                descriptions, templates = lookup_templates(flow, deps.registry)
                looked = (descriptions, _seed_templates(templates, flow, existing))
            if deps.tools is None:
                raise AgentDisabledError("tool backend is not configured")
            descriptions, templates = looked
            req = FillingRequest(inst_p, flow, tuple(descriptions), tuple(templates))
            workflow = fill_parameters(req, deps.tools)
            if transcript is not None:
                transcript.append("filling-tool", "tool-result", workflow_to_obj(workflow))
            history.append(
                ChatMessage(
                    "user",
                    "parameter filling tool result (workflow):\n" + serialize_workflow(workflow),
                )
            )
        elif action.action == "<end>":
            if workflow is None:
                raise ProtocolError("filler ended without a filled workflow")
            report = validate_workflow(workflow, deps.registry)
            if not report.ok:
                detail = "; ".join(i.detail for i in report.issues)
                raise ProtocolError(f"filled workflow is invalid: {detail}")
            return workflow
    raise TurnLimitError(f"filler exceeded {config.max_turns} turns")


def reflect(
    state: SessionState,
    result: Union[ComponentFlow, Workflow],
    deps: EngineDeps,
    transcript: Optional[Transcript] = None,
) -> ReflectionOutcome:
    """Feed a sub-agent result back to the supervisor and classify its verdict.

    Re-dispatching to a sub-agent that should already have finished its part is
    a rejection: it raises the session's reflection count and carries the
    supervisor's analysis along as feedback for the re-execution.
    """
    if isinstance(result, ComponentFlow):
        label, body, kind = "orchestrator agent", serialize_flow(result), "flow"
    else:
        label, body, kind = "filler agent", serialize_workflow(result), "workflow"
    decision = supervisor_step(
        state, ChatMessage("user", f"{label} result:\n{body}"), deps, transcript
    )
    rejected = decision.route == "invoke-orchestrator" or (
        kind == "workflow" and decision.route == "invoke-filler"
    )
    if not rejected:
        return ReflectionOutcome(True, None, decision)
    state.reflection_count += 1
    if state.reflection_count > deps.config.max_reflections:
        raise ReflectionLimitError(
            f"session exceeded {deps.config.max_reflections} rejected results"
        )
    decision = replace(decision, feedback=decision.analysis)
    return ReflectionOutcome(False, decision.feedback, decision)


def _merge_flow_params(
    flow: ComponentFlow, existing: Optional[Workflow], registry: Registry
) -> Workflow:
    """Carry parameters from an existing workflow onto a restructured flow.

    Flow steps take the parameters of the first unused existing step with the
    same task; new steps start from their blank template defaults.
    """
    existing_steps = list(existing.steps) if existing else []
    used = [False] * len(existing_steps)
    steps = []
    for step in flow.steps:
        match = next(
            (j for j, es in enumerate(existing_steps) if not used[j] and es.task == step.task),
            None,
        )
        if match is not None:
            used[match] = True
            params = copy.deepcopy(existing_steps[match].parameter)
        else:
            params = copy.deepcopy(registry.templates[step.task].parameter)
        steps.append(TaskStep(step.task, params))
    return Workflow(tuple(steps))


class Session:
    """One conversation: shared state, transcript, and per-message rounds."""

    def __init__(
        self,
        deps: EngineDeps,
        existing_workflow: Optional[Workflow] = None,
        session_id: Optional[str] = None,
    ):
        self.deps = deps
        self.transcript = Transcript()
        self.state = SessionState(session_id or uuid.uuid4().hex)
        if existing_workflow is not None:
            report = validate_workflow(existing_workflow, deps.registry)
            if not report.ok:
                detail = "; ".join(i.detail for i in report.issues)
                raise SessionError(f"existing workflow is invalid: {detail}")
            self.state.current_workflow = existing_workflow
            self.state.current_flow = flow_of(existing_workflow)

    def handle(self, text: str) -> TurnResult:
        """Process one user message to completion; see module docstring for bounds."""
        start = len(self.transcript.events)
        try:
            return self._handle(text, start)
        except EngineError as exc:
            self.transcript.append("engine", "error", {"message": str(exc)})
            exc.transcript = self.transcript
            raise
        except (GatewayError, ToolOutputError, RegistryError, WorkflowError) as exc:
            self.transcript.append("engine", "error", {"message": str(exc)})
            raise SessionError(str(exc), self.transcript) from exc

    def _handle(self, text: str, start: int) -> TurnResult:
        state, deps = self.state, self.deps
        state.user_instruction = text
        state.turn_count["supervisor"] = 0
        if not deps.config.supervisor_enabled:
            return self._fixed_chain(text, start)
        incoming = text
        if state.current_workflow is not None:
            incoming = (
                f"Current workflow:\n{serialize_workflow(state.current_workflow)}"
                f"\n\nInstruction:\n{text}"
            )
        decision = supervisor_step(state, incoming, deps, self.transcript)
        feedback: Optional[str] = None
        while True:
            if decision.route in ("end", "reply-user"):
                return self._finish(decision.analysis, start)
            if decision.route == "invoke-orchestrator":
                inst_o = _sub_instruction(
                    state.user_instruction, flow=state.current_flow, feedback=feedback
                )
                flow = orchestrator_run(inst_o, deps, self.transcript)
                state.current_flow = flow
                outcome = reflect(state, flow, deps, self.transcript)
            else:  # invoke-filler
                if state.current_flow is None:
                    raise ProtocolError("filler invoked with no component flow in the session")
                inst_p = _sub_instruction(state.user_instruction, feedback=feedback)
                workflow = filler_run(
                    inst_p,
                    state.current_flow,
                    deps,
                    self.transcript,
                    existing=state.current_workflow,
                )
                state.current_workflow = workflow
                state.current_flow = flow_of(workflow)
                outcome = reflect(state, workflow, deps, self.transcript)
            decision = outcome.decision
            feedback = outcome.feedback

    def _fixed_chain(self, text: str, start: int) -> TurnResult:
        """No-supervisor regime: orchestrate then fill, unconditionally."""
        state, deps = self.state, self.deps
        inst = _sub_instruction(text, flow=state.current_flow)
        flow = orchestrator_run(inst, deps, self.transcript)
        state.current_flow = flow
        workflow = filler_run(
            text, flow, deps, self.transcript, existing=state.current_workflow
        )
        state.current_workflow = workflow
        state.current_flow = flow_of(workflow)
        return TurnResult("", workflow, self.transcript.events[start:])

    def _finish(self, reply: str, start: int) -> TurnResult:
        state = self.state
        if state.current_flow is not None and (
            state.current_workflow is None
            or state.current_workflow.task_sequence() != state.current_flow.task_sequence()
        ):
            if state.current_workflow is not None:
                merged = _merge_flow_params(
                    state.current_flow, state.current_workflow, self.deps.registry
                )
                report = validate_workflow(merged, self.deps.registry)
                if not report.ok:
                    detail = "; ".join(i.detail for i in report.issues)
                    raise ProtocolError(f"merged workflow is invalid: {detail}")
                state.current_workflow = merged
        return TurnResult(reply, state.current_workflow, self.transcript.events[start:])


def run_session(
    user_instruction: str,
    existing_workflow: Optional[Workflow] = None,
    *,
    deps: EngineDeps,
) -> SessionResult:
    """One-shot conversion: run a single message round and require a workflow."""
    session = Session(deps, existing_workflow=existing_workflow)
    result = session.handle(user_instruction)
    if result.workflow is None:
        raise SessionError("session ended without producing a workflow", session.transcript)
    return SessionResult(result.workflow, session.transcript, result.reply)
