from __future__ import annotations

import json
import random

import pytest

import helpers
from helpers import action, script, scripted_deps
from workteam.agents import (
    AgentDisabledError,
    EngineConfig,
    EngineDeps,
    EngineError,
    EmptyFlowError,
    ProtocolError,
    ReflectionLimitError,
    Session,
    SessionError,
    SessionState,
    TurnLimitError,
    filler_run,
    orchestrator_run,
    reflect,
    run_session,
    supervisor_step,
)
from workteam.gateway import FunctionBackend
from workteam.retrieval import ComponentFilter, HashEmbedder
from workteam.tools import ToolOutputError
from workteam.workflow import (
    ComponentFlow,
    TaskStep,
    Workflow,
    diff_workflows,
    parse_workflow,
    serialize_workflow,
    validate_workflow,
)

GOLDEN = helpers.golden_session_fixture()


class TestGoldenSession:
    def test_final_workflow_byte_identical(self, golden_deps):
        result = run_session(GOLDEN["instruction"], deps=golden_deps)
        expected = parse_workflow(helpers.golden_workflow_text())
        assert serialize_workflow(result.workflow) == serialize_workflow(expected)

    def test_actor_sequence(self, golden_deps):
        result = run_session(GOLDEN["instruction"], deps=golden_deps)
        assert result.transcript.actor_sequence() == GOLDEN["actors"]

    def test_untouched_defaults_preserved(self, golden_deps):
        result = run_session(GOLDEN["instruction"], deps=golden_deps)
        first = result.workflow.steps[0].parameter
        assert first["receiveType"] == "" and first["sender"] == ""

    def test_replay_is_byte_identical(self, casestudy_registry):
        one = run_session(GOLDEN["instruction"], deps=helpers.golden_deps(casestudy_registry))
        two = run_session(GOLDEN["instruction"], deps=helpers.golden_deps(casestudy_registry))
        assert one.transcript.to_jsonl() == two.transcript.to_jsonl()
        assert serialize_workflow(one.workflow) == serialize_workflow(two.workflow)

    def test_workflow_validates(self, golden_deps, casestudy_registry):
        result = run_session(GOLDEN["instruction"], deps=golden_deps)
        assert validate_workflow(result.workflow, casestudy_registry).ok

    def test_reply_is_final_supervisor_analysis(self, golden_deps):
        result = run_session(GOLDEN["instruction"], deps=golden_deps)
        assert "correct" in result.reply


class TestSupervisorStep:
    def test_first_turn_routes_to_orchestrator(self, casestudy_registry, golden_deps):
        state = SessionState("s")
        decision = supervisor_step(state, GOLDEN["instruction"], golden_deps)
        assert decision.route == "invoke-orchestrator"
        assert decision.feedback is None

    def test_malformed_twice_escalates(self, casestudy_registry):
        deps = scripted_deps(casestudy_registry, script("supervisor", "junk", "more junk"))
        state = SessionState("s")
        with pytest.raises(Exception) as err:
            supervisor_step(state, "hello", deps)
        assert "JSON" in str(err.value) or "object" in str(err.value)

    def test_turn_limit(self, casestudy_registry):
        deps = scripted_deps(
            casestudy_registry,
            script("supervisor", *[action("a", "None")] * 3),
            EngineConfig(max_turns=2),
        )
        state = SessionState("s")
        supervisor_step(state, "one", deps)
        supervisor_step(state, "two", deps)
        with pytest.raises(TurnLimitError):
            supervisor_step(state, "three", deps)


class TestOrchestratorRun:
    def test_golden_flow(self, golden_deps):
        flow = orchestrator_run(GOLDEN["instruction"], golden_deps)
        assert flow.task_sequence() == ("public-email", "file-processing", "api-gateway")

    def test_empty_flow_is_error(self, casestudy_registry):
        deps = scripted_deps(
            casestudy_registry, script("orchestrator", action("nothing to do", "<end>"))
        )
        with pytest.raises(EmptyFlowError):
            orchestrator_run("do nothing", deps)

    def test_self_modified_flow_from_analysis(self, casestudy_registry):
        analysis = 'Removing the last step: [{"task": "public-email"}, {"task": "file-processing"}]'
        deps = scripted_deps(
            casestudy_registry, script("orchestrator", action(analysis, "<end>"))
        )
        flow = orchestrator_run("remove the last step", deps)
        assert flow.task_sequence() == ("public-email", "file-processing")

    def test_arrange_before_selector_is_protocol_error(self, casestudy_registry):
        deps = scripted_deps(
            casestudy_registry, script("orchestrator", action("arrange", "<call_arrange>"))
        )
        with pytest.raises(ProtocolError, match="before"):
            orchestrator_run("x", deps)

    def test_turn_limit(self, casestudy_registry):
        deps = scripted_deps(
            casestudy_registry,
            script("orchestrator", *[action("thinking", "None")] * 5),
            EngineConfig(max_turns=3),
        )
        with pytest.raises(TurnLimitError):
            orchestrator_run("x", deps)

    def test_disabled(self, casestudy_registry):
        deps = scripted_deps(casestudy_registry, [])
        deps.config.orchestrator_enabled = False
        with pytest.raises(AgentDisabledError):
            orchestrator_run("x", deps)


class TestFillerRun:
    FLOW = ComponentFlow((TaskStep("sns"),))

    def test_lookup_then_fill(self, casestudy_registry):
        entries = script(
            "filler",
            action("looking up", "<call_lookup>"),
            action("filling", "<call_filling>"),
            action("done", "<end>"),
        ) + script("tools", '[{"task":"sns","parameter":{"message":"hi"}}]')
        deps = scripted_deps(casestudy_registry, entries)
        wf = filler_run("notify hi", self.FLOW, deps)
        assert wf.steps[0].parameter["message"] == "hi"
        assert wf.steps[0].parameter["topic"] == ""

    def test_empty_template_component_fills_empty(self, casestudy_registry, tmp_path):
        # a component with no parameters is normal; the filled step stays empty
        import workteam.registry as registry_mod

        comps = [{"name": "noop", "description": "does nothing"}]
        paths = []
        for fname, data in (
            ("c.json", comps),
            ("d.json", [{"component": "noop", "params": {}}]),
            ("t.json", [{"component": "noop", "parameter": {}}]),
        ):
            p = tmp_path / fname
            p.write_text(json.dumps(data))
            paths.append(p)
        reg = registry_mod.load_registry(*paths)
        entries = script(
            "filler",
            action("looking up", "<call_lookup>"),
            action("filling", "<call_filling>"),
            action("done", "<end>"),
        ) + script("tools", '[{"task":"noop","parameter":{}}]')
        deps = scripted_deps(reg, entries)
        wf = filler_run("run noop", ComponentFlow((TaskStep("noop"),)), deps)
        assert wf.steps[0].parameter == {}
        assert validate_workflow(wf, reg).ok

    def test_unknown_key_escalates_after_retry(self, casestudy_registry):
        bad = '[{"task":"sns","parameter":{"bogus":"x"}}]'
        entries = script(
            "filler",
            action("looking up", "<call_lookup>"),
            action("filling", "<call_filling>"),
        ) + script("tools", bad, bad)
        deps = scripted_deps(casestudy_registry, entries)
        with pytest.raises(ToolOutputError, match="bogus"):
            filler_run("x", self.FLOW, deps)

    def test_filling_without_lookup_does_implicit_lookup(self, casestudy_registry):
        entries = script(
            "filler",
            action("modify directly", "<call_filling>"),
            action("done", "<end>"),
        ) + script("tools", '[{"task":"sns","parameter":{"subject":"s"}}]')
        deps = scripted_deps(casestudy_registry, entries)
        wf = filler_run("set subject", self.FLOW, deps)
        assert wf.steps[0].parameter["subject"] == "s"

    def test_end_without_workflow(self, casestudy_registry):
        deps = scripted_deps(casestudy_registry, script("filler", action("done", "<end>")))
        with pytest.raises(ProtocolError, match="without"):
            filler_run("x", self.FLOW, deps)

    def test_invalid_flow_rejected(self, casestudy_registry):
        deps = scripted_deps(casestudy_registry, [])
        with pytest.raises(ProtocolError, match="ghost"):
            filler_run("x", ComponentFlow((TaskStep("ghost"),)), deps)


class TestReflection:
    def rejection_entries(self, wrong: str, right: str):
        return (
            script(
                "supervisor",
                action("plan: orchestrate then fill", "<orchestrator_agent>"),
                action("The flow is missing the mail monitor; start from public-email.", "<orchestrator_agent>"),
                action("looks right, fill now", "<filler_agent>"),
                action("all good", "<end>"),
            )
            + script(
                "orchestrator",
                action("filter first", "<call_selector>"),
                action("arrange", "<call_arrange>"),
                action("done", "<end>"),
                action("filter again", "<call_selector>"),
                action("arrange again", "<call_arrange>"),
                action("done", "<end>"),
            )
            + script(
                "filler",
                action("lookup", "<call_lookup>"),
                action("fill", "<call_filling>"),
                action("done", "<end>"),
            )
            + script(
                "tools",
                wrong,
                right,
                '[{"task":"public-email","parameter":{"subject":"hello"}}]',
            )
        )

    def test_rejection_then_acceptance(self, casestudy_registry):
        entries = self.rejection_entries('[{"task":"sns"}]', '[{"task":"public-email"}]')
        deps = scripted_deps(casestudy_registry, entries)
        recording = helpers.RecordingBackend(deps.orchestrator)
        deps.orchestrator = recording
        result = run_session("watch the mailbox", deps=deps)
        assert result.workflow.task_sequence() == ("public-email",)
        # exactly two orchestrator invocations in the transcript
        actors = result.transcript.actor_sequence()
        assert actors.count("arrange-tool") == 2
        # the re-dispatch carried supervisor feedback into inst_O
        second_run_prompt = recording.prompts[3][1].content
        assert "feedback:" in second_run_prompt
        assert "mail monitor" in second_run_prompt

    def test_reflection_limit_zero(self, casestudy_registry):
        entries = self.rejection_entries('[{"task":"sns"}]', '[{"task":"public-email"}]')
        deps = scripted_deps(casestudy_registry, entries, EngineConfig(k=10, max_reflections=0))
        with pytest.raises(ReflectionLimitError):
            run_session("watch the mailbox", deps=deps)

    def test_reflect_accepts_forward_progress(self, casestudy_registry, golden_deps):
        state = SessionState("s")
        supervisor_step(state, GOLDEN["instruction"], golden_deps)
        outcome = reflect(state, ComponentFlow((TaskStep("sns"),)), golden_deps)
        assert outcome.accepted and outcome.feedback is None
        assert state.reflection_count == 0


class TestModificationRouting:
    def existing(self, casestudy_registry) -> Workflow:
        return parse_workflow(helpers.golden_workflow_text())

    def test_parameter_modification_invokes_only_filler(self, casestudy_registry):
        entries = (
            script(
                "supervisor",
                action("only parameters change; call the filler", "<filler_agent>"),
                action("done", "<end>"),
            )
            + script(
                "filler",
                action("modify the subject", "<call_filling>"),
                action("done", "<end>"),
            )
            + script(
                "tools",
                '[{"task":"public-email","parameter":{"subject":"Invoice"}},'
                '{"task":"file-processing","parameter":{}},'
                '{"task":"api-gateway","parameter":{}}]',
            )
        )
        deps = scripted_deps(casestudy_registry, entries)
        existing = self.existing(casestudy_registry)
        result = run_session('change the subject to "Invoice"', existing, deps=deps)
        actors = result.transcript.actor_sequence()
        assert "orchestrator" not in actors
        diff = diff_workflows(existing, result.workflow)
        assert len(diff.changed_params) == 1
        assert diff.changed_params[0].after == "Invoice"
        # untouched parameters carried over from the existing workflow
        assert result.workflow.steps[0].parameter["account"] == "98234"

    def test_structure_modification_merges_existing_params(self, casestudy_registry):
        analysis = (
            'Dropping the final step: [{"task": "public-email"}, {"task": "file-processing"}]'
        )
        entries = script(
            "supervisor",
            action("structure change; call the orchestrator", "<orchestrator_agent>"),
            action("flow updated, done", "<end>"),
        ) + script("orchestrator", action(analysis, "<end>"))
        deps = scripted_deps(casestudy_registry, entries)
        existing = self.existing(casestudy_registry)
        result = run_session("remove the api step", existing, deps=deps)
        assert result.workflow.task_sequence() == ("public-email", "file-processing")
        assert result.workflow.steps[0].parameter["account"] == "98234"


class TestAblationModes:
    def test_no_supervisor_fixed_chain(self, casestudy_registry):
        entries = (
            script(
                "orchestrator",
                action("filter", "<call_selector>"),
                action("arrange", "<call_arrange>"),
                action("done", "<end>"),
            )
            + script(
                "filler",
                action("lookup", "<call_lookup>"),
                action("fill", "<call_filling>"),
                action("done", "<end>"),
            )
            + script(
                "tools",
                '[{"task":"sns"}]',
                '[{"task":"sns","parameter":{"message":"hi"}}]',
            )
        )
        config = EngineConfig(k=10, supervisor_enabled=False)
        deps = scripted_deps(casestudy_registry, entries, config)
        result = run_session("notify hi", deps=deps)
        assert result.workflow.task_sequence() == ("sns",)
        assert "supervisor" not in result.transcript.actor_sequence()

    def test_creation_fails_without_orchestrator(self, casestudy_registry, golden_deps):
        golden_deps.config.orchestrator_enabled = False
        with pytest.raises(AgentDisabledError):
            run_session(GOLDEN["instruction"], deps=golden_deps)

    def test_creation_fails_without_filler(self, casestudy_registry):
        entries = helpers.golden_deps(casestudy_registry)
        entries.config.filler_enabled = False
        with pytest.raises(AgentDisabledError):
            run_session(GOLDEN["instruction"], deps=entries)

    def test_supervisor_only_fails(self, casestudy_registry):
        deps = scripted_deps(
            casestudy_registry,
            script("supervisor", action("orchestrate it", "<orchestrator_agent>")),
        )
        deps.config.orchestrator_enabled = False
        deps.config.filler_enabled = False
        with pytest.raises(AgentDisabledError):
            run_session(GOLDEN["instruction"], deps=deps)


class TestSessionLifecycle:
    def test_reply_only_round_has_no_workflow(self, casestudy_registry):
        deps = scripted_deps(
            casestudy_registry, script("supervisor", action("hello there", "None"))
        )
        session = Session(deps)
        result = session.handle("hi")
        assert result.workflow is None
        assert result.reply == "hello there"
        with pytest.raises(SessionError, match="without producing"):
            run_session("hi", deps=scripted_deps(
                casestudy_registry, script("supervisor", action("hello there", "None"))
            ))

    def test_invalid_existing_workflow_rejected(self, casestudy_registry, golden_deps):
        bad = Workflow((TaskStep("ghost"),))
        with pytest.raises(SessionError, match="invalid"):
            Session(golden_deps, existing_workflow=bad)

    def test_error_appends_transcript_event(self, casestudy_registry):
        deps = scripted_deps(casestudy_registry, script("supervisor", "junk", "junk"))
        session = Session(deps)
        with pytest.raises(EngineError) as err:
            session.handle("hi")
        assert session.transcript.events[-1].kind == "error"
        assert err.value.transcript is session.transcript

    def test_filler_route_without_flow_is_protocol_error(self, casestudy_registry):
        deps = scripted_deps(
            casestudy_registry, script("supervisor", action("fill it", "<filler_agent>"))
        )
        with pytest.raises(ProtocolError, match="no component flow"):
            run_session("fill parameters", deps=deps)


def _random_reply(rng: random.Random) -> str:
    actions = [
        "None", "<end>", "<orchestrator_agent>", "<filler_agent>",
        "<call_selector>", "<call_arrange>", "<call_lookup>", "<call_filling>",
    ]
    choice = rng.randrange(8)
    if choice == 0:
        return "complete garbage {{{"
    if choice == 1:
        return '{"analysis":"a","action":"<end>"} {"analysis":"b","action":"None"}'
    if choice == 2:
        return json.dumps({"analysis": "x"})
    if choice == 3:
        return json.dumps({"analysis": "x", "action": rng.choice(actions)})
    if choice == 4:
        return '[{"task":"ghost"}]'
    if choice == 5:
        return '[{"task":"public-email"}]'
    if choice == 6:
        return "[]"
    return json.dumps({"analysis": '[{"task":"sns"}]', "action": rng.choice(actions)})


@pytest.mark.parametrize("seed", range(40))
def test_adversarial_scripts_terminate(casestudy_registry, seed):
    rng = random.Random(seed)
    backend = helpers.CountingBackend(FunctionBackend(lambda messages: _random_reply(rng)))
    deps = EngineDeps(
        registry=casestudy_registry,
        component_filter=ComponentFilter(casestudy_registry, HashEmbedder()),
        supervisor=backend,
        orchestrator=backend,
        filler=backend,
        tools=backend,
        config=EngineConfig(k=10, max_reflections=1, max_turns=4),
    )
    try:
        result = run_session("do something", deps=deps)
        assert validate_workflow(result.workflow, casestudy_registry).ok
    except EngineError:
        pass
    assert backend.calls <= 200
