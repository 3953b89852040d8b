"""Shared fixtures-in-code for the test suite: paths, scripted deps, strategies."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional, Sequence

from hypothesis import strategies as st

from workteam.agents import EngineConfig, EngineDeps
from workteam.gateway import Backend, ChatMessage, ScriptEntry, ScriptedBackend
from workteam.registry import Registry, load_registry
from workteam.retrieval import ComponentFilter, HashEmbedder
from workteam.workflow import TaskStep, Workflow

ROOT = Path(__file__).resolve().parents[1]
FIXTURES = ROOT / "fixtures"
CASESTUDY = FIXTURES / "casestudy"


def load_casestudy_registry() -> Registry:
    return load_registry(
        CASESTUDY / "components.json",
        CASESTUDY / "param_descriptions.json",
        CASESTUDY / "blank_templates.json",
    )


def golden_session_fixture() -> dict:
    return json.loads((CASESTUDY / "golden_session.json").read_text(encoding="utf-8"))


def golden_workflow_text() -> str:
    return (CASESTUDY / "golden_workflow.json").read_text(encoding="utf-8")


def script(agent: str, *responses: str) -> list[ScriptEntry]:
    return [ScriptEntry(agent, i, r) for i, r in enumerate(responses)]


def action(analysis: str, act: str) -> str:
    return json.dumps({"analysis": analysis, "action": act})


def scripted_deps(
    registry: Registry,
    entries: Sequence[ScriptEntry],
    config: Optional[EngineConfig] = None,
) -> EngineDeps:
    return EngineDeps(
        registry=registry,
        component_filter=ComponentFilter(registry, HashEmbedder()),
        supervisor=ScriptedBackend(entries, "supervisor"),
        orchestrator=ScriptedBackend(entries, "orchestrator"),
        filler=ScriptedBackend(entries, "filler"),
        tools=ScriptedBackend(entries, "tools"),
        config=config or EngineConfig(k=10),
    )


def golden_deps(registry: Registry, config: Optional[EngineConfig] = None) -> EngineDeps:
    from workteam.gateway import load_script

    entries = load_script(CASESTUDY / "golden_script.json")
    return scripted_deps(registry, entries, config)


class RecordingBackend:
    """Wraps a backend and keeps every prompt it was asked to complete."""

    def __init__(self, inner: Backend):
        self.inner = inner
        self.prompts: list[list[ChatMessage]] = []

    def complete(self, messages, *, temperature=0.0, max_tokens=None) -> str:
        self.prompts.append(list(messages))
        return self.inner.complete(messages, temperature=temperature, max_tokens=max_tokens)


class CountingBackend:
    def __init__(self, inner: Backend):
        self.inner = inner
        self.calls = 0

    def complete(self, messages, *, temperature=0.0, max_tokens=None) -> str:
        self.calls += 1
        return self.inner.complete(messages, temperature=temperature, max_tokens=max_tokens)


# random (pred, gold) pair generation for metric oracle checks

def mutate(rng, wf: Workflow) -> Workflow:
    """A random near-miss: change a value, drop a key, drop a step, or swap tasks."""
    import copy

    steps = [TaskStep(s.task, copy.deepcopy(s.parameter)) for s in wf.steps]
    ops = ["append"]
    if steps:
        ops += ["drop-step", "rename-task"]
        if any(s.parameter for s in steps):
            ops += ["change-value", "drop-key"]
    op = rng.choice(ops)
    if op == "append":
        steps.append(TaskStep(f"extra-{rng.randrange(10)}"))
    elif op == "drop-step":
        steps.pop(rng.randrange(len(steps)))
    elif op == "rename-task":
        i = rng.randrange(len(steps))
        steps[i] = TaskStep(f"other-{rng.randrange(10)}", steps[i].parameter)
    else:
        candidates = [i for i, s in enumerate(steps) if s.parameter]
        i = rng.choice(candidates)
        params = dict(steps[i].parameter)
        key = rng.choice(sorted(params))
        if op == "change-value":
            params[key] = f"mut-{rng.randrange(1000)}"
        else:
            params.pop(key)
        steps[i] = TaskStep(steps[i].task, params)
    return Workflow(tuple(steps))


def random_workflow(rng) -> Workflow:
    steps = []
    for _ in range(rng.randint(0, 4)):
        params = {
            f"p{j}": rng.choice(["", "x", 1, 1.5, True, None, {"k": "v"}, ["a"]])
            for j in range(rng.randint(0, 3))
        }
        steps.append(TaskStep(f"t{rng.randrange(6)}", params))
    return Workflow(tuple(steps))


def generated_pairs(n: int, seed: int) -> list[tuple[Workflow, Workflow]]:
    """Mix of exact copies, near-misses, and unrelated workflows."""
    import copy
    import random

    rng = random.Random(seed)
    pairs = []
    for _ in range(n):
        gold = random_workflow(rng)
        roll = rng.random()
        if roll < 0.4:
            pred = Workflow(tuple(TaskStep(s.task, copy.deepcopy(s.parameter)) for s in gold.steps))
        elif roll < 0.8:
            pred = mutate(rng, gold)
        else:
            pred = random_workflow(rng)
        pairs.append((pred, gold))
    return pairs


# hypothesis strategies

param_values = st.recursive(
    st.none()
    | st.booleans()
    | st.integers(min_value=-10_000, max_value=10_000)
    | st.floats(allow_nan=False, allow_infinity=False)
    | st.text(max_size=8),
    lambda children: st.lists(children, max_size=3)
    | st.dictionaries(st.text(min_size=1, max_size=5), children, max_size=3),
    max_leaves=6,
)

task_names = st.text(
    alphabet=st.characters(whitelist_categories=("Ll", "Lu", "Nd"), max_codepoint=0x2FF),
    min_size=1,
    max_size=6,
)

task_steps = st.builds(
    TaskStep,
    task=task_names,
    parameter=st.dictionaries(st.text(min_size=1, max_size=5), param_values, max_size=4),
)

workflows = st.builds(Workflow, st.lists(task_steps, max_size=5).map(tuple))
