"""Deterministic synthetic dataset generator for desk-scale evaluation runs.

Instructions are template-rendered English that names the components and the
parameter values the gold workflow uses, so both scripted fakes and live
models get a fair target. Gold workflows always validate against the registry
they were generated from.
"""

from __future__ import annotations

import copy
import random

from ..registry import Registry
from ..workflow import TaskStep, Workflow
from .dataset import DatasetSample


def _render_step(rng: random.Random, registry: Registry, name: str) -> tuple[TaskStep, str]:
    params = copy.deepcopy(registry.templates[name].parameter)
    string_keys = sorted(k for k, v in params.items() if isinstance(v, str))
    phrases = []
    if string_keys:
        for key in rng.sample(string_keys, rng.randint(0, min(3, len(string_keys)))):
            value = f"v{rng.randrange(100000)}"
            params[key] = value
            phrases.append(f'{key} set to "{value}"')
    phrase = f"run {name}"
    if phrases:
        phrase += " with " + ", ".join(phrases)
    return TaskStep(name, params), phrase


def _creation(rng: random.Random, registry: Registry, sid: str, max_components: int) -> DatasetSample:
    names = sorted(registry.components)
    steps, phrases = [], []
    for _ in range(rng.randint(1, max_components)):
        step, phrase = _render_step(rng, registry, rng.choice(names))
        steps.append(step)
        phrases.append(phrase)
    instruction = "Create a workflow that will " + ", then ".join(phrases) + "."
    return DatasetSample(sid, "creation", instruction, Workflow(tuple(steps)))


def _modification(rng: random.Random, registry: Registry, sid: str, max_components: int) -> DatasetSample:
    base = _creation(rng, registry, sid, max_components).gold_workflow
    steps = list(base.steps)
    editable = [
        (i, key)
        for i, step in enumerate(steps)
        for key in sorted(step.parameter)
        if isinstance(step.parameter[key], str)
    ]
    ops = ["append"]
    if editable:
        ops.append("param")
    if len(steps) >= 2:
        ops.append("remove")
    op = rng.choice(sorted(ops))
    if op == "param":
        i, key = editable[rng.randrange(len(editable))]
        value = f"v{rng.randrange(100000)}"
        params = dict(steps[i].parameter)
        params[key] = value
        steps[i] = TaskStep(steps[i].task, params)
        instruction = (
            f"In the current workflow, change {key} of step {i + 1} "
            f'({steps[i].task}) to "{value}".'
        )
    elif op == "remove":
        removed = steps.pop()
        instruction = f"Remove the last step ({removed.task}) from the current workflow."
    else:
        names = sorted(registry.components)
        step, phrase = _render_step(rng, registry, rng.choice(names))
        steps.append(step)
        instruction = f"Add a step at the end of the current workflow: {phrase}."
    return DatasetSample(sid, "modification", instruction, Workflow(tuple(steps)), base)


def generate_synthetic_dataset(
    seed: int,
    n_creation: int,
    n_modification: int,
    registry: Registry,
    *,
    max_components: int = 5,
) -> list[DatasetSample]:
    """Deterministic for a fixed seed; byte-identical across runs."""
    if not registry.components:
        raise ValueError("cannot generate samples from an empty registry")
    rng = random.Random(seed)
    samples = [
        _creation(rng, registry, f"c{seed}-{i:04d}", max_components)
        for i in range(n_creation)
    ]
    samples.extend(
        _modification(rng, registry, f"m{seed}-{i:04d}", max_components)
        for i in range(n_modification)
    )
    return samples
