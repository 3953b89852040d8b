"""The three workflow quality metrics: exact match, arrangement, parameter accuracy.

Exact match compares canonical serializations byte-for-byte. Arrangement
compares the ordered task-name sequences, ignoring parameters. Parameter
accuracy aligns steps positionally (same index, same task name) and counts
gold parameters reproduced with a deep-equal value; extra predicted keys or
steps are ignored here since they can only hurt exact match.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from ..workflow import Workflow, serialize_workflow, values_equal


@dataclass(frozen=True)
class MetricsReport:
    n_total: int
    n_em: int
    n_am: int
    n_p: int
    n_pm: int
    emr: float
    aa: float
    pa: float

    def to_obj(self) -> dict:
        return {
            "n_total": self.n_total,
            "n_em": self.n_em,
            "n_am": self.n_am,
            "n_p": self.n_p,
            "n_pm": self.n_pm,
            "emr": self.emr,
            "aa": self.aa,
            "pa": self.pa,
        }


def exact_match(pred: Workflow, gold: Workflow) -> bool:
    return serialize_workflow(pred) == serialize_workflow(gold)


def arrangement_match(pred: Workflow, gold: Workflow) -> bool:
    return pred.task_sequence() == gold.task_sequence()


def parameter_matches(pred: Workflow, gold: Workflow) -> tuple[int, int]:
    """(matched, total) over the gold workflow's parameters."""
    n_p = sum(len(step.parameter) for step in gold.steps)
    n_pm = 0
    for i, gold_step in enumerate(gold.steps):
        if i >= len(pred.steps) or pred.steps[i].task != gold_step.task:
            continue
        pred_params = pred.steps[i].parameter
        for key, gold_value in gold_step.parameter.items():
            if key in pred_params and values_equal(pred_params[key], gold_value):
                n_pm += 1
    return n_pm, n_p


def evaluate(pairs: Iterable[tuple[Workflow, Workflow]]) -> MetricsReport:
    """Aggregate the three metrics over (pred, gold) pairs."""
    n_total = n_em = n_am = n_p = n_pm = 0
    for pred, gold in pairs:
        n_total += 1
        if exact_match(pred, gold):
            n_em += 1
        if arrangement_match(pred, gold):
            n_am += 1
        matched, total = parameter_matches(pred, gold)
        n_pm += matched
        n_p += total
    return MetricsReport(
        n_total=n_total,
        n_em=n_em,
        n_am=n_am,
        n_p=n_p,
        n_pm=n_pm,
        emr=n_em / n_total if n_total else 0.0,
        aa=n_am / n_total if n_total else 0.0,
        pa=n_pm / n_p if n_p else 0.0,
    )
