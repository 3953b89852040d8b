"""Command line interface: run conversions, chat interactively, evaluate
systems, validate registries, generate datasets, and serve the HTTP API.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path
from typing import Optional

import click

from .agents import EngineError, Session
from .config import ConfigError, DepsBuilder, load_config
from .evaluation.baselines import run_baseline_rag, run_baseline_single_llm
from .evaluation.dataset import DatasetError, load_dataset, save_dataset
from .evaluation.harness import run_workteam, score_predictions
from .evaluation.report import render_table
from .evaluation.synth import generate_synthetic_dataset
from .gateway import GatewayError
from .registry import RegistryError, load_registry
from .tools import ToolOutputError
from .workflow import parse_workflow, serialize_workflow, workflow_to_obj

_FAILURES = (ConfigError, RegistryError, DatasetError, EngineError, GatewayError, ToolOutputError, OSError)


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


def _builder(config_path: Optional[str], **overrides) -> DepsBuilder:
    config = load_config(config_path, overrides=overrides)
    return DepsBuilder(config)


@click.group()
def main() -> None:
    """Natural-language-to-workflow engine and evaluation harness."""


@main.command()
@click.option("--instruction", required=True, help="The natural-language instruction.")
@click.option("--workflow", "workflow_path", type=click.Path(exists=True), default=None,
              help="Existing workflow JSON to modify.")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--json", "as_json", is_flag=True, help="Machine-readable output.")
def run(instruction: str, workflow_path: Optional[str], config_path: Optional[str], as_json: bool) -> None:
    """Convert one instruction into a workflow and print it."""
    try:
        builder = _builder(config_path)
        existing = None
        if workflow_path:
            existing = parse_workflow(Path(workflow_path).read_text(encoding="utf-8"))
        session = Session(builder.deps(), existing_workflow=existing)
        result = session.handle(instruction)
        if result.workflow is None:
            _fail(f"session ended without a workflow: {result.reply or '(no reply)'}")
        if as_json:
            click.echo(json.dumps({
                "reply": result.reply,
                "workflow": workflow_to_obj(result.workflow),
                "transcript": session.transcript.to_objs(),
            }, ensure_ascii=False))
        else:
            click.echo(serialize_workflow(result.workflow))
    except _FAILURES as exc:
        _fail(str(exc))


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
def repl(config_path: Optional[str]) -> None:
    """Interactive multi-turn session; 'exit' quits."""
    try:
        builder = _builder(config_path)
        session = Session(builder.deps())
    except _FAILURES as exc:
        _fail(str(exc))
        return
    click.echo("workteam repl - type an instruction, or 'exit' to quit")
    while True:
        try:
            line = input("> ").strip()
        except EOFError:
            break
        if not line:
            continue
        if line in ("exit", "quit"):
            break
        try:
            result = session.handle(line)
        except _FAILURES as exc:
            click.echo(f"error: {exc}", err=True)
            continue
        if result.reply:
            click.echo(result.reply)
        if result.workflow is not None:
            click.echo(serialize_workflow(result.workflow))


@main.command(name="eval")
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True))
@click.option("--system", type=click.Choice(["workteam", "single_llm", "rag"]), required=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--k", type=int, default=None, help="Top-k candidates for the rag system.")
@click.option("--n-shots", type=int, default=3, help="In-context examples for single_llm.")
@click.option("--json", "as_json", is_flag=True)
def eval_command(dataset_path: str, system: str, config_path: Optional[str],
                 k: Optional[int], n_shots: int, as_json: bool) -> None:
    """Score a system over a JSONL dataset and print the metric report."""
    try:
        builder = _builder(config_path)
        samples = load_dataset(dataset_path, builder.registry)
        if system == "workteam":
            preds = run_workteam(samples, builder.deps)
        elif system == "single_llm":
            llm = builder.baseline_backend(samples)
            preds = run_baseline_single_llm(samples, builder.registry, llm, n_shots)
        else:
            llm = builder.baseline_backend(samples)
            preds = run_baseline_rag(
                samples, builder.registry, builder.embedder, llm, k or builder.config.k
            )
        report = score_predictions(preds, samples)
    except _FAILURES as exc:
        _fail(str(exc))
        return
    if as_json:
        click.echo(json.dumps(report.to_obj()))
    else:
        click.echo(render_table({system: report}))
        click.echo(
            f"counts: {report.n_em}/{report.n_total} exact, "
            f"{report.n_am}/{report.n_total} arranged, "
            f"{report.n_pm}/{report.n_p} parameters"
        )


@main.group()
def registry() -> None:
    """Registry utilities."""


@registry.command(name="validate")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--components", type=click.Path(exists=True), default=None)
@click.option("--descriptions", type=click.Path(exists=True), default=None)
@click.option("--templates", type=click.Path(exists=True), default=None)
@click.option("--lenient", is_flag=True, help="Warn instead of failing on missing resources.")
def registry_validate(config_path, components, descriptions, templates, lenient) -> None:
    """Load a registry in strict mode and report its size."""
    try:
        if components and descriptions and templates:
            reg = load_registry(components, descriptions, templates, strict=not lenient)
        else:
            config = load_config(config_path)
            reg = load_registry(
                config.registry.components,
                config.registry.descriptions,
                config.registry.templates,
                strict=not lenient,
            )
    except _FAILURES as exc:
        _fail(str(exc))
        return
    click.echo(f"ok: {len(reg)} components")


@main.group()
def dataset() -> None:
    """Dataset utilities."""


@dataset.command(name="gen")
@click.option("--seed", type=int, required=True)
@click.option("--n-creation", type=int, default=10)
@click.option("--n-modification", type=int, default=0)
@click.option("--max-components", type=int, default=5)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
def dataset_gen(seed, n_creation, n_modification, max_components, out_path, config_path) -> None:
    """Generate a deterministic synthetic dataset against the configured registry."""
    try:
        builder = _builder(config_path)
        samples = generate_synthetic_dataset(
            seed, n_creation, n_modification, builder.registry, max_components=max_components
        )
        save_dataset(samples, out_path)
    except _FAILURES as exc:
        _fail(str(exc))
        return
    click.echo(f"wrote {len(samples)} samples to {out_path}")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), required=True)
@click.option("--host", default=None)
@click.option("--port", type=int, default=None)
def serve(config_path: str, host: Optional[str], port: Optional[int]) -> None:
    """Run the HTTP session service."""
    import uvicorn

    from .service import build_app

    try:
        config = load_config(config_path, overrides={"listen_host": host, "listen_port": port})
        app = build_app(config)
    except _FAILURES as exc:
        _fail(str(exc))
        return
    uvicorn.run(app, host=config.listen_host, port=config.listen_port)


if __name__ == "__main__":
    main()
