"""Component registry: the component set, parameter descriptions, and blank templates.

Three JSON documents back a registry:

- components.json:         [{"name": str, "description": str}, ...]
- param_descriptions.json: [{"component": str, "params": {name: {"meaning", "type", "allowed"}}}, ...]
- blank_templates.json:    [{"component": str, "parameter": {name: <default JSON value>}}, ...]

Strict mode (default) requires every component to carry both a description and
a template, rejects unknown extra fields, and requires template keys to equal
described parameter keys. Lenient mode downgrades missing resources to
warnings and synthesizes the missing side from the one that exists.
"""

from __future__ import annotations

import copy
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .workflow import ComponentFlow, ParamValue, _check_value

log = logging.getLogger(__name__)


class RegistryError(ValueError):
    """A registry file is missing, malformed, or inconsistent."""


@dataclass(frozen=True)
class ComponentSpec:
    name: str
    description: str


@dataclass(frozen=True)
class ParamField:
    meaning: str = ""
    type: str = ""
    allowed: str = ""


@dataclass(frozen=True)
class ParamDescription:
    component: str
    params: dict[str, ParamField] = field(default_factory=dict)


@dataclass(frozen=True)
class BlankTemplate:
    component: str
    parameter: dict[str, ParamValue] = field(default_factory=dict)


@dataclass(frozen=True)
class Registry:
    components: dict[str, ComponentSpec]
    descriptions: dict[str, ParamDescription]
    templates: dict[str, BlankTemplate]

    def __len__(self) -> int:
        return len(self.components)


def _load_json_list(path: str | Path, what: str) -> list:
    p = Path(path)
    if not p.is_file():
        raise RegistryError(f"{what} file not found: {p}")
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise RegistryError(f"{what} file {p} is not valid JSON: {exc}") from exc
    if not isinstance(data, list):
        raise RegistryError(f"{what} file {p} must contain a JSON array")
    return data


def _require_keys(obj: dict, required: set[str], what: str, strict: bool) -> None:
    if not isinstance(obj, dict):
        raise RegistryError(f"{what}: expected an object")
    missing = required - set(obj)
    if missing:
        raise RegistryError(f"{what}: missing fields {sorted(missing)}")
    extra = set(obj) - required
    if extra and strict:
        raise RegistryError(f"{what}: unknown fields {sorted(extra)}")


def load_registry(
    components_path: str | Path,
    descriptions_path: str | Path,
    templates_path: str | Path,
    *,
    strict: bool = True,
) -> Registry:
    """Load and cross-check the three resource files."""
    components: dict[str, ComponentSpec] = {}
    for entry in _load_json_list(components_path, "components"):
        _require_keys(entry, {"name", "description"}, "component entry", strict)
        name, desc = entry["name"], entry["description"]
        if not isinstance(name, str) or not name:
            raise RegistryError("component name must be a non-empty string")
        if not isinstance(desc, str) or not desc:
            raise RegistryError(f"component {name!r}: description must be non-empty")
        if name in components:
            raise RegistryError(f"duplicate component name {name!r}")
        components[name] = ComponentSpec(name, desc)

    descriptions: dict[str, ParamDescription] = {}
    for entry in _load_json_list(descriptions_path, "param descriptions"):
        _require_keys(entry, {"component", "params"}, "description entry", strict)
        name = entry["component"]
        if name not in components:
            raise RegistryError(f"parameter description for unknown component {name!r}")
        if name in descriptions:
            raise RegistryError(f"duplicate parameter description for {name!r}")
        params_obj = entry["params"]
        if not isinstance(params_obj, dict):
            raise RegistryError(f"{name!r}: params must be an object")
        params: dict[str, ParamField] = {}
        for pname, meta in params_obj.items():
            _require_keys(meta, {"meaning", "type", "allowed"}, f"{name}.{pname}", strict)
            params[pname] = ParamField(str(meta["meaning"]), str(meta["type"]), str(meta["allowed"]))
        descriptions[name] = ParamDescription(name, params)

    templates: dict[str, BlankTemplate] = {}
    for entry in _load_json_list(templates_path, "blank templates"):
        _require_keys(entry, {"component", "parameter"}, "template entry", strict)
        name = entry["component"]
        if name not in components:
            raise RegistryError(f"blank template for unknown component {name!r}")
        if name in templates:
            raise RegistryError(f"duplicate blank template for {name!r}")
        parameter = entry["parameter"]
        if not isinstance(parameter, dict):
            raise RegistryError(f"{name!r}: template parameter must be an object")
        try:
            _check_value(parameter, f"template {name}")
        except ValueError as exc:
            raise RegistryError(str(exc)) from exc
        templates[name] = BlankTemplate(name, parameter)

    for name in components:
        desc = descriptions.get(name)
        tmpl = templates.get(name)
        if desc is None and tmpl is None:
            if strict:
                raise RegistryError(f"component {name!r} has no description and no template")
            log.warning("component %r has no resources; synthesizing empty ones", name)
            descriptions[name] = ParamDescription(name, {})
            templates[name] = BlankTemplate(name, {})
            continue
        if desc is None:
            if strict:
                raise RegistryError(f"component {name!r} has no parameter description")
            log.warning("component %r has no description; synthesizing from template", name)
            descriptions[name] = ParamDescription(
                name, {p: ParamField() for p in tmpl.parameter}
            )
        if tmpl is None:
            if strict:
                raise RegistryError(f"component {name!r} has no blank template")
            log.warning("component %r has no template; synthesizing empty defaults", name)
            templates[name] = BlankTemplate(name, {p: "" for p in desc.params})
        desc, tmpl = descriptions[name], templates[name]
        if set(desc.params) != set(tmpl.parameter):
            msg = (
                f"component {name!r}: described parameters {sorted(desc.params)} "
                f"do not match template keys {sorted(tmpl.parameter)}"
            )
            if strict:
                raise RegistryError(msg)
            log.warning("%s", msg)

    return Registry(components, descriptions, templates)


def get_component(name: str, registry: Registry) -> ComponentSpec:
    try:
        return registry.components[name]
    except KeyError:
        raise RegistryError(f"unknown component {name!r}") from None


def list_components(registry: Registry) -> list[ComponentSpec]:
    """All components, sorted by name for reproducible prompt construction."""
    return [registry.components[n] for n in sorted(registry.components)]


def lookup_templates(
    flow: ComponentFlow, registry: Registry
) -> tuple[list[ParamDescription], list[BlankTemplate]]:
    """Per-step parameter descriptions and blank templates, parallel to the flow.

    Duplicate components yield independent template instances so later filling
    can diverge per occurrence.
    """
    descriptions: list[ParamDescription] = []
    templates: list[BlankTemplate] = []
    for step in flow.steps:
        if step.task not in registry.components:
            raise RegistryError(f"unknown component {step.task!r} in flow")
        desc = registry.descriptions[step.task]
        tmpl = registry.templates[step.task]
        descriptions.append(ParamDescription(desc.component, dict(desc.params)))
        templates.append(BlankTemplate(tmpl.component, copy.deepcopy(tmpl.parameter)))
    return descriptions, templates


def registry_to_files(registry: Registry) -> tuple[list, list, list]:
    """The three JSON documents (as Python data) that load_registry accepts."""
    comps = [
        {"name": c.name, "description": c.description}
        for c in list_components(registry)
    ]
    descs = [
        {
            "component": d.component,
            "params": {
                p: {"meaning": f.meaning, "type": f.type, "allowed": f.allowed}
                for p, f in d.params.items()
            },
        }
        for d in (registry.descriptions[n] for n in sorted(registry.descriptions))
    ]
    tmpls = [
        {"component": t.component, "parameter": t.parameter}
        for t in (registry.templates[n] for n in sorted(registry.templates))
    ]
    return comps, descs, tmpls
