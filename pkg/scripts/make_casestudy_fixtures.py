"""Regenerate the case-study fixture set under fixtures/casestudy/.

Produces the 10-component registry, the scripted backend transcript for the
golden session, the expected final workflow, and config files for the CLI and
service. Run from the repository root:

    python3 scripts/make_casestudy_fixtures.py
"""

from __future__ import annotations

import json
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
OUT = ROOT / "fixtures" / "casestudy"

INSTRUCTION = (
    "Monitor the mailbox with account 98234 and password pass56789. When an email "
    'with the subject "Payment Confirmation" is received, automatically process '
    "the payment information using Python to obtain the result pythonRes and "
    "update the financial information through the post API at "
    "his.huawei.com/payment via the API gateway."
)

COMPONENTS = [
    {
        "name": "api-gateway",
        "description": "Calls an internal REST API through the enterprise API gateway, with configurable method, headers, query parameters and body.",
    },
    {
        "name": "data-mapper",
        "description": "Maps and transforms fields between the outputs and inputs of neighbouring workflow steps.",
    },
    {
        "name": "edm",
        "description": "Sends templated marketing or notification emails to a list of recipients.",
    },
    {
        "name": "file-processing",
        "description": "Runs a user-provided processing script (for example Python) over incoming data and exposes its result to later steps.",
    },
    {
        "name": "http-request",
        "description": "Performs a raw HTTP request to an arbitrary URL outside the gateway.",
    },
    {
        "name": "mqs-consumer",
        "description": "Consumes messages from a message queue topic for downstream processing.",
    },
    {
        "name": "mqs-produce",
        "description": "Publishes a message onto a message queue topic.",
    },
    {
        "name": "public-email",
        "description": "Monitors a public mailbox account and triggers the workflow when a matching email is received.",
    },
    {
        "name": "selenium",
        "description": "Drives a browser automation script for web pages without an API.",
    },
    {
        "name": "sns",
        "description": "Sends a short notification message to subscribers of a topic.",
    },
]

PARAM_DESCRIPTIONS = {
    "api-gateway": {
        "url": {"meaning": "the API path to call behind the gateway", "type": "string", "allowed": "any gateway-registered path"},
        "method": {"meaning": "the HTTP method for the call", "type": "string", "allowed": "GET, POST, PUT, DELETE"},
        "queryParams": {"meaning": "query string parameters as key/value pairs", "type": "object", "allowed": "any string-valued map"},
        "headers": {"meaning": "extra HTTP headers for the call", "type": "object", "allowed": "any string-valued map"},
        "body": {"meaning": "the request body; may reference earlier step results with ${...}", "type": "string", "allowed": "any text"},
    },
    "data-mapper": {
        "source": {"meaning": "the step whose output is mapped", "type": "string", "allowed": "a step name"},
        "mappings": {"meaning": "field-to-field mapping rules", "type": "object", "allowed": "any string-valued map"},
    },
    "edm": {
        "recipients": {"meaning": "email addresses to deliver to", "type": "list", "allowed": "a list of addresses"},
        "template": {"meaning": "the mail template id", "type": "string", "allowed": "a template id"},
        "subject": {"meaning": "the subject line of the mail", "type": "string", "allowed": "any text"},
    },
    "file-processing": {
        "inputParams": {"meaning": "named inputs handed to the script", "type": "object", "allowed": "any map"},
        "script": {"meaning": "the script source or a reference to it", "type": "string", "allowed": "any text"},
    },
    "http-request": {
        "url": {"meaning": "the absolute URL to call", "type": "string", "allowed": "any URL"},
        "method": {"meaning": "the HTTP method", "type": "string", "allowed": "GET, POST, PUT, DELETE"},
        "headers": {"meaning": "extra HTTP headers", "type": "object", "allowed": "any string-valued map"},
        "body": {"meaning": "the request body", "type": "string", "allowed": "any text"},
    },
    "mqs-consumer": {
        "queue": {"meaning": "the queue topic to consume from", "type": "string", "allowed": "a topic name"},
        "group": {"meaning": "the consumer group id", "type": "string", "allowed": "a group id"},
    },
    "mqs-produce": {
        "queue": {"meaning": "the queue topic to publish to", "type": "string", "allowed": "a topic name"},
        "message": {"meaning": "the message payload", "type": "string", "allowed": "any text"},
    },
    "public-email": {
        "account": {"meaning": "the mailbox account to monitor", "type": "string", "allowed": "an account id"},
        "password": {"meaning": "the mailbox password", "type": "string", "allowed": "any text"},
        "receiveType": {"meaning": "how incoming mail is filtered before matching", "type": "string", "allowed": "empty or a named filter"},
        "sender": {"meaning": "only trigger for mail from this sender; empty for any", "type": "string", "allowed": "an address or empty"},
        "subject": {"meaning": "only trigger for mail with this subject; empty for any", "type": "string", "allowed": "any text"},
    },
    "selenium": {
        "url": {"meaning": "the page the browser opens first", "type": "string", "allowed": "any URL"},
        "script": {"meaning": "the automation script to run", "type": "string", "allowed": "any text"},
        "timeout": {"meaning": "seconds to wait before aborting", "type": "string", "allowed": "a number as text"},
    },
    "sns": {
        "topic": {"meaning": "the notification topic", "type": "string", "allowed": "a topic name"},
        "subject": {"meaning": "the notification subject", "type": "string", "allowed": "any text"},
        "message": {"meaning": "the notification body", "type": "string", "allowed": "any text"},
    },
}

BLANK_TEMPLATES = {
    "api-gateway": {"url": "", "queryParams": {}, "headers": {}, "body": "", "method": ""},
    "data-mapper": {"source": "", "mappings": {}},
    "edm": {"recipients": [], "template": "", "subject": ""},
    "file-processing": {"inputParams": {}, "script": ""},
    "http-request": {"url": "", "method": "", "headers": {}, "body": ""},
    "mqs-consumer": {"queue": "", "group": ""},
    "mqs-produce": {"queue": "", "message": ""},
    "public-email": {"account": "", "password": "", "receiveType": "", "sender": "", "subject": ""},
    "selenium": {"url": "", "script": "", "timeout": ""},
    "sns": {"topic": "", "subject": "", "message": ""},
}

GOLDEN_FLOW = [
    {"task": "public-email"},
    {"task": "file-processing"},
    {"task": "api-gateway"},
]

# What the (scripted) filling tool emits. The api-gateway step deliberately
# omits "headers": the engine completes omitted keys from the blank template.
FILLING_TOOL_OUTPUT = [
    {
        "task": "public-email",
        "parameter": {
            "account": "98234",
            "password": "pass56789",
            "receiveType": "",
            "sender": "",
            "subject": "Payment Confirmation",
        },
    },
    {"task": "file-processing", "parameter": {"inputParams": {}, "script": ""}},
    {
        "task": "api-gateway",
        "parameter": {
            "url": "his.huawei.com/payment",
            "method": "POST",
            "queryParams": {},
            "body": '{"parameter": ${pythonRes}}',
        },
    },
]

# Expected final workflow: the filling output with template defaults completed.
GOLDEN_WORKFLOW = [
    FILLING_TOOL_OUTPUT[0],
    FILLING_TOOL_OUTPUT[1],
    {
        "task": "api-gateway",
        "parameter": {**FILLING_TOOL_OUTPUT[2]["parameter"], "headers": {}},
    },
]

GOLDEN_ACTORS = [
    "supervisor",
    "orchestrator",
    "selector-tool",
    "orchestrator",
    "arrange-tool",
    "orchestrator",
    "supervisor",
    "filler",
    "lookup-tool",
    "filler",
    "filling-tool",
    "filler",
    "supervisor",
]


def _action(analysis: str, action: str) -> str:
    return json.dumps({"analysis": analysis, "action": action}, ensure_ascii=False)


SCRIPT = [
    {
        "agent": "supervisor",
        "turn": 0,
        "response": _action(
            "The user wants to set up a workflow to monitor emails for a specific "
            "subject, process payment information with Python, and then update "
            "financial information through an API. The first step will be to generate "
            "the workflow structure, followed by filling in the specific details.",
            "<orchestrator_agent>",
        ),
    },
    {
        "agent": "supervisor",
        "turn": 1,
        "response": _action(
            "I have received the component flow from the orchestrator agent. It seems "
            "rights. I should filling in the parameters.",
            "<filler_agent>",
        ),
    },
    {
        "agent": "supervisor",
        "turn": 2,
        "response": _action(
            "I have received the workflow, and I think the result is correct. Return "
            "to the user.",
            "<end>",
        ),
    },
    {
        "agent": "orchestrator",
        "turn": 0,
        "response": _action(
            "The user wants to create a workflow where an email with a specific "
            "subject triggers a series of automated actions involving processing "
            "payments and updating financial information via an API. This requires "
            "identifying relevant components from the available set, and then "
            "arranging them into a coherent workflow.",
            "<call_selector>",
        ),
    },
    {
        "agent": "orchestrator",
        "turn": 1,
        "response": _action(
            "Given the user's instruction and candidate components, I should arrange "
            "them into a component flow",
            "<call_arrange>",
        ),
    },
    {
        "agent": "orchestrator",
        "turn": 2,
        "response": _action(
            "According to the user input and the component flow, I have finished the work.",
            "<end>",
        ),
    },
    {
        "agent": "filler",
        "turn": 0,
        "response": _action(
            "The user wants to set up a workflow that monitors emails for a specific "
            "subject, processes the payment information using Python, and updates "
            "financial data via an API. First, I will call the blank parameter "
            "template lookup tool to get the required parameter templates for the "
            "'public-email', 'file-processing', and 'api-gateway' components.",
            "<call_lookup>",
        ),
    },
    {
        "agent": "filler",
        "turn": 1,
        "response": _action(
            "Based on the user's instructions and the given component flow, I will "
            "now fill in the parameters using the provided blank templates.",
            "<call_filling>",
        ),
    },
    {
        "agent": "filler",
        "turn": 2,
        "response": _action("I have filled the parameters. My work is done.", "<end>"),
    },
    {"agent": "tools", "turn": 0, "response": json.dumps(GOLDEN_FLOW)},
    {"agent": "tools", "turn": 1, "response": json.dumps(FILLING_TOOL_OUTPUT, ensure_ascii=False)},
    # A follow-up modification round: change the mail subject to "Invoice".
    # Unused by the single-round golden replay; consumed by multi-turn tests.
    {
        "agent": "supervisor",
        "turn": 3,
        "response": _action(
            "Only a parameter changes, so I will call the filler agent directly.",
            "<filler_agent>",
        ),
    },
    {
        "agent": "supervisor",
        "turn": 4,
        "response": _action("The subject has been updated. Returning the workflow.", "<end>"),
    },
    {
        "agent": "filler",
        "turn": 3,
        "response": _action(
            "Modifying the subject parameter in the existing workflow.", "<call_filling>"
        ),
    },
    {"agent": "filler", "turn": 4, "response": _action("Parameter updated.", "<end>")},
    {
        "agent": "tools",
        "turn": 2,
        "response": json.dumps(
            [
                {"task": "public-email", "parameter": {"subject": "Invoice"}},
                {"task": "file-processing", "parameter": {}},
                {"task": "api-gateway", "parameter": {}},
            ]
        ),
    },
]

MODIFICATION_INSTRUCTION = 'Change the subject to "Invoice".'

CONFIG = {
    "registry": {
        "components": "components.json",
        "descriptions": "param_descriptions.json",
        "templates": "blank_templates.json",
    },
    "backends": {
        "supervisor": {"kind": "scripted", "script_path": "golden_script.json"},
        "orchestrator": {"kind": "scripted", "script_path": "golden_script.json"},
        "filler": {"kind": "scripted", "script_path": "golden_script.json"},
        "tools": {"kind": "scripted", "script_path": "golden_script.json"},
    },
    "embedder": {"kind": "hash", "dimension": 256},
    "k": 10,
}

ECHO_CONFIG = {
    "registry": {
        "components": "casestudy/components.json",
        "descriptions": "casestudy/param_descriptions.json",
        "templates": "casestudy/blank_templates.json",
    },
    "backends": {
        "supervisor": {"kind": "echo"},
        "orchestrator": {"kind": "echo"},
        "filler": {"kind": "echo"},
        "tools": {"kind": "echo"},
    },
    "embedder": {"kind": "hash", "dimension": 256},
    "k": 10,
}


def _dump(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    _dump(OUT / "components.json", COMPONENTS)
    _dump(
        OUT / "param_descriptions.json",
        [{"component": name, "params": params} for name, params in sorted(PARAM_DESCRIPTIONS.items())],
    )
    _dump(
        OUT / "blank_templates.json",
        [{"component": name, "parameter": tmpl} for name, tmpl in sorted(BLANK_TEMPLATES.items())],
    )
    _dump(OUT / "golden_script.json", SCRIPT)
    _dump(OUT / "golden_workflow.json", GOLDEN_WORKFLOW)
    _dump(
        OUT / "golden_session.json",
        {
            "instruction": INSTRUCTION,
            "actors": GOLDEN_ACTORS,
            "modification_instruction": MODIFICATION_INSTRUCTION,
        },
    )
    _dump(OUT / "config.json", CONFIG)
    _dump(OUT.parent / "echo_config.json", ECHO_CONFIG)
    print(f"wrote fixtures to {OUT}")


if __name__ == "__main__":
    main()
