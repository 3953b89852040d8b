"""workteam: a multi-agent engine that converts natural-language instructions
into executable JSON workflows, plus the evaluation harness for it.

Three agents cooperate per session: a supervisor plans and reviews, an
orchestrator arranges candidate components into a flow, and a filler populates
each step's parameters from its blank template. Four tools back them:
component filtering (embedding similarity), component orchestration, template
lookup, and parameter filling.
"""

from .agents import (
    EngineConfig,
    EngineDeps,
    EngineError,
    Session,
    SessionResult,
    Transcript,
    filler_run,
    orchestrator_run,
    reflect,
    run_session,
    supervisor_step,
)
from .gateway import (
    AgentAction,
    Backend,
    ChatMessage,
    FunctionBackend,
    HttpBackend,
    ScriptedBackend,
    load_script,
    parse_agent_action,
)
from .registry import (
    BlankTemplate,
    ComponentSpec,
    ParamDescription,
    Registry,
    RegistryError,
    get_component,
    list_components,
    load_registry,
    lookup_templates,
)
from .retrieval import (
    ComponentFilter,
    Embedder,
    HashEmbedder,
    HttpEmbedder,
    ScoredComponent,
    cosine_similarity,
    filter_components,
)
from .tools import (
    FillingRequest,
    OrchestrationRequest,
    build_filling_prompt,
    build_orchestration_prompt,
    fill_parameters,
    orchestrate,
)
from .workflow import (
    ComponentFlow,
    TaskStep,
    ValidationReport,
    Workflow,
    WorkflowError,
    WorkflowParseError,
    diff_workflows,
    parse_flow,
    parse_workflow,
    serialize_flow,
    serialize_workflow,
    validate_flow,
    validate_workflow,
)

__version__ = "0.1.0"
