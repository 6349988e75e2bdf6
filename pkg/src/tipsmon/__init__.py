"""Safety-rule compiler and runtime monitor for authored surgical VR training."""

from .catalog import Catalog, CatalogError, Scene, complete, compose, load_catalog
from .model import (
    Achievement,
    ClipLayout,
    Completion,
    Finding,
    ForceLimit,
    NoForeignBodies,
    ProcedureSpec,
    Proximity,
    SessionReport,
    Simlet,
    SutureRegionRule,
    TaskStep,
    ToolSpec,
    Vec3,
    Violation,
    validate_spec,
)
from .monitor import ImmediateAlert, MonitorError, MonitorSet, compile_monitors
from .specparse import (
    SafetyParseError,
    format_step,
    generate_instructions,
    parse_safety,
    parse_step,
)

__version__ = "0.1.0"
