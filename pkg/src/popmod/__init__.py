"""Population protocols with shutdown requests.

Simulation, bounded exhaustive verification and direct composition of
population protocols whose agents can be asked to shut down.
"""

from ._jit import disable_jit, enable_jit, jit_enabled
from .composer import compose, compose_full
from .formats import emit_protocol, load_protocol, load_spec, parse_protocol, parse_spec
from .model import (
    AgentConfiguration,
    AugmentedProtocol,
    Configuration,
    Mode,
    Protocol,
    ProtocolError,
    augment_with_inputs,
    validate_protocol,
)
from .protolib import builtin
from .semantics import RequestScript, Step, StepKind, Trace, detect_stabilization, run
from .specs import ComposedSpec, PairMultiset, Spec, eval_composed, eval_spec, parse_formula
from .verifier import (
    Explosion,
    VerificationReport,
    bottom_sccs,
    build_graph,
    check_computes_predicate,
    check_implements_spec,
    check_implements_spec_with_shutdown,
    verify,
)

__version__ = "0.1.0"

__all__ = [
    "AgentConfiguration", "AugmentedProtocol", "ComposedSpec", "Configuration", "Explosion",
    "Mode", "PairMultiset", "Protocol", "ProtocolError", "RequestScript", "Spec", "Step",
    "StepKind", "Trace", "VerificationReport", "augment_with_inputs", "bottom_sccs",
    "build_graph", "builtin", "check_computes_predicate", "check_implements_spec",
    "check_implements_spec_with_shutdown", "compose", "compose_full", "detect_stabilization",
    "disable_jit", "emit_protocol", "enable_jit", "eval_composed", "eval_spec", "jit_enabled",
    "load_protocol", "load_spec", "parse_formula", "parse_protocol", "parse_spec", "run",
    "validate_protocol", "verify",
]
