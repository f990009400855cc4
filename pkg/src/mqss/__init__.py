"""Simulator for a mediated multiparty quantum secret sharing protocol.

A fully quantum but untrusted server distributes GHZ states to a dealer and
n agents who are each limited to the Hadamard gate and Z-basis measurement.
The package provides the exact state-vector engine, the participant state
machines, the adversary models used in the security analysis, and a CLI for
running seeded Monte-Carlo experiments.
"""

from .adversary import (
    CollectiveAttackConfig,
    CollusionConfig,
    LeakageEstimate,
    MeasureResendConfig,
    estimate_leakage,
    run_collusion,
)
from .channel import ClassicalLog, QubitChannel, broadcast, transmit
from .ghz import GhzSpec, HadamardPattern, prepare
from .protocol import (
    Mode,
    RoundCase,
    RoundRecord,
    SessionConfig,
    SessionOutcome,
    Verdict,
    run_rounds,
    run_session,
)
from .statevec import PureState, fidelity

__all__ = [
    "ClassicalLog",
    "CollectiveAttackConfig",
    "CollusionConfig",
    "GhzSpec",
    "HadamardPattern",
    "LeakageEstimate",
    "MeasureResendConfig",
    "Mode",
    "PureState",
    "QubitChannel",
    "RoundCase",
    "RoundRecord",
    "SessionConfig",
    "SessionOutcome",
    "Verdict",
    "broadcast",
    "estimate_leakage",
    "fidelity",
    "prepare",
    "run_collusion",
    "run_rounds",
    "run_session",
    "transmit",
]
__version__ = "0.1.0"
