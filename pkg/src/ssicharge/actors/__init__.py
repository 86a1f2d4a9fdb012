"""Protocol roles as message-driven state machines."""

from .base import ANONYMOUS, COMMIT, LABELS, REVEAL, RUNNING, Actor, TraceEvent
from .cp import ChargePoint, Cpo
from .emsp import BillingEntry, Contract, Emsp
from .ev import ChargeSession, EvWallet
from .steward import Steward

__all__ = [
    "ANONYMOUS",
    "COMMIT",
    "LABELS",
    "REVEAL",
    "RUNNING",
    "Actor",
    "TraceEvent",
    "ChargePoint",
    "Cpo",
    "BillingEntry",
    "Contract",
    "Emsp",
    "ChargeSession",
    "EvWallet",
    "Steward",
]
