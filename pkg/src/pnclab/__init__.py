"""Packetized network coding under dynamic schedules: simulation, circuits and min-cuts."""

from .gf import GF, Packet, decode, encode
from .schedule import Schedule, VertexCopy, build_hypergraph, check, parse_schedule, validate

__version__ = "0.1.0"

__all__ = [
    "GF",
    "Packet",
    "Schedule",
    "VertexCopy",
    "build_hypergraph",
    "check",
    "decode",
    "encode",
    "parse_schedule",
    "validate",
]
