"""Simulator and analysis library for round-trip Mach-Zehnder key distribution."""
from .channel import ChannelConfig
from .optics import (
    FieldPair,
    Measurement,
    apply,
    beam_splitter,
    mzi_transform,
    observe,
    phase_shifter,
    return_arm_fields,
    round_trip_transform,
    visibility_surface,
)
from .protocol import D, KeySymbol, run_session

__version__ = "0.1.0"
