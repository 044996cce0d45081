"""Burst-mode turbo-coded OQPSK modem: transmitter, synchronizing receiver and Monte Carlo harness."""
from .acq import SyncReport, acquire
from .config import ModemConfig, ebno_to_n0, load_config, make_config, paper_config
from .errors import (
    AliasingError,
    ConfigError,
    EmptyInputError,
    ModemError,
    NumericError,
    TruncatedFrameError,
)
from .harness import ExperimentSpec, run_frame
from .pulses import make_beta, make_pulses
from .track import DetectedFrame, run_tracking
from .turbo import SoftFrame, turbo_decode, turbo_encode
from .tx import assemble_burst, transmit

__all__ = [
    "AliasingError", "ConfigError", "DetectedFrame", "EmptyInputError", "ExperimentSpec",
    "ModemConfig", "ModemError", "NumericError", "SoftFrame", "SyncReport", "TruncatedFrameError",
    "acquire", "assemble_burst", "ebno_to_n0", "load_config", "make_beta", "make_config",
    "make_pulses", "paper_config", "run_frame", "run_tracking", "transmit", "turbo_decode", "turbo_encode",
]
