"""Time-domain channel property (TDCP) feedback toolkit.

Fading channel samplers, TRS measurement, the correlation-amplitude metric,
the TDCP report codec, mode switching policies and the link evaluation used
to judge them.
"""
from .channel import (AntennaArray, ChannelSampler, TapProfile, VelocityVector, cdl_a, make_cdl,
                      make_tdl, max_doppler)
from .metric import corr_amplitude, corr_phase, doppler_spread_from_corr, jakes_autocorr_reference
from .policy import SwitchingPolicy, calibrate_threshold, decide_mode
from .report import Delay, TdcpReportConfig, UeCapability, decode_report, encode_report, validate_config
from .scenario import Scenario, load_scenario
from .trs import Numerology, TrsConfig, observe, trs_occasions

__version__ = "0.1.0"

__all__ = [
    "AntennaArray", "ChannelSampler", "TapProfile", "VelocityVector", "cdl_a", "make_cdl", "make_tdl",
    "max_doppler", "corr_amplitude", "corr_phase", "doppler_spread_from_corr", "jakes_autocorr_reference",
    "SwitchingPolicy", "calibrate_threshold", "decide_mode", "Delay", "TdcpReportConfig", "UeCapability",
    "decode_report", "encode_report", "validate_config", "Scenario", "load_scenario", "Numerology",
    "TrsConfig", "observe", "trs_occasions",
]
