"""
FM-OFDM integrated sensing and communication simulation.

Modules
-------
waveform  FM-OFDM, CE-OFDM and CP-OFDM transmitters, envelope/bandwidth diagnostics
channel   time-varying multipath, radar target echoes, AWGN
fm_rx     limiter-discriminator receiver, effective channel, beta weights, baselines
radar     range compression, peak picking, Doppler estimation, RDM, sensing limits
metrics   BER/RMSE scoring and sweep aggregation
harness   experiment configuration, Monte Carlo runner, exporters, CLI
"""

from .waveform import (
    SPEED_OF_LIGHT,
    AliasingError,
    ComplexSignal,
    FmParams,
    HermitianError,
    OfdmConfig,
    SubcarrierFrame,
)

__version__ = "0.1.0"

__all__ = [
    "SPEED_OF_LIGHT",
    "AliasingError",
    "ComplexSignal",
    "FmParams",
    "HermitianError",
    "OfdmConfig",
    "SubcarrierFrame",
]
