"""Learned joint source-channel video transmission over noisy channels.

The heavy lifting lives in the compiled extension; this package re-exports
the operations that make sense from python: channel math, quality metrics,
frame/clip IO, the codec itself, and the evaluation sweep.
"""

from wirevid._core import (
    Codec,
    CodecConfig,
    cond_snr_db,
    count_actions,
    enumerate_actions,
    epsilon_schedule,
    evaluate_sweep,
    interpolation_schedule,
    max_msssim_levels,
    mse,
    ms_ssim,
    msssim_weights,
    noise_power_for_snr,
    power_normalize,
    psnr_db,
    read_ppm,
    snr_db,
    snr_grid,
    synth_clip,
    transmit,
    uniform_action,
    write_outputs,
    write_ppm,
)

__version__ = "0.1.0"

__all__ = [
    "Codec",
    "CodecConfig",
    "cond_snr_db",
    "count_actions",
    "enumerate_actions",
    "epsilon_schedule",
    "evaluate_sweep",
    "interpolation_schedule",
    "max_msssim_levels",
    "mse",
    "ms_ssim",
    "msssim_weights",
    "noise_power_for_snr",
    "power_normalize",
    "psnr_db",
    "read_ppm",
    "snr_db",
    "snr_grid",
    "synth_clip",
    "transmit",
    "uniform_action",
    "write_outputs",
    "write_ppm",
]
