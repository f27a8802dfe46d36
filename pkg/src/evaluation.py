from typing import Dict
import logging
import math

import numpy as np
from scipy.optimize import curve_fit

from src.lattice import DimensionMismatchError

logger = logging.getLogger(__name__)

NORM_DRIFT_TOLERANCE = 1e-10


def _oscillation(t, offset, cos_amplitude, sin_amplitude, frequency):
    return offset + cos_amplitude * np.cos(frequency * t) + sin_amplitude * np.sin(frequency * t)


def _oscillation_jacobian(t, offset, cos_amplitude, sin_amplitude, frequency):
    cos_term = np.cos(frequency * t)
    sin_term = np.sin(frequency * t)
    return np.column_stack([
        np.ones_like(t),
        cos_term,
        sin_term,
        t * (sin_amplitude * cos_term - cos_amplitude * sin_term),
    ])


def fit_oscillation_frequency(times: np.ndarray, values: np.ndarray, oversample: int = 16) -> float:
    """
    Angular frequency of the dominant oscillation in a uniformly sampled series.

    The zero-padded FFT peak seeds a least-squares fit of
    c + a cos(w t) + b sin(w t). The series should cover at least three
    periods so that the peak clears the DC leakage.

    Args:
        times: uniformly spaced sample times
        values: samples
        oversample: zero-padding factor of the FFT seed

    Returns:
        w in radians per unit of `times`
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.shape != values.shape or times.ndim != 1:
        raise DimensionMismatchError(f"times {times.shape} and values {values.shape} must be matching 1-D arrays")
    if times.size < 8:
        raise ValueError(f"need at least 8 samples to fit a frequency, got {times.size}")
    spacing = np.diff(times)
    if not np.allclose(spacing, spacing[0], rtol=1e-9, atol=0.0):
        raise ValueError("times must be uniformly spaced")

    dt = float(spacing[0])
    centered_t = times - times.mean()
    centered_y = values - values.mean()

    n_padded = times.size * oversample
    spectrum = np.abs(np.fft.rfft(centered_y, n=n_padded))
    skip = 2 * oversample
    if spectrum.size <= skip + 1:
        raise ValueError("series too short to locate an oscillation peak")
    peak = skip + int(np.argmax(spectrum[skip:]))
    seed_frequency = 2 * math.pi * peak / (n_padded * dt)

    design = np.column_stack([
        np.ones_like(centered_t),
        np.cos(seed_frequency * centered_t),
        np.sin(seed_frequency * centered_t),
    ])
    (offset, cos_amplitude, sin_amplitude), *_ = np.linalg.lstsq(design, values, rcond=None)

    params, _ = curve_fit(
        _oscillation,
        centered_t,
        values,
        p0=[offset, cos_amplitude, sin_amplitude, seed_frequency],
        jac=_oscillation_jacobian,
        maxfev=10000,
        ftol=1e-12,
        xtol=1e-12,
    )
    return abs(float(params[3]))


def max_abs_deviation(first: np.ndarray, second: np.ndarray) -> np.ndarray:
    """Largest |first - second| per column (over rows)."""
    first = np.asarray(first, dtype=float)
    second = np.asarray(second, dtype=float)
    if first.shape != second.shape:
        raise DimensionMismatchError(f"cannot compare arrays of shape {first.shape} and {second.shape}")
    return np.max(np.abs(first - second), axis=0)


def late_time_mean(steps: np.ndarray, values: np.ndarray, start: int) -> float:
    """Mean of `values` over the rows with step >= start."""
    steps = np.asarray(steps)
    mask = steps >= start
    if not mask.any():
        raise ValueError(f"no rows at or after step {start}")
    return float(np.mean(np.asarray(values)[mask]))


def log_series_metrics(scenario: str, series) -> Dict[str, float]:
    norm_drift = float(np.max(np.abs(series.norms - 1.0)))
    sum_drift = float(np.max(np.abs(series.probabilities.sum(axis=1) - 1.0)))

    if not norm_drift <= NORM_DRIFT_TOLERANCE:
        logger.warning({
            "event": "norm_drift",
            "scenario": scenario,
            "max_norm_drift": norm_drift,
        })

    metrics = {"max_norm_drift": norm_drift, "max_probability_sum_drift": sum_drift}
    logger.info({
        "event": "scenario_done",
        "scenario": scenario,
        "rows": len(series.steps),
        **metrics,
    })
    return metrics


def log_comparison_metrics(report):
    logger.info({
        "event": "comparison",
        "deviations": dict(zip(report.labels, report.deviations)),
        "max_abs_deviation": report.max_deviation,
        "passed": report.passed,
    })
    if not report.passed:
        logger.warning(
            f"Lattice and momentum oracle disagree by {report.max_deviation:.3e} "
            f"(tolerance {report.tolerance:.1e})"
        )


def log_mapping_metrics(mapping):
    logger.info({
        "event": "experiment_mapping",
        "theta1": mapping.theta1,
        "theta2": mapping.theta2,
        "kappa": mapping.kappa,
        "steps": mapping.steps,
        "target_phase": mapping.target_phase,
        "relative_residual": mapping.relative_residual,
    })
