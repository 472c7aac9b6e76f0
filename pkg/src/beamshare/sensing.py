"""
Cognitive sensing: interference power detection, least-squares CSI
estimation and the primary-traffic activity indicator.

The sensing engine of a real radio works on demodulated frames. Here it is
abstracted to the quantities the beamforming engine consumes: a per-slot
busy flag (taken from the primary MAC state) feeding an exponentially
weighted running average, and a statistical model of LS estimation error.
"""

from dataclasses import dataclass

import numpy as np

from .channel import draw_small_scale
from .errors import InvalidParameter, NoSamples

DEFAULT_ALPHA = 0.05


@dataclass(frozen=True)
class PilotModel:
    pilot_count: int
    pilot_power: float
    noise_power: float

    def __post_init__(self):
        if self.pilot_count <= 0:
            raise InvalidParameter("pilot_count must be positive")
        if not self.pilot_power > 0:
            raise InvalidParameter("pilot_power must be positive")
        if not self.noise_power >= 0:
            raise InvalidParameter("noise_power must be non-negative")

    @property
    def error_variance(self):
        """Per-entry LS error variance ``sigma^2 / (P_pilot L)``."""
        return self.noise_power / (self.pilot_power * self.pilot_count)


@dataclass(frozen=True)
class CsiEstimate:
    vector: np.ndarray
    error_variance: float
    slot_index: int = 0

    def __post_init__(self):
        if self.error_variance < 0:
            raise InvalidParameter("negative CSI error variance")


@dataclass(frozen=True)
class TrafficKpi:
    value: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise InvalidParameter(f"KPI {self.value} outside [0, 1]")


def detect_interference_power(received_samples):
    """Mean received intensity ``mean(|x|^2)`` of a list of samples."""
    x = np.asarray(received_samples, dtype=complex)
    if x.size == 0:
        raise NoSamples("interference detector got no samples")
    return float(np.mean(np.abs(x) ** 2))


def estimate_csi_ls(true_channel, pilots, rng, slot_index=0):
    """
    Least-squares channel estimate from ``pilots.pilot_count`` known pilots.

    Averaging ``L`` pilot observations ``y = h x_p + n`` and dividing by the
    pilot leaves ``h + e`` with ``e ~ CN(0, sigma^2 / (|x_p|^2 L))`` per
    entry, which is what is drawn here. ``true_channel`` may carry leading
    batch dimensions.
    """
    h = np.asarray(true_channel, dtype=complex)
    var = pilots.error_variance
    if var == 0.0:
        return CsiEstimate(h.copy(), 0.0, slot_index)
    e = draw_small_scale(rng, h.shape) * np.sqrt(var)
    return CsiEstimate(h + e, var, slot_index)


def update_traffic_kpi(prev, busy_this_slot, alpha=DEFAULT_ALPHA):
    """One EWMA step of the busy indicator, clamped to [0, 1]."""
    if not 0.0 < alpha <= 1.0:
        raise InvalidParameter(f"smoothing factor {alpha} not in (0, 1]")
    v = (1.0 - alpha) * prev.value + alpha * (1.0 if busy_this_slot else 0.0)
    return TrafficKpi(min(1.0, max(0.0, v)))
