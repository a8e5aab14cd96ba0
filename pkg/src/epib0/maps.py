"""Per-pixel exponential parameter maps and their physical decomposition."""

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError


@dataclass
class BetaMap:
    """Per-pixel frame-to-frame decay ``beta = exp(-gamma*frame_dt)``.

    ``frame_dt`` records the frame spacing the map refers to (seconds), so a
    map estimated at one segmentation tier is unambiguous at another.
    Pixels where no reliable filter ratio existed are flagged in
    ``background`` and carry the configured constant instead.
    """

    values: np.ndarray
    frame_dt: float
    background: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.background is None:
            self.background = np.zeros(self.values.shape, dtype=bool)

    @property
    def foreground(self):
        return ~self.background


def principal_root(z, k):
    """Principal k-th root: phase of the result lies in (-pi/k, pi/k]."""
    if k < 1:
        raise ParameterError("root order must be a positive integer")
    mag = np.abs(z) ** (1.0 / k)
    return mag * np.exp(1j * np.angle(z) / k)


def beta_to_maps(beta, dt=None):
    """Decompose a beta map into off-resonance (Hz) and relaxation (1/s).

    ``gamma = -log(beta)/dt`` with the principal complex logarithm;
    ``R2* = Re(gamma)``, ``omega = Im(gamma)/(2*pi)``.  Zero-valued beta
    pixels are marked invalid (NaN in both maps).

    Parameters
    ----------
    beta : BetaMap or complex ndarray
    dt : float, optional
        Frame spacing; defaults to ``beta.frame_dt`` for a BetaMap.

    Returns
    -------
    (omega_hz, r2star) : float ndarrays
    """
    if isinstance(beta, BetaMap):
        values = beta.values
        dt = beta.frame_dt if dt is None else dt
    else:
        values = beta
        if dt is None:
            raise ParameterError("dt required when beta is a bare array")
    if dt <= 0:
        raise ParameterError("frame spacing must be positive")
    invalid = values == 0
    safe = np.where(invalid, 1.0, values)
    g = -np.log(safe) / dt
    omega_hz = np.where(invalid, np.nan, np.imag(g) / (2 * np.pi))
    r2star = np.where(invalid, np.nan, np.real(g))
    return omega_hz, r2star
