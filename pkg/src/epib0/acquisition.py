"""Time-segmented dual-echo EPI acquisition model.

The EPI readout acquires one full k-space line (all kx samples of one ky
row) per line time ``dt``.  Line ``l`` (1-indexed, array row ``l-1``) of the
first echo is acquired at ``t = l*dt``; the second echo repeats the readout
delayed by ``m_delay`` line times.  Segmenting both readouts into blocks of
``k_seg`` lines and treating the decay as constant per segment turns the
acquisition into a masked multi-frame Fourier model: the combined volume has
``M = n/k_seg + m_delay/k_seg`` frames and frame ``n`` (1-indexed) sits at
``t = n * k_seg * dt``.

Image series are plain complex arrays of shape (n_frames, ny, nx); a
per-pixel exponential parameterization is the pair ``(alpha, beta)`` with
``series[n] = alpha * beta**(n+1)`` (frame numbers start at 1, so ``alpha``
is the extrapolation to ``t = 0``).
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .fourier import fft2, fft2_adjoint


@dataclass(frozen=True)
class AcqParams:
    """Sampling geometry of a time-segmented dual-echo EPI acquisition.

    Parameters
    ----------
    n_grid : int
        Grid size N (lines and samples per line).
    k_seg : int
        k-space lines per time segment.
    m_delay : int
        Echo-time shift of the second readout, in line times.
    dt : float
        Time to acquire one k-space line, in seconds.
    """

    n_grid: int
    k_seg: int
    m_delay: int
    dt: float

    def __post_init__(self):
        if self.n_grid < 1 or self.k_seg < 1:
            raise ParameterError("n_grid and k_seg must be positive")
        if self.dt <= 0:
            raise ParameterError(f"dt must be positive, got {self.dt}")
        if self.m_delay < 0:
            raise ParameterError("m_delay must be nonnegative")
        if self.n_grid % self.k_seg:
            raise ParameterError(
                f"n_grid={self.n_grid} not divisible by k_seg={self.k_seg}"
            )
        if self.m_delay % self.k_seg:
            raise ParameterError(
                f"m_delay={self.m_delay} not divisible by k_seg={self.k_seg}"
            )

    @property
    def n_frames(self):
        """Combined frame count M = N/k + m/k."""
        return self.n_grid // self.k_seg + self.m_delay // self.k_seg

    @property
    def seg_dt(self):
        """Duration of one segment (frame spacing), seconds."""
        return self.k_seg * self.dt

    def line_times(self, echo):
        """Acquisition times of the N lines of one echo (echo in {1, 2})."""
        offset = 0 if echo == 1 else self.m_delay
        return (np.arange(1, self.n_grid + 1) + offset) * self.dt

    def retier(self, k_seg):
        """Same acquisition re-segmented with a different segment length."""
        return AcqParams(self.n_grid, k_seg, self.m_delay, self.dt)


@dataclass(frozen=True)
class SamplingMask:
    """Per-frame line occupancy of the combined dual-echo volume.

    ``lines1``/``lines2`` are (n_frames, n_grid) booleans marking which ky
    lines of each frame were measured by echo 1 / echo 2.  Lines are atomic:
    a measured line contains all nx samples.
    """

    params: AcqParams
    lines1: np.ndarray = field(repr=False)
    lines2: np.ndarray = field(repr=False)

    @property
    def n_frames(self):
        return self.lines1.shape[0]

    @property
    def union_lines(self):
        """(n_frames, n_grid) bool, measured by either echo."""
        return self.lines1 | self.lines2

    @property
    def mask3d(self):
        """(n_frames, ny, nx) bool over full k-space sample positions."""
        n = self.params.n_grid
        return np.repeat(self.union_lines[:, :, None], n, axis=2)

    def frame_mask(self, f):
        """(ny, nx) bool for 0-indexed frame f."""
        n = self.params.n_grid
        return np.repeat(self.union_lines[f][:, None], n, axis=1)


def build_masks(params, frames="combined"):
    """Assign each acquired line of both echoes to its time-segment frame.

    Line ``l`` of echo 1 lands in frame number ``ceil(l/k)``; the same line
    of echo 2 is acquired ``m_delay`` line times later and lands in frame
    ``ceil((l+m)/k)``.  Under the default ``frames="combined"`` convention
    the volume holds every line of both echoes (M = N/k + m/k frames);
    ``frames="per-dataset"`` keeps only the first N/k frames and drops
    echo-2 lines falling beyond them.

    Returns
    -------
    SamplingMask
    """
    n, k, m = params.n_grid, params.k_seg, params.m_delay
    if frames not in ("combined", "per-dataset"):
        raise ParameterError(f"unknown frame convention {frames!r}")
    n_frames = params.n_frames if frames == "combined" else n // k

    rows = np.arange(n)
    f1 = rows // k
    f2 = (rows + m) // k

    lines1 = np.zeros((n_frames, n), dtype=bool)
    lines2 = np.zeros((n_frames, n), dtype=bool)
    lines1[f1, rows] = True
    keep = f2 < n_frames
    lines2[f2[keep], rows[keep]] = True
    return SamplingMask(params, lines1, lines2)


@dataclass
class KTVolume:
    """Combined k-t volume: dense (n_frames, ny, nx) samples plus its mask.

    Unmeasured entries are stored as zeros unless the volume was completed
    by a solver; the mask is the source of truth for what was measured.
    """

    data: np.ndarray
    mask: SamplingMask

    def __post_init__(self):
        expected = (self.mask.n_frames, self.mask.params.n_grid, self.mask.params.n_grid)
        if self.data.shape != expected:
            raise ParameterError(
                f"volume shape {self.data.shape} does not match mask {expected}"
            )
        if not np.all(np.isfinite(self.data[self.mask.mask3d])):
            raise ParameterError("measured k-space entries must be finite")

    @property
    def params(self):
        return self.mask.params

    def measured(self):
        """Copy of the volume with unmeasured entries zeroed."""
        return np.where(self.mask.mask3d, self.data, 0.0 + 0.0j)


def combine_dual_echo(kspace1, kspace2, params, k_seg=None):
    """Bin two single-shot echoes into the combined k-t volume.

    Parameters
    ----------
    kspace1, kspace2 : (n, n) complex
        Full k-space of each echo (line l in array row l-1).
    params : AcqParams
    k_seg : int, optional
        Segment length of the target tier; defaults to ``params.k_seg``.

    Lines assigned to the same (frame, row) slot by both echoes (only
    possible for m_delay = 0) are averaged.
    """
    p = params if k_seg is None else params.retier(k_seg)
    smask = build_masks(p)
    n = p.n_grid
    data = np.zeros((p.n_frames, n, n), dtype=complex)
    count = np.zeros((p.n_frames, n))
    rows = np.arange(n)
    f1 = rows // p.k_seg
    f2 = (rows + p.m_delay) // p.k_seg
    np.add.at(data, (f1, rows), kspace1)
    np.add.at(data, (f2, rows), kspace2)
    np.add.at(count, (f1, rows), 1.0)
    np.add.at(count, (f2, rows), 1.0)
    nz = count > 0
    data[nz] /= count[nz][:, None]
    return KTVolume(data, smask)


def forward(series, smask):
    """Masked per-frame Fourier transform of an image series.

    Returns the dense (n_frames, ny, nx) sample array with zeros at
    unmeasured positions.
    """
    if series.shape[0] != smask.n_frames:
        raise ParameterError(
            f"series has {series.shape[0]} frames, mask {smask.n_frames}"
        )
    return fft2(series) * smask.mask3d


def adjoint(data, smask):
    """Adjoint of :func:`forward`: unnormalized inverse DFT of masked data."""
    if data.shape[0] != smask.n_frames:
        raise ParameterError(
            f"data has {data.shape[0]} frames, mask {smask.n_frames}"
        )
    return fft2_adjoint(data * smask.mask3d)


def exp_series(alpha, beta, n_frames):
    """Image series ``alpha * beta**n`` for frame numbers n = 1..n_frames."""
    series = np.empty((n_frames,) + alpha.shape, dtype=complex)
    power = beta.astype(complex, copy=True)
    for f in range(n_frames):
        series[f] = alpha * power
        if f + 1 < n_frames:
            power = power * beta
    return series


def forward_exp(alpha, beta, smask):
    """Forward model of the exponential parameterization (linear in alpha)."""
    return forward(exp_series(alpha, beta, smask.n_frames), smask)


def adjoint_exp(data, beta, smask):
    """Adjoint of :func:`forward_exp` in alpha at fixed beta."""
    frames = fft2_adjoint(data * smask.mask3d)
    out = np.zeros(data.shape[-2:], dtype=complex)
    power = beta.astype(complex, copy=True)
    for f in range(smask.n_frames):
        out += np.conj(power) * frames[f]
        if f + 1 < smask.n_frames:
            power = power * beta
    return out
