"""Multi-fold Toeplitz lifting of the combined k-t volume.

A row of the lift gathers one Lambda-shaped neighborhood of k-space samples
(fx x fy spatial taps at two temporal taps, ``delta`` frames apart), so that
the matrix-vector product with a vectorized filter realizes the valid-region
3-D convolution of the volume with that filter.  The calibration submatrix
keeps only rows whose entire neighborhood was measured.

Column ordering of the vectorized filter is fixed project-wide: kx fastest,
then ky, then the temporal tap (offset 0 first, then offset delta).  Spatial
tap offsets are centered, ``arange(f) - f//2``.

The operator forms (:func:`lift_apply` / :func:`lift_adjoint`) evaluate the
convolutions via FFTs so the lift is never materialized on the recovery
path; the dense constructors exist for calibration and for tests.
"""

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import FilterTooLargeError, ParameterError
from .fourier import fft2, ifft2


@dataclass(frozen=True)
class FilterSpec:
    """Support of an annihilating filter: fx x fy spatial taps, two temporal
    taps at frame offsets (0, delta)."""

    fx: int
    fy: int
    delta: int = 1

    def __post_init__(self):
        if self.fx < 1 or self.fy < 1:
            raise ParameterError("filter extents must be positive")
        if self.delta < 1:
            raise ParameterError("temporal tap gap must be >= 1")

    @property
    def size(self):
        """Number of taps |Lambda| = fx*fy*2."""
        return self.fx * self.fy * 2

    @property
    def x_offsets(self):
        return np.arange(self.fx) - self.fx // 2

    @property
    def y_offsets(self):
        return np.arange(self.fy) - self.fy // 2

    def spatial_coords(self):
        """(|Lambda|,) kx and ky integer coordinates of every tap."""
        kx = np.tile(self.x_offsets, self.fy * 2)
        ky = np.tile(np.repeat(self.y_offsets, self.fx), 2)
        return kx, ky

    def check_grid(self, n_grid, n_frames):
        if self.fx > n_grid or self.fy > n_grid:
            raise ParameterError(
                f"filter {self.fx}x{self.fy} exceeds grid {n_grid}"
            )
        if self.delta >= n_frames:
            raise ParameterError(
                f"temporal gap {self.delta} needs more than {n_frames} frames"
            )


def interior_slices(spec, n_grid):
    """Spatial slice of convolution outputs whose taps stay inside the grid."""
    ys = slice(spec.y_offsets.max(), spec.y_offsets.max() + n_grid - spec.fy + 1)
    xs = slice(spec.x_offsets.max(), spec.x_offsets.max() + n_grid - spec.fx + 1)
    return ys, xs


def interior_mask(spec, n_grid):
    """(ny, nx) bool of geometrically valid convolution outputs."""
    m = np.zeros((n_grid, n_grid), dtype=bool)
    ys, xs = interior_slices(spec, n_grid)
    m[ys, xs] = True
    return m


def valid_rows(smask, spec):
    """Convolution-output positions whose full neighborhood was measured.

    Computed from the union mask over both echoes, so filter placements that
    straddle the two interleaved readouts are found automatically.

    Returns
    -------
    (n_rows, 3) int array of (frame, ky, kx) output positions (0-indexed).

    Raises
    ------
    FilterTooLargeError
        If no fully sampled rows exist (filter too large for the sampling
        pattern: shrink fy or coarsen the calibration segmentation).
    """
    n = smask.params.n_grid
    spec.check_grid(n, smask.n_frames)
    windows = sliding_window_view(smask.mask3d, (spec.fy, spec.fx), axis=(1, 2))
    ok = windows.all(axis=(-2, -1))  # (M, ny-fy+1, nx-fx+1)
    valid = ok[spec.delta:] & ok[: smask.n_frames - spec.delta]
    fr, iy, ix = np.nonzero(valid)
    if fr.size == 0:
        raise FilterTooLargeError(
            f"no fully sampled rows for filter {spec.fx}x{spec.fy}x2 "
            f"(delta={spec.delta}) on this sampling pattern"
        )
    return np.column_stack(
        [fr + spec.delta, iy + spec.y_offsets.max(), ix + spec.x_offsets.max()]
    )


def _gather_rows(data, spec, positions):
    """Rows of the lift of ``data`` at the given output positions."""
    windows = sliding_window_view(data, (spec.fy, spec.fx), axis=(1, 2))
    fr = positions[:, 0]
    sy = positions[:, 1] - spec.y_offsets.max()
    sx = positions[:, 2] - spec.x_offsets.max()
    # A window ascends in array index while the convolution gather descends,
    # hence the double flip before vectorizing (kx fastest, then ky).
    tap0 = windows[fr, sy, sx][:, ::-1, ::-1].reshape(len(positions), -1)
    tap1 = windows[fr - spec.delta, sy, sx][:, ::-1, ::-1].reshape(len(positions), -1)
    return np.hstack([tap0, tap1])


def build_Ts(vol, spec):
    """Dense fully-sampled-row submatrix of the lift.

    Parameters
    ----------
    vol : KTVolume or sequence of KTVolume
        Multi-coil volumes (sharing one mask) are stacked vertically.
    spec : FilterSpec

    Returns
    -------
    (n_rows, |Lambda|) complex matrix.
    """
    vols = vol if isinstance(vol, (list, tuple)) else [vol]
    positions = valid_rows(vols[0].mask, spec)
    return np.vstack([_gather_rows(v.data, spec, positions) for v in vols])


def gram(Ts):
    """Gram matrix Ts^H Ts (Hermitian PSD, |Lambda| x |Lambda|)."""
    return Ts.conj().T @ Ts


def gram_full(data, spec):
    """Gram of the full lift of a dense volume, accumulated frame by frame."""
    n_frames, n = data.shape[0], data.shape[1]
    spec.check_grid(n, n_frames)
    windows = sliding_window_view(data, (spec.fy, spec.fx), axis=(1, 2))
    s = spec.size
    R = np.zeros((s, s), dtype=complex)
    half = spec.fx * spec.fy
    for f in range(spec.delta, n_frames):
        T = np.empty((windows.shape[1] * windows.shape[2], s), dtype=complex)
        T[:, :half] = windows[f][:, :, ::-1, ::-1].reshape(-1, half)
        T[:, half:] = windows[f - spec.delta][:, :, ::-1, ::-1].reshape(-1, half)
        R += T.conj().T @ T
    return R


def filter_image_patterns(filters, spec, n_grid):
    """Image-domain patterns of vectorized filters.

    Zero-pads each filter onto the full grid and evaluates
    ``mu(r) = sum_k d[k] exp(+2j*pi*k.r/n)`` per temporal tap, which is the
    pointwise multiplier realizing the k-space convolution.

    Parameters
    ----------
    filters : (|Lambda|,) or (|Lambda|, L) complex
    spec : FilterSpec
    n_grid : int

    Returns
    -------
    (2, n, n) or (L, 2, n, n) complex patterns.
    """
    single = filters.ndim == 1
    d = filters[:, None] if single else filters
    if d.shape[0] != spec.size:
        raise ParameterError(
            f"filter length {d.shape[0]} != |Lambda| = {spec.size}"
        )
    L = d.shape[1]
    taps = d.T.reshape(L, 2, spec.fy, spec.fx)
    padded = np.zeros((L, 2, n_grid, n_grid), dtype=complex)
    iy = spec.y_offsets % n_grid
    ix = spec.x_offsets % n_grid
    padded[:, :, iy[:, None], ix[None, :]] = taps
    mu = ifft2(padded) * (n_grid * n_grid)
    return mu[0] if single else mu


def lift_apply(data, spec, filters):
    """Valid-region 3-D convolutions of a dense volume with filter columns.

    Returns the residual volume(s): shape (n_frames, n, n) for a single
    filter or (L, n_frames, n, n) for a filter matrix, zero outside the
    valid region.
    """
    single = filters.ndim == 1
    mu = filter_image_patterns(filters if not single else filters[:, None],
                               spec, data.shape[-1])
    n_frames, n = data.shape[0], data.shape[1]
    spec.check_grid(n, n_frames)
    u = ifft2(data)
    box = interior_mask(spec, n)
    out = np.zeros((mu.shape[0], n_frames, n, n), dtype=complex)
    cur = u[spec.delta:]
    prev = u[: n_frames - spec.delta]
    for i in range(mu.shape[0]):
        w = mu[i, 0] * cur + mu[i, 1] * prev
        out[i, spec.delta:] = fft2(w) * box
    return out[0] if single else out


def lift_adjoint(residuals, spec, filters):
    """Adjoint of :func:`lift_apply` in the volume argument."""
    single = filters.ndim == 1
    res = residuals[None] if single else residuals
    mu = filter_image_patterns(filters if not single else filters[:, None],
                               spec, res.shape[-1])
    L, n_frames, n = res.shape[0], res.shape[1], res.shape[2]
    box = interior_mask(spec, n)
    acc = np.zeros((n_frames, n, n), dtype=complex)
    for i in range(L):
        z = ifft2(res[i, spec.delta:] * box)
        acc[spec.delta:] += np.conj(mu[i, 0]) * z
        acc[: n_frames - spec.delta] += np.conj(mu[i, 1]) * z
    return fft2(acc)
