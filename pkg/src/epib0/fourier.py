"""Project-wide discrete Fourier transform conventions.

All k-space arrays follow numpy FFT index ordering (DC at index 0) with
shape (..., ny, nx); nx (axis -1) is the frequency-encode direction and is
fastest-varying in memory, ny (axis -2) indexes phase-encode lines.

The forward transform is the unnormalized DFT, so a unit impulse image maps
to unit-magnitude samples.  The inverse carries the 1/(ny*nx) factor.  The
adjoint of the forward transform is therefore ny*nx times the inverse; both
are provided so linear operators built on top satisfy exact adjoint
identities.
"""

import numpy as np

AXES = (-2, -1)


def fft2(x):
    """Unnormalized forward 2-D DFT over the trailing two axes."""
    return np.fft.fft2(x, axes=AXES)


def ifft2(x):
    """Inverse 2-D DFT (with the 1/(ny*nx) factor) over the trailing axes."""
    return np.fft.ifft2(x, axes=AXES)


def fft2_adjoint(y):
    """Adjoint of :func:`fft2`, i.e. the unnormalized inverse DFT."""
    n = y.shape[-2] * y.shape[-1]
    return np.fft.ifft2(y, axes=AXES) * n
