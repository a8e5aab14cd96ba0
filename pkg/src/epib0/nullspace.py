"""Annihilating-filter estimation from the lifted k-t volume.

Three routes to the per-pixel exponential parameters:

* a weighted null-space basis of the calibration Gram matrix (soft
  weighting by ``eigenvalue**(-q/2)`` instead of a rank threshold),
* a single smoothness-regularized filter (minimum eigenvector of the Gram
  plus a spatial-frequency penalty),
* Schatten-p IRLS denoising of the measured volume followed by per-pixel
  extraction from the weighted eigenvector matrix.
"""

from dataclasses import dataclass, field

import numpy as np

from .acquisition import KTVolume
from .cg import cg_solve
from .errors import ParameterError
from .fourier import fft2, ifft2
from .lifting import filter_image_patterns, gram, gram_full, interior_mask
from .maps import BetaMap, principal_root

EIG_FLOOR_REL = 1e-12  # eigenvalue floor, relative to lambda_max


@dataclass
class NullspaceBasis:
    """Weighted eigenvector matrix D = V Q of a calibration Gram matrix.

    Columns are ordered by ascending eigenvalue, i.e. the most strongly
    weighted (null-most) directions come first.
    """

    matrix: np.ndarray
    eigenvectors: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    q: float = 0.25


def _check_hermitian(R):
    scale = np.linalg.norm(R)
    if scale > 0 and np.linalg.norm(R - R.conj().T) > 1e-10 * scale:
        raise ParameterError("Gram matrix must be Hermitian")


def weighted_nullspace(R, q=0.25, floor_rel=EIG_FLOOR_REL):
    """Soft null-space basis of a Hermitian PSD Gram matrix.

    Eigendecomposes ``R = V diag(lam) V^H`` and weights each eigenvector by
    ``(lam + floor)**(-q/2)`` so that small-eigenvalue (null space)
    directions dominate without any hard rank threshold.
    """
    if not 0 < q <= 0.5:
        raise ParameterError(f"q must lie in (0, 0.5], got {q}")
    _check_hermitian(R)
    lam, V = np.linalg.eigh(R)  # ascending: null-most directions first
    lam = np.clip(lam, 0.0, None)
    floor = floor_rel * (lam[-1] if lam[-1] > 0 else 1.0)
    weights = (lam + floor) ** (-q / 2)
    return NullspaceBasis(V * weights, V, lam, weights, q)


def smoothness_penalty(spec):
    """Diagonal spatial-frequency penalty |k| per filter tap.

    Penalizing ``sum |k|^2 |d[k]|^2`` equals the squared gradient norm of
    the filter's image-domain pattern.
    """
    kx, ky = spec.spatial_coords()
    return np.sqrt(kx.astype(float) ** 2 + ky.astype(float) ** 2)


def estimate_filter_smooth(Ts, spec, mu0=1e-5):
    """Single annihilating filter with the smoothest image-domain pattern.

    Returns the unit-norm minimum eigenvector of ``Ts^H Ts + mu0_eff C^H C``
    with ``C = diag(sqrt(kx^2 + ky^2))``.  ``mu0`` is dimensionless: the
    penalty is scaled by the Gram's largest eigenvalue so the estimate is
    invariant to a rescaling of the data.  The global phase is fixed by
    making the largest-magnitude tap real positive.
    """
    if Ts.shape[0] == 0:
        raise ParameterError("empty calibration matrix")
    if mu0 < 0:
        raise ParameterError("mu0 must be nonnegative")
    R = gram(Ts)
    lam_max = float(np.linalg.eigvalsh(R)[-1])
    c = smoothness_penalty(spec)
    G = R + (mu0 * lam_max) * np.diag(c**2)
    lam, V = np.linalg.eigh(G)
    d = V[:, 0]
    pivot = np.argmax(np.abs(d))
    d = d * (np.conj(d[pivot]) / np.abs(d[pivot]))
    return d


def extract_pixel_filters(matrix, spec, n_grid, n_columns=None):
    """Per-pixel two-tap filter bank from a weighted basis matrix.

    Zero-padded inverse Fourier transform of the first ``n_columns`` columns
    (most strongly weighted first).  Column patterns satisfy Parseval with
    the grid factor: ``sum_r |mu|^2 = n^2 * sum_k |d|^2``.

    Returns
    -------
    PixelFilterMatrix with taps of shape (ny, nx, 2, L).
    """
    mat = matrix.matrix if isinstance(matrix, NullspaceBasis) else matrix
    if n_columns is None:
        n_columns = min(2 * spec.size, mat.shape[1])
    cols = mat[:, :n_columns]
    mu = filter_image_patterns(cols, spec, n_grid)  # (L, 2, ny, nx)
    return PixelFilterMatrix(np.ascontiguousarray(mu.transpose(2, 3, 1, 0)))


@dataclass
class PixelFilterMatrix:
    """Spatial-domain filter taps d_i[r, 0..1]: array (ny, nx, 2, L)."""

    taps: np.ndarray

    @property
    def n_filters(self):
        return self.taps.shape[-1]


def beta_from_pixel_filters(pfm, k_delay, frame_dt, tau=0.2,
                            background_beta=0.5):
    """Per-pixel exponential parameter from the filter bank's rank structure.

    Where the 2 x L tap matrix is effectively rank one (singular ratio
    below ``tau``) all filters share one annihilating direction (u0, u1);
    the frame ratio is ``-u1/u0`` and beta is its principal ``k_delay``-th
    root.  Rank-two pixels carry no signal and get the background constant.
    """
    t = pfm.taps
    a = np.einsum("yxl,yxl->yx", t[:, :, 0], np.conj(t[:, :, 0])).real
    d = np.einsum("yxl,yxl->yx", t[:, :, 1], np.conj(t[:, :, 1])).real
    c = np.einsum("yxl,yxl->yx", t[:, :, 0], np.conj(t[:, :, 1]))
    tr = a + d
    disc = np.sqrt(np.clip((a - d) ** 2 / 4 + np.abs(c) ** 2, 0.0, None))
    lam1 = tr / 2 + disc
    lam2 = np.clip(tr / 2 - disc, 0.0, None)

    scale = lam1.max()
    ok = lam1 > 1e-15 * max(scale, 1e-300)
    ratio = np.ones_like(lam1)
    np.divide(np.sqrt(lam2), np.sqrt(lam1), out=ratio, where=ok)

    # Dominant eigenvector of [[a, c], [conj(c), d]]: (c, lam1 - a) from the
    # first row or (lam1 - d, conj(c)) from the second; pick the numerically
    # safer construction per pixel.
    use_first = np.abs(lam1 - a) >= np.abs(lam1 - d)
    u0 = np.where(use_first, c, lam1 - d)
    u1 = np.where(use_first, lam1 - a, np.conj(c))
    norm = np.sqrt(np.abs(u0) ** 2 + np.abs(u1) ** 2)
    tiny = norm <= 1e-15 * np.sqrt(max(scale, 1e-300))

    background = (~ok) | tiny | (ratio >= tau)
    background |= np.abs(u0) <= 1e-6 * norm
    safe_u0 = np.where(background, 1.0, u0)
    beta = principal_root(-u1 / safe_u0, k_delay)
    beta = np.where(background, background_beta, beta)
    return BetaMap(values=beta, frame_dt=frame_dt, background=background)


def _normal_operator(mask3d, spec, sqrt_w, gamma0_eff, box, delta):
    """mask*x + (gamma0_eff/2) * sum_i Lw_i^H Lw_i x, with patterns reused."""
    n = mask3d.shape[-1]
    mu = filter_image_patterns(sqrt_w, spec, n)

    def apply_op(x):
        u = ifft2(x)
        acc = np.zeros_like(u)
        cur = u[delta:]
        prev = u[: u.shape[0] - delta]
        for i in range(mu.shape[0]):
            w = mu[i, 0] * cur + mu[i, 1] * prev
            z = ifft2(fft2(w) * box)
            acc[delta:] += np.conj(mu[i, 0]) * z
            acc[: u.shape[0] - delta] += np.conj(mu[i, 1]) * z
        return mask3d * x + (gamma0_eff / 2) * fft2(acc)

    return apply_op


def irls_denoise(vol, spec, gamma0=1.0, p=0.5, n_outer=10, eps0_rel=1e-2,
                 eps_ratio=0.2, cg_iters=12, cg_tol=1e-8):
    """Schatten-p denoising/completion of the measured k-t volume.

    Alternates the weight update ``W = (R + eps I)**(p/2 - 1)`` (R the Gram
    of the current volume's lift) with a CG solve of the quadratic
    ``||mask x - b||^2 + (gamma0_eff/2) ||T(x) sqrt(W)||_F^2``, warm-started
    so the smoothed objective ``||mask x - b||^2 + gamma0_eff/p *
    sum (lam_i + eps)**(p/2)`` never increases while eps is lowered
    geometrically.  ``gamma0`` is dimensionless; it is rescaled once (from
    the initial weights) so the regularizer's trace matches the unit data
    term.

    Parameters
    ----------
    vol : KTVolume or list of KTVolume
        Multi-coil volumes share weights (their Grams are summed) and are
        solved independently.

    Returns
    -------
    out : KTVolume or list of KTVolume
        Completed volume(s); measured entries stay close to the data.
    info : dict
        ``objective`` (per-outer smoothed objective, non-increasing),
        ``epsilons``, ``sqrt_w``/``eigenvalues`` of the final completed
        volume, ``gamma0_eff``, and per-outer CG diagnostics.
    """
    single = isinstance(vol, KTVolume)
    vols = [vol] if single else list(vol)
    if not 0 < p <= 1:
        raise ParameterError(f"Schatten exponent p must lie in (0, 1], got {p}")
    if gamma0 < 0:
        raise ParameterError("gamma0 must be nonnegative")

    masks = [v.mask.mask3d for v in vols]
    bs = [v.measured() for v in vols]
    if gamma0 == 0:
        outs = [KTVolume(b.copy(), v.mask) for b, v in zip(bs, vols)]
        info = {"objective": [], "epsilons": [], "sqrt_w": None,
                "eigenvalues": None, "gamma0_eff": 0.0, "cg": []}
        return (outs[0], info) if single else (outs, info)

    delta = spec.delta
    n = vols[0].params.n_grid
    box = interior_mask(spec, n)
    xs = [b.copy() for b in bs]

    def spectrum(datas):
        R = np.zeros((spec.size, spec.size), dtype=complex)
        for d in datas:
            R += gram_full(d, spec)
        lam, V = np.linalg.eigh(R)
        return np.clip(lam, 0.0, None), V

    lam, V = spectrum(xs)
    lam_max0 = lam[-1] if lam[-1] > 0 else 1.0
    eps0 = eps0_rel * lam_max0
    n_entries = sum(b.size for b in bs)

    # One-time balance of the regularizer against the unit data term.
    n_rows = (vols[0].mask.n_frames - delta) * (n - spec.fy + 1) * (n - spec.fx + 1)
    trace0 = n_rows * np.sum((lam + eps0) ** ((p - 2) / 2)) * len(vols)
    gamma0_eff = gamma0 * n_entries / trace0

    objective = []
    epsilons = []
    cg_infos = []
    eps = eps0
    for t in range(n_outer):
        eps = max(eps0 * eps_ratio**t, EIG_FLOOR_REL * lam_max0)
        epsilons.append(eps)
        sqrt_w = V * (lam + eps) ** ((p - 2) / 4)
        for j, (b, mask3d) in enumerate(zip(bs, masks)):
            op = _normal_operator(mask3d, spec, sqrt_w, gamma0_eff, box, delta)
            xs[j], cg_info = cg_solve(op, b, x0=xs[j], max_iter=cg_iters,
                                      tol=cg_tol)
            cg_infos.append(cg_info)
        lam, V = spectrum(xs)
        data_term = sum(
            float(np.linalg.norm(mask3d * x - b) ** 2)
            for x, b, mask3d in zip(xs, bs, masks)
        )
        objective.append(
            data_term + gamma0_eff / p * float(np.sum((lam + eps) ** (p / 2)))
        )

    sqrt_w = V * (lam + eps) ** ((p - 2) / 4)
    info = {
        "objective": objective,
        "epsilons": epsilons,
        "sqrt_w": sqrt_w,
        "eigenvalues": lam,
        "gamma0_eff": gamma0_eff,
        "cg": cg_infos,
    }
    outs = [KTVolume(x, v.mask) for x, v in zip(xs, vols)]
    return (outs[0], info) if single else (outs, info)
