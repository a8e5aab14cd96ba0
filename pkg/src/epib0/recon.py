"""Distortion-free image recovery from an estimated annihilating filter.

The full pipeline: bin both echoes onto a coarse calibration tier whose
segment length equals the echo delay (so fully sampled lift rows exist),
estimate a filter there (smoothness- or low-rank path), convert the
two-tap ratio to the per-line-time beta map by the principal-root rule,
then solve the regularized least squares for the corrected image on the
fine tier (one line per segment).
"""

import time
from dataclasses import dataclass, field

import numpy as np

from . import nullspace
from .acquisition import (
    adjoint_exp,
    build_masks,
    combine_dual_echo,
    exp_series,
    forward_exp,
)
from .cg import cg_solve
from .errors import ParameterError
from .fourier import fft2, fft2_adjoint
from .lifting import FilterSpec, build_Ts, filter_image_patterns
from .maps import BetaMap, beta_to_maps, principal_root


@dataclass
class ReconResult:
    """Corrected image plus estimated maps and solver diagnostics.

    ``alpha`` is the decay-free amplitude (extrapolation to t = 0);
    ``rho1 = alpha * beta`` is the first frame of the recovered series.
    """

    alpha: np.ndarray
    rho1: np.ndarray
    beta: BetaMap
    omega_hz: np.ndarray
    r2star: np.ndarray
    method: str
    cg_iterations: int
    cg_residual: float
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class CorrectConfig:
    """Tuning knobs of :func:`correct`; defaults are the committed values."""

    method: str = "smoothness"  # smoothness | lowrank
    filter_fx: int = 11
    filter_fy: int = 11  # clamped to the calibration segment length
    mu0: float = 1e-5
    q: float = 0.25
    n_columns: int = 0  # 0 -> all weighted columns
    tau: float = 0.2
    background_beta: float = 0.5
    gamma0: float = 1.0
    schatten_p: float = 0.5
    irls_outer: int = 10
    irls_cg_iters: int = 12
    eps_rel: float = 1e-2  # ridge damping the weakly determined modes
    solve_max_iter: int = 150
    solve_tol: float = 1e-10
    beta_guard: float = 1e-6


def filter_to_beta(d_hat, spec, n_grid, k_delay, frame_dt, guard=1e-6,
                   background_beta=0.5):
    """Beta map of a single annihilating filter.

    Zero-pads the filter to the grid, inverse-transforms each temporal tap
    to get (mu1, mu2), and evaluates ``beta = (-mu2/mu1)**(1/k_delay)`` with
    the principal branch (phase in (-pi/k, pi/k]).  Pixels where ``|mu1|``
    falls below ``guard * max|mu1|`` are marked background.
    """
    mu = filter_image_patterns(d_hat, spec, n_grid)
    mu1, mu2 = mu[0], mu[1]
    lim = guard * np.abs(mu1).max()
    background = np.abs(mu1) <= lim
    safe = np.where(background, 1.0, mu1)
    beta = principal_root(-mu2 / safe, k_delay)
    beta = np.where(background, background_beta, beta)
    return BetaMap(values=beta, frame_dt=frame_dt, background=background)


def solve_alpha(data, beta, smask, eps_rel=1e-6, max_iter=120, tol=1e-9,
                x0=None, eps_abs=None):
    """Least-squares amplitude image for a fixed beta map, by CG.

    Minimizes ``||forward_exp(alpha, beta) - b||^2 + eps ||alpha||^2`` via
    the normal equations.  ``eps_rel`` is dimensionless: it is scaled by the
    mean diagonal of the normal operator, which plays the role of a
    data-magnitude-relative ridge.  Passing ``eps_abs`` uses that absolute
    ridge weight instead.

    Returns
    -------
    alpha : (ny, nx) complex
    info : dict with CG iteration count and final relative residual.
    """
    values = beta.values if isinstance(beta, BetaMap) else beta
    if not np.all(np.isfinite(values)):
        raise ParameterError("beta map must be finite")
    lines_per_frame = smask.union_lines.sum(axis=1)
    n = smask.params.n_grid
    # diag(A^H A)(r) = sum_n measured_lines(n) * n * |beta(r)|^(2n)
    mag2 = np.abs(values) ** 2
    diag = np.zeros_like(mag2)
    power = mag2.copy()
    for f in range(smask.n_frames):
        diag += (lines_per_frame[f] * n) * power
        if f + 1 < smask.n_frames:
            power = power * mag2
    eps_eff = float(eps_abs) if eps_abs is not None else eps_rel * float(diag.mean())

    # The power stack and mask are fixed for the whole solve.
    powers = exp_series(np.ones_like(values), values, smask.n_frames)
    mask3d = smask.mask3d
    rhs = np.einsum("fyx,fyx->yx", np.conj(powers), fft2_adjoint(data * mask3d))

    # Jacobi preconditioning: |beta|^(2n) spans orders of magnitude between
    # decaying foreground and the constant background, which otherwise
    # cripples the Krylov solver.
    scale = 1.0 / np.sqrt(diag + eps_eff)

    def whitened_op(z):
        x = scale * z
        samples = fft2(x[None] * powers) * mask3d
        y = np.einsum("fyx,fyx->yx", np.conj(powers), fft2_adjoint(samples))
        return scale * (y + eps_eff * x)

    z, info = cg_solve(whitened_op, scale * rhs, x0=None if x0 is None else x0 / scale,
                       max_iter=max_iter, tol=tol)
    info["eps_eff"] = eps_eff
    return scale * z, info


def _sos(images):
    return np.sqrt(np.sum(np.abs(np.asarray(images)) ** 2, axis=0))


def estimate_beta(kspace1, kspace2, params, config):
    """Calibration-tier filter estimation shared by both proposed paths.

    Returns the fine-tier (per line time) BetaMap and a diagnostics dict.
    """
    if params.m_delay < 1:
        raise ParameterError("dual-echo calibration needs m_delay >= 1")
    k_cal = params.m_delay
    k1 = np.atleast_3d(kspace1).reshape((-1,) + kspace1.shape[-2:])
    k2 = np.atleast_3d(kspace2).reshape((-1,) + kspace2.shape[-2:])
    cal_vols = [
        combine_dual_echo(k1[c], k2[c], params, k_seg=k_cal)
        for c in range(k1.shape[0])
    ]

    fy = min(config.filter_fy, k_cal)
    fx = min(config.filter_fx, params.n_grid)
    spec = FilterSpec(fx=fx, fy=fy, delta=1)
    diags = {"filter": (fx, fy), "k_cal": k_cal}

    t0 = time.perf_counter()
    if config.method == "smoothness":
        Ts = build_Ts(cal_vols if len(cal_vols) > 1 else cal_vols[0], spec)
        d_hat = nullspace.estimate_filter_smooth(Ts, spec, mu0=config.mu0)
        beta = filter_to_beta(
            d_hat, spec, params.n_grid, k_delay=params.m_delay,
            frame_dt=params.dt, guard=config.beta_guard,
            background_beta=config.background_beta,
        )
        diags["n_rows"] = Ts.shape[0]
    elif config.method == "lowrank":
        denoised, irls_info = nullspace.irls_denoise(
            cal_vols, spec, gamma0=config.gamma0, p=config.schatten_p,
            n_outer=config.irls_outer, cg_iters=config.irls_cg_iters,
        )
        n_cols = config.n_columns if config.n_columns > 0 else None
        pfm = nullspace.extract_pixel_filters(
            irls_info["sqrt_w"], spec, params.n_grid, n_columns=n_cols
        )
        beta = nullspace.beta_from_pixel_filters(
            pfm, k_delay=params.m_delay, frame_dt=params.dt, tau=config.tau,
            background_beta=config.background_beta,
        )
        diags["irls_objective"] = irls_info["objective"]
        diags["denoise_seconds"] = time.perf_counter() - t0
    else:
        raise ParameterError(f"unknown method {config.method!r}")
    diags["calibration_seconds"] = time.perf_counter() - t0
    return beta, diags


def correct(kspace1, kspace2, params, config=None):
    """Full correction: calibrate the beta map, then recover alpha at k = 1.

    Parameters
    ----------
    kspace1, kspace2 : (n, n) or (n_coils, n, n) complex
        Dual-echo single-shot k-space.
    params : AcqParams
        Geometry at any tier; the recovery tier is always one line per
        segment and the calibration tier one echo delay per segment.
    config : CorrectConfig, optional

    Returns
    -------
    ReconResult
    """
    config = config or CorrectConfig()
    t_start = time.perf_counter()
    beta, diags = estimate_beta(kspace1, kspace2, params, config)

    omega_hz, r2star = beta_to_maps(beta)

    # Magnitudes above one grow over the frame series; clamp the solver's
    # copy (background/guarded pixels only, in practice) but report the
    # estimate untouched.
    values = beta.values
    mag = np.abs(values)
    solver_beta = np.where(mag > 1.0, values / mag, values)

    fine = params.retier(1)
    smask = build_masks(fine)
    k1 = np.atleast_3d(kspace1).reshape((-1,) + kspace1.shape[-2:])
    k2 = np.atleast_3d(kspace2).reshape((-1,) + kspace2.shape[-2:])
    t_solve = time.perf_counter()
    alphas = []
    iters, resid = 0, 0.0
    for c in range(k1.shape[0]):
        vol = combine_dual_echo(k1[c], k2[c], fine)
        alpha_c, info = solve_alpha(
            vol.data, solver_beta, smask, eps_rel=config.eps_rel,
            max_iter=config.solve_max_iter, tol=config.solve_tol,
        )
        alphas.append(alpha_c)
        iters = max(iters, info["iterations"])
        resid = max(resid, info["residual"])

    alpha = alphas[0] if len(alphas) == 1 else _sos(alphas).astype(complex)
    diags["solve_seconds"] = time.perf_counter() - t_solve
    diags["total_seconds"] = time.perf_counter() - t_start
    diags["n_coils"] = k1.shape[0]
    return ReconResult(
        alpha=alpha,
        rho1=alpha * beta.values,
        beta=beta,
        omega_hz=omega_hz,
        r2star=r2star,
        method=config.method,
        cg_iterations=iters,
        cg_residual=resid,
        diagnostics=diags,
    )
