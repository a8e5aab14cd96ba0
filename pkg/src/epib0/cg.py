"""Conjugate-direction solver for Hermitian positive (semi)definite systems.

Used for the normal equations of the exponential-model least squares and
for the quadratic subproblems of the IRLS denoiser.  The conjugate-residual
update is used rather than textbook CG: for a Hermitian positive definite
operator it minimizes the residual norm over the same Krylov space at the
same cost per iteration, so the residual is non-increasing by construction
(plain CG's 2-norm residual oscillates), and both error norms decrease
monotonically as well, which the warm-started IRLS outer loop relies on.
"""

import numpy as np

from .errors import NumericalError


def _inner(a, b):
    # Real part of the complex inner product; exact for Hermitian operators.
    return float(np.real(np.vdot(a, b)))


def cg_solve(apply_op, rhs, x0=None, max_iter=50, tol=1e-9):
    """Solve ``A x = rhs`` for Hermitian PSD ``A``.

    Parameters
    ----------
    apply_op : callable
        Maps an ndarray to ``A @ x`` (same shape).
    rhs : ndarray
        Right-hand side.
    x0 : ndarray, optional
        Starting point; zeros by default.
    max_iter : int
        Iteration cap.
    tol : float
        Termination on ``||A x - rhs|| <= tol * ||rhs||``.

    Returns
    -------
    x : ndarray
    info : dict
        ``iterations``, ``residual`` (final relative residual) and
        ``residuals`` (per-iteration relative residual norms, non-increasing).

    Raises
    ------
    NumericalError
        If a negative curvature direction is met (operator not PSD).
    """
    rhs_norm = float(np.linalg.norm(rhs))
    if rhs_norm == 0.0:
        x = np.zeros_like(rhs) if x0 is None else x0 * 0
        return x, {"iterations": 0, "residual": 0.0, "residuals": []}

    if x0 is None:
        x = np.zeros_like(rhs)
        r = rhs.copy()
    else:
        x = x0.astype(rhs.dtype, copy=True)
        r = rhs - apply_op(x)

    history = [float(np.linalg.norm(r)) / rhs_norm]
    if history[-1] <= tol:
        return x, {"iterations": 0, "residual": history[-1], "residuals": history}

    p = r.copy()
    ar = apply_op(r)
    ap = ar.copy()
    r_ar = _inner(r, ar)
    if r_ar < -1e-12 * rhs_norm**2:
        raise NumericalError(f"operator not PSD: r^H A r = {r_ar:.3e}")

    k = 0
    for k in range(1, max_iter + 1):
        ap_norm2 = _inner(ap, ap)
        if ap_norm2 <= 0.0 or r_ar <= 0.0:
            break  # stagnation in the null space; x is a least-squares point
        alpha = r_ar / ap_norm2
        x += alpha * p
        r -= alpha * ap
        history.append(float(np.linalg.norm(r)) / rhs_norm)
        if history[-1] <= tol:
            break
        ar = apply_op(r)
        r_ar_new = _inner(r, ar)
        if r_ar_new < -1e-12 * rhs_norm**2:
            raise NumericalError(
                f"operator not PSD at iteration {k}: r^H A r = {r_ar_new:.3e}"
            )
        beta = r_ar_new / r_ar
        p = r + beta * p
        ap = ar + beta * ap
        r_ar = r_ar_new

    return x, {"iterations": k, "residual": history[-1], "residuals": history}
