"""Non-learned compositing baselines: mask copy-paste and Poisson blending."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sparse
from scipy.sparse.linalg import cg

from .validation import ValidationError, check_binary_mask, check_same_shape


def copy_paste(u: np.ndarray, r: np.ndarray, s_a: np.ndarray) -> np.ndarray:
    """Object pixels copied onto the region using a segmentation mask."""
    check_same_shape(u, r, "u", "r")
    mask = check_binary_mask(s_a).astype(bool)
    if mask.shape != u.shape[:2]:
        raise ValidationError(f"mask shape {mask.shape} does not match patches {u.shape[:2]}")
    return np.where(mask[..., None], u, r).astype(u.dtype, copy=False)


def _laplacian_system(mask: np.ndarray, u: np.ndarray, r: np.ndarray):
    """Sparse SPD system for the masked interior with Dirichlet boundary r."""
    h, w = mask.shape
    idx = -np.ones((h, w), dtype=np.int64)
    ys, xs = np.nonzero(mask)
    idx[ys, xs] = np.arange(len(ys))
    n = len(ys)
    rows, cols, vals = [], [], []
    b = np.zeros(n, dtype=np.float64)
    offsets = ((-1, 0), (1, 0), (0, -1), (0, 1))
    for k in range(n):
        y, x = int(ys[k]), int(xs[k])
        rows.append(k)
        cols.append(k)
        vals.append(4.0)
        # guidance field: the source Laplacian
        acc = 4.0 * u[y, x]
        for dy, dx in offsets:
            ny, nx = y + dy, x + dx
            acc -= u[ny, nx]
            j = idx[ny, nx]
            if j >= 0:
                rows.append(k)
                cols.append(j)
                vals.append(-1.0)
            else:
                acc += r[ny, nx]
        b[k] = acc
    a = sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))
    return a, b, (ys, xs)


def poisson_blend(
    u: np.ndarray,
    r: np.ndarray,
    s_a: np.ndarray,
    max_iter: int | None = None,
    residual_tol: float = 1e-6,
) -> np.ndarray:
    """Gradient-domain seamless cloning of ``u`` into ``r`` over mask ``s_a``.

    Per channel, solves the discrete Poisson equation (5-point Laplacian of
    the output equals that of the object) on the mask interior with the
    region values as Dirichlet boundary, via conjugate gradients. Raises if
    the mask touches the patch border or the solver misses ``residual_tol``.
    """
    check_same_shape(u, r, "u", "r")
    mask = check_binary_mask(s_a).astype(bool)
    if mask.shape != u.shape[:2]:
        raise ValidationError(f"mask shape {mask.shape} does not match patches {u.shape[:2]}")
    if not mask.any():
        raise ValidationError("mask interior is empty")
    if mask[0, :].any() or mask[-1, :].any() or mask[:, 0].any() or mask[:, -1].any():
        raise ValidationError("mask must not touch the patch border")
    n = int(mask.sum())
    if max_iter is None:
        max_iter = max(2000, 20 * n)
    out = r.astype(np.float64).copy()
    for c in range(u.shape[2]):
        a, b, (ys, xs) = _laplacian_system(mask, u[..., c].astype(np.float64), r[..., c].astype(np.float64))
        x, info = cg(a, b, rtol=1e-12, atol=1e-14, maxiter=max_iter)
        residual = float(np.abs(a @ x - b).max())
        if info != 0 or residual > residual_tol:
            raise RuntimeError(
                f"Poisson solve did not converge on channel {c}: "
                f"info={info}, residual={residual:.3e}"
            )
        out[ys, xs, c] = x
    return out.astype(u.dtype, copy=False) if u.dtype == np.float64 else out.astype(np.float32)


def poisson_residual(out: np.ndarray, u: np.ndarray, s_a: np.ndarray) -> float:
    """Max interior deviation of ``out`` from the discrete Poisson equation."""
    mask = np.asarray(s_a).astype(bool)
    lap = lambda img: (
        4.0 * img[1:-1, 1:-1]
        - img[:-2, 1:-1]
        - img[2:, 1:-1]
        - img[1:-1, :-2]
        - img[1:-1, 2:]
    )
    worst = 0.0
    for c in range(out.shape[2]):
        diff = lap(out[..., c].astype(np.float64)) - lap(u[..., c].astype(np.float64))
        interior = mask[1:-1, 1:-1]
        if interior.any():
            worst = max(worst, float(np.abs(diff[interior]).max()))
    return worst
