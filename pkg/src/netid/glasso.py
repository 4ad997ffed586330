"""Group lasso by accelerated proximal gradient.

Solves ``min 1/2 ||y - X eta||^2 + lam * sum_g w_g ||eta_g||_2`` working only
with ``A = X^T X`` and ``b = X^T y``, so the cost per iteration does not
depend on the number of samples.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ._linalg import solve_gram
from .exceptions import ConvergenceError, ModelError

ACTIVE_TOL = 1e-3


@dataclass
class GlassoResult:
    eta: np.ndarray
    active: np.ndarray      # bool per group, group norm > ACTIVE_TOL
    iterations: int
    kkt_residual: float
    objective: float
    converged: bool = True


def _group_index(groups: Sequence[int]):
    groups = np.asarray(groups)
    labels = list(dict.fromkeys(groups.tolist()))
    return groups, labels, [np.flatnonzero(groups == g) for g in labels]


def objective(A, b, yy, eta, lam, idx, weights):
    quad = 0.5 * (eta @ A @ eta) - b @ eta + 0.5 * yy
    pen = sum(w * np.linalg.norm(eta[ix]) for ix, w in zip(idx, weights))
    return float(quad + lam * pen)


def kkt_residual(A, b, eta, lam, idx, weights) -> float:
    """Largest violation of the optimality conditions over groups.

    For a nonzero group ``g_g = lam w_g eta_g/||eta_g||`` must hold, for a
    zero group ``||g_g|| <= lam w_g``, where ``g = b - A eta`` is the
    negative gradient of the quadratic part.
    """
    g = b - A @ eta
    worst = 0.0
    for ix, w in zip(idx, weights):
        nrm = np.linalg.norm(eta[ix])
        if nrm > 0:
            v = np.linalg.norm(g[ix] - lam * w * eta[ix] / nrm)
        else:
            v = max(0.0, np.linalg.norm(g[ix]) - lam * w)
        worst = max(worst, v)
    return float(worst)


def lambda_max(A, b, groups, weights=None) -> float:
    """Smallest penalty at which all penalized groups are zero.

    Unpenalized groups are fitted first; the critical value is the largest
    ``||g_g|| / w_g`` over penalized groups at that fit.
    """
    _, labels, idx = _group_index(groups)
    w = np.ones(len(labels)) if weights is None else np.asarray(weights, float)
    free = np.concatenate([ix for ix, wi in zip(idx, w) if wi == 0] or [np.zeros(0, int)])
    eta = np.zeros(len(b))
    if free.size:
        eta[free] = solve_gram(A[np.ix_(free, free)], b[free])[0]
    g = b - A @ eta
    vals = [np.linalg.norm(g[ix]) / wi for ix, wi in zip(idx, w) if wi > 0]
    return float(max(vals)) if vals else 0.0


def glasso_gram(A, b, groups, lam: float, weights=None, yy: float = 0.0,
                eta0: Optional[np.ndarray] = None, tol: float = 1e-8,
                max_iter: int = 10000, kkt_tol: Optional[float] = None,
                raise_on_fail: bool = True) -> GlassoResult:
    """Group lasso from normal-equation data.

    Stops when the relative objective decrease falls below ``tol`` and the
    KKT residual is below ``kkt_tol`` (default ``1e-7 * max(||b||, 1)``).
    A zero penalty returns the least-squares solution directly.
    """
    A = np.asarray(A, float)
    b = np.asarray(b, float)
    if lam < 0:
        raise ModelError("penalty must be non-negative")
    groups, labels, idx = _group_index(groups)
    w = np.ones(len(labels)) if weights is None else np.asarray(weights, float)
    if len(w) != len(labels):
        raise ModelError("one weight per group is required")
    if kkt_tol is None:
        kkt_tol = 1e-7 * max(np.linalg.norm(b), 1.0)
    if lam == 0 or not np.any(w > 0):
        eta = solve_gram(A, b)[0]
        return GlassoResult(eta, _active(eta, idx), 0, kkt_residual(A, b, eta, lam, idx, w),
                            objective(A, b, yy, eta, lam, idx, w))

    # per-group scalar rescaling eta_g = u_g / s_g keeps the group norm
    # structure and evens out very different signal scales
    s = np.ones(len(b))
    for ix in idx:
        s[ix] = np.sqrt(max(np.mean(np.diag(A)[ix]), 1e-300))
    As = A / np.outer(s, s)
    bs = b / s
    ws = np.array([wi / s[ix[0]] for ix, wi in zip(idx, w)])

    Lip = float(np.linalg.eigvalsh(As)[-1]) if len(b) else 1.0
    Lip = max(Lip, 1e-300)
    u = np.zeros(len(b)) if eta0 is None else np.asarray(eta0, float) * s
    f = lambda v: 0.5 * (v @ As @ v) - bs @ v  # noqa: E731
    F = lambda v: f(v) + lam * sum(wi * np.linalg.norm(v[ix]) for ix, wi in zip(idx, ws))  # noqa: E731

    def prox(v, step):
        out = v.copy()
        for ix, wi in zip(idx, ws):
            nrm = np.linalg.norm(v[ix])
            thr = step * lam * wi
            out[ix] = 0.0 if nrm <= thr else v[ix] * (1 - thr / nrm)
        return out

    z = u.copy()
    t = 1.0
    obj = F(u)
    it = 0
    kkt = np.inf
    for it in range(1, max_iter + 1):
        grad = As @ z - bs
        fz = f(z)
        while True:  # backtracking on the local Lipschitz estimate
            u_new = prox(z - grad / Lip, 1.0 / Lip)
            d = u_new - z
            if f(u_new) <= fz + grad @ d + 0.5 * Lip * (d @ d) + 1e-12 * abs(fz):
                break
            Lip *= 2.0
        obj_new = F(u_new)
        if obj_new > obj:  # adaptive restart
            t = 1.0
            z = u.copy()
            continue
        t_new = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
        z = u_new + ((t - 1) / t_new) * (u_new - u)
        rel = (obj - obj_new) / max(abs(obj_new), 1e-300)
        u, obj, t = u_new, obj_new, t_new
        if rel < tol:
            eta = u / s
            kkt = kkt_residual(A, b, eta, lam, idx, w)
            if kkt <= kkt_tol:
                return GlassoResult(eta, _active(eta, idx), it, kkt,
                                    objective(A, b, yy, eta, lam, idx, w))
    eta = u / s
    kkt = kkt_residual(A, b, eta, lam, idx, w)
    if raise_on_fail:
        raise ConvergenceError(f"group lasso did not converge in {max_iter} iterations "
                               f"(KKT residual {kkt:.3g})", last_iterate=eta, kkt_residual=kkt)
    return GlassoResult(eta, _active(eta, idx), it, kkt,
                        objective(A, b, yy, eta, lam, idx, w), converged=False)


def _active(eta, idx):
    return np.array([np.linalg.norm(eta[ix]) > ACTIVE_TOL for ix in idx], dtype=bool)


def glasso(X, y, groups, lam: float, weights=None, **kw) -> GlassoResult:
    """Group lasso on raw data; see :func:`glasso_gram`."""
    X = np.asarray(X, float)
    y = np.asarray(y, float)
    return glasso_gram(X.T @ X, X.T @ y, groups, lam, weights, yy=float(y @ y), **kw)
