"""Least-squares kernels shared by the estimation steps."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .exceptions import RankError

COND_LIMIT = 1e12


@dataclass
class LSFit:
    """Solution of ``min ||Y - Phi coef||`` plus what is needed afterwards.

    ``gram`` is ``Phi^T Phi``. When the column-equilibrated Gram matrix has
    condition number above ``COND_LIMIT`` the minimum-norm solution is
    returned and ``dropped`` counts the discarded null directions.
    """

    coef: np.ndarray
    gram: np.ndarray
    rows: int
    cond: float
    dropped: int = 0

    @property
    def rank_deficient(self) -> bool:
        return self.dropped > 0

    @property
    def n_params(self) -> int:
        return self.gram.shape[0]

    def covariance(self, sigma2: float) -> np.ndarray:
        return covariance_from_gram(self.gram, sigma2)


def _equilibrate(gram):
    d = np.sqrt(np.diag(gram)).copy()
    d[d == 0] = 1.0
    return gram / np.outer(d, d), d


def _cond(gs):
    vals = np.linalg.eigvalsh(gs)
    if vals[-1] <= 0:
        return np.inf
    return float(vals[-1] / vals[0]) if vals[0] > 0 else np.inf


def pinv_psd(gram, cond_limit=COND_LIMIT):
    """Inverse of a PSD matrix, pseudo-inverse if numerically singular."""
    p = gram.shape[0]
    if p == 0:
        return np.zeros((0, 0))
    gs, d = _equilibrate(gram)
    vals, vecs = np.linalg.eigh(gs)
    keep = vals > max(vals[-1], 0.0) / cond_limit
    inv = (vecs[:, keep] / vals[keep]) @ vecs[:, keep].T / np.outer(d, d)
    return 0.5 * (inv + inv.T)


def covariance_from_gram(gram, sigma2):
    """``sigma2 * gram^-1`` (pseudo-inverse when singular)."""
    return sigma2 * pinv_psd(gram)


def solve_gram(gram, rhs, cond_limit=COND_LIMIT):
    """Solve the normal equations ``gram x = rhs``.

    Returns ``(x, cond, dropped)`` where ``cond`` is the condition number of
    the equilibrated Gram matrix. Above ``cond_limit`` the minimum-norm
    solution (in equilibrated coordinates) is used and ``dropped`` is the
    number of discarded directions.
    """
    p = gram.shape[0]
    if p == 0:
        return np.zeros((0,) + rhs.shape[1:]), 1.0, 0
    gs, d = _equilibrate(gram)
    shape = (-1,) + (1,) * (rhs.ndim - 1)
    rs = rhs / d.reshape(shape)
    vals, vecs = np.linalg.eigh(gs)
    cond = float(vals[-1] / vals[0]) if vals[0] > 0 else np.inf
    if cond <= cond_limit:
        try:
            x = linalg.cho_solve(linalg.cho_factor(gs), rs)
            return x / d.reshape(shape), cond, 0
        except linalg.LinAlgError:
            pass
    keep = vals > max(vals[-1], 0.0) / cond_limit
    x = vecs[:, keep] @ ((vecs[:, keep].T @ rs) / vals[keep].reshape(shape))
    return x / d.reshape(shape), cond, int((~keep).sum())


def lstsq(Phi, Y, method="normal") -> LSFit:
    """Least squares for one or several right-hand sides.

    ``method="normal"`` solves the normal equations (Cholesky, minimum-norm
    fallback when ill-conditioned); ``method="qr"`` uses LAPACK's SVD-based
    minimum-norm solver and is kept as a slower reference.
    """
    Phi = np.asarray(Phi, dtype=float)
    rows, cols = Phi.shape
    if cols > rows:
        raise RankError(f"{cols} free parameters but only {rows} usable rows")
    gram = Phi.T @ Phi
    if method == "qr":
        if cols == 0:
            return LSFit(np.zeros((0,) + np.shape(Y)[1:]), gram, rows, 1.0)
        coef, _, rank, _ = linalg.lstsq(Phi, Y, lapack_driver="gelsd")
        return LSFit(coef, gram, rows, _cond(_equilibrate(gram)[0]), cols - int(rank))
    if method != "normal":
        raise ValueError(f"unknown method {method!r}")
    coef, cond, dropped = solve_gram(gram, Phi.T @ Y)
    return LSFit(coef, gram, rows, cond, dropped)
