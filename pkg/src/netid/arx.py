"""High-order ARX estimation by per-node linear regression.

Covers the unstructured ARX fit used for the rank test, its refit with the
known excitation block imposed, and the structured predictor that takes the
reconstructed innovation as a measured input.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ._linalg import LSFit, lstsq
from .exceptions import ModelError, RankError
from .netmodel import Dataset, RationalTF, filter_series

# n(N) used in the numerical study, by data length
ORDER_SCHEDULE = ((300, 10), (1078, 20), (3873, 30), (13916, 40), (50000, 40))
MAX_ORDER = 40


def default_order(N: int) -> int:
    """Linear interpolation of ``ORDER_SCHEDULE`` in N, capped at 40."""
    Ns, ns = zip(*ORDER_SCHEDULE)
    return int(round(min(MAX_ORDER, np.interp(N, Ns, ns))))


def lag_block(x, first_lag: int, n: int, start: int, stop: int) -> np.ndarray:
    """Columns ``x(t - k)`` for ``k = first_lag .. first_lag + n - 1``, rows
    ``t = start .. stop - 1``."""
    x = np.asarray(x, dtype=float)
    if start - (first_lag + n - 1) < 0:
        raise ModelError(f"window start {start} too early for lag {first_lag + n - 1}")
    out = np.empty((stop - start, n))
    for i in range(n):
        k = first_lag + i
        out[:, i] = x[start - k:stop - k]
    return out


def regressor_matrix(target, inputs: Sequence[Tuple[np.ndarray, int]], n: int,
                     start: Optional[int] = None, known_offset=None):
    """Design matrix and target for one node regression.

    ``inputs`` lists ``(series, first_lag)`` pairs; each contributes ``n``
    columns. Rows run from ``start`` (default ``n``) to the end of the data.
    ``known_offset`` is subtracted from the target.
    """
    target = np.asarray(target, dtype=float)
    N = target.shape[0]
    start = n if start is None else start
    if start >= N:
        raise RankError(f"no usable rows (start={start}, N={N})")
    blocks = [lag_block(x, lag, n, start, N) for x, lag in inputs]
    Phi = np.hstack(blocks) if blocks else np.zeros((N - start, 0))
    y = target[start:].copy()
    if known_offset is not None:
        y -= np.asarray(known_offset, dtype=float)[start:]
    if Phi.shape[1] > Phi.shape[0]:
        raise RankError(f"{Phi.shape[1]} free parameters but only {Phi.shape[0]} usable rows")
    return Phi, y


@dataclass
class InnovationEstimate:
    """Reconstructed innovation ``eps`` (N, m); rows before ``start`` are zero.

    The first ``p`` columns estimate the white noise itself, the rest its
    static image through Gamma.
    """

    eps: np.ndarray
    p: int
    start: int

    @property
    def eps_a(self) -> np.ndarray:
        return self.eps[:, :self.p]

    @property
    def eps_b(self) -> np.ndarray:
        return self.eps[:, self.p:]

    @property
    def window(self) -> np.ndarray:
        return self.eps[self.start:]

    @classmethod
    def from_noise(cls, e) -> "InnovationEstimate":
        e = np.asarray(e, dtype=float)
        return cls(e, e.shape[1], 0)


@dataclass
class ArxModel:
    """``A(q) w = B(q) r + eps`` with A of shape (L, L, n+1) and B (L, K, n).

    ``known_mask[j, k]`` marks B entries fixed by structure; ``zeta[j]`` is
    node j's free parameter vector.
    """

    n: int
    A: np.ndarray
    B: np.ndarray
    known_mask: np.ndarray
    zeta: List[np.ndarray]
    fit: LSFit
    diagnostics: dict = field(default_factory=dict)


def known_excitation(data: Dataset, R: Mapping[Tuple[int, int], RationalTF],
                     signals: Optional[Sequence[int]] = None) -> np.ndarray:
    """``sum_k R_jk r_k`` for every node, restricted to ``signals`` if given."""
    out = np.zeros((data.N, data.L))
    for (j, k), tf in R.items():
        if signals is None or k in signals:
            out[:, j] += filter_series(tf, data.r[:, k])
    return out


def _arx_fit(data: Dataset, n: int, free_r: Sequence[int], offset, method):
    inputs = [(data.w[:, l], 1) for l in range(data.L)]
    inputs += [(data.r[:, k], 0) for k in free_r]
    Phi, Y = regressor_matrix(data.w, inputs, n, start=n, known_offset=offset)
    fit = lstsq(Phi, Y, method=method)
    resid = Y - Phi @ fit.coef
    eps = np.zeros_like(data.w)
    eps[n:] = resid
    return fit, eps, Phi


def _assemble(data, n, free_r, fit, known_mask, Bknown, step, eps):
    L, K = data.L, data.K
    A = np.zeros((L, L, n + 1))
    B = np.zeros((L, K, n))
    coef = fit.coef
    for j in range(L):
        A[j, j, 0] = 1.0
        for l in range(L):
            A[j, l, 1:] = -coef[l * n:(l + 1) * n, j]
        for i, k in enumerate(free_r):
            off = (L + i) * n
            B[j, k, :] = coef[off:off + n, j]
    if Bknown is not None:
        B[known_mask] = Bknown[known_mask]
    zeta = [coef[:, j].copy() for j in range(L)]
    rows = data.N - n
    diag = {
        "order": n,
        "rows": rows,
        "params_per_node": int(coef.shape[0]),
        "condition_number": float(fit.cond),
        "rank_deficient": bool(fit.rank_deficient),
        "residual_variance": (eps[n:] ** 2).mean(axis=0).tolist(),
    }
    return ArxModel(n, A, B, known_mask, zeta, fit, {step: diag})


def fit_arx_step1(data: Dataset, n: int, method: str = "normal"):
    """Fully parametrized ARX fit of all nodes on all excitations.

    Every node shares the same regressors, so the L node regressions are
    solved together. When the noise is rank reduced the normal matrix may be
    numerically singular; the minimum-norm fallback keeps the residual well defined
    and sets ``diagnostics["step1"]["rank_deficient"]``.
    """
    free_r = list(range(data.K))
    fit, eps, _ = _arx_fit(data, n, free_r, None, method)
    known = np.zeros((data.L, data.K), dtype=bool)
    model = _assemble(data, n, free_r, fit, known, None, "step1", eps)
    return model, InnovationEstimate(eps, data.L, n)


def residual_covariance(innov: InnovationEstimate) -> np.ndarray:
    """Sample covariance ``(1/N) sum eps eps^T`` over the valid window."""
    E = innov.window
    if E.shape[0] < E.shape[1]:
        raise ModelError("need at least as many samples as innovation channels")
    lam = E.T @ E / E.shape[0]
    return 0.5 * (lam + lam.T)


def split_excitation(R: Mapping[Tuple[int, int], RationalTF], K: int, p: int):
    """Split excitation indices into (free, known) for ordered nodes.

    An excitation is known ("r_b") when it only enters nodes ``p..L-1``;
    everything else stays free.
    """
    rows_of: Dict[int, List[int]] = {}
    for (j, k) in R:
        rows_of.setdefault(k, []).append(j)
    known = sorted(k for k, rows in rows_of.items() if all(j >= p for j in rows))
    free = [k for k in range(K) if k not in known]
    return free, known


def fit_arx_step21(data: Dataset, n: int, p: int,
                   R: Mapping[Tuple[int, int], RationalTF], method: str = "normal"):
    """ARX refit with the noise rank imposed.

    Nodes must be ordered so the first ``p`` carry full-rank noise. The
    columns of B belonging to excitations that only drive nodes ``p..L-1``
    are fixed: zero for the first p rows, the known R entries below. Their
    contribution is moved to the target.
    """
    free_r, known_r = split_excitation(R, data.K, p)
    offset = known_excitation(data, R, known_r) if known_r else None
    fit, eps, _ = _arx_fit(data, n, free_r, offset, method)
    known = np.zeros((data.L, data.K), dtype=bool)
    known[:, known_r] = True
    Bknown = np.zeros((data.L, data.K, n))
    for (j, k), tf in R.items():
        if k in known_r:
            Bknown[j, k] = tf.impulse_response(n)
    model = _assemble(data, n, free_r, fit, known, Bknown, "step2.1", eps)
    model.diagnostics["step2.1"]["known_excitations"] = [k + 1 for k in known_r]
    return model, InnovationEstimate(eps, p, n)


@dataclass
class NodeFit:
    """One node of the structured predictor.

    ``groups`` lists the modules in parameter order, ``("G", l)`` for the
    contribution of node l and ``("H", s)`` for innovation channel s; each
    owns ``n`` consecutive entries of ``eta``.
    """

    groups: List[Tuple[str, int]]
    eta: np.ndarray
    fit: LSFit
    sigma2: float
    rows: int

    def block(self, kind: str, idx: int) -> np.ndarray:
        i = self.groups.index((kind, idx))
        n = self.eta.size // max(len(self.groups), 1)
        return self.eta[i * n:(i + 1) * n]

    def covariance(self) -> np.ndarray:
        return self.fit.covariance(self.sigma2)


@dataclass
class StructuredPredictorModel:
    """``w_j = sum G_jl w_l + sum Hbar_js eps_s + known R terms`` per node,
    all modules strictly proper FIR of order n."""

    n: int
    neighbors: Tuple[Tuple[int, ...], ...]
    noise_sets: Tuple[Tuple[int, ...], ...]
    nodes: List[NodeFit]
    diagnostics: dict = field(default_factory=dict)

    @property
    def eta(self) -> np.ndarray:
        return np.concatenate([nf.eta for nf in self.nodes]) if self.nodes else np.zeros(0)

    def G_coeffs(self, j: int, l: int) -> np.ndarray:
        """Impulse response ``(0, g1, ..., gn)`` of the estimated G_jl."""
        return np.concatenate([[0.0], self.nodes[j].block("G", l)])

    def Hbar_coeffs(self, j: int, s: int) -> np.ndarray:
        return np.concatenate([[0.0], self.nodes[j].block("H", s)])


def _normalize_sets(sets, L, name):
    if len(sets) != L:
        raise ModelError(f"{name} must list one index set per node ({L})")
    return tuple(tuple(sorted(set(s))) for s in sets)


def fit_structured(data: Dataset, innov: InnovationEstimate, neighbors, noise_sets, n: int,
                   R: Optional[Mapping[Tuple[int, int], RationalTF]] = None,
                   method: str = "normal", nodes: Optional[Sequence[int]] = None):
    """Structured high-order predictor with the innovation as measured input.

    Returns the model and the refreshed innovation (all L residual columns,
    split at ``innov.p``). Rows start once every lagged innovation is valid.
    A node with no modules has zero parameters and residual equal to its
    target.
    """
    L = data.L
    neighbors = _normalize_sets(neighbors, L, "neighbors")
    noise_sets = _normalize_sets(noise_sets, L, "noise_sets")
    p = innov.p
    for j, V in enumerate(noise_sets):
        if any(not 0 <= s < p for s in V):
            raise ModelError(f"noise set of node {j + 1} refers to channels outside 1..{p}")
    known = known_excitation(data, R or {})
    start = max(n, innov.start + n)
    eps_a = innov.eps_a
    eps = np.zeros((data.N, L))
    node_fits = []
    diag = {"order": n, "rows": data.N - start, "nodes": []}
    for j in (range(L) if nodes is None else nodes):
        groups = [("G", l) for l in neighbors[j]] + [("H", s) for s in noise_sets[j]]
        inputs = [(data.w[:, l], 1) for l in neighbors[j]]
        inputs += [(eps_a[:, s], 1) for s in noise_sets[j]]
        Phi, y = regressor_matrix(data.w[:, j], inputs, n, start=start, known_offset=known[:, j])
        fit = lstsq(Phi, y, method=method)
        resid = y - Phi @ fit.coef
        eps[start:, j] = resid
        sigma2 = float(resid @ resid / resid.size)
        node_fits.append(NodeFit(groups, np.asarray(fit.coef), fit, sigma2, resid.size))
        diag["nodes"].append({"node": j + 1, "params": len(groups) * n,
                              "residual_variance": sigma2,
                              "condition_number": float(fit.cond),
                              "rank_deficient": bool(fit.rank_deficient)})
    model = StructuredPredictorModel(n, neighbors, noise_sets, node_fits, diag)
    return model, InnovationEstimate(eps, p, start)


def refine_step31(data: Dataset, innov: InnovationEstimate, neighbors, noise_sets, n: int,
                  R=None, update_innovation: bool = True, method: str = "normal"):
    """Two-pass structured fit.

    The first pass uses ``innov``; its residuals on the first p nodes become
    the new innovation input for the second pass, whose model is returned.
    With ``update_innovation=False`` (measured noise as input) one pass is
    run.
    """
    model, new = fit_structured(data, innov, neighbors, noise_sets, n, R, method)
    first = model
    if update_innovation:
        upd = InnovationEstimate(new.eps[:, :innov.p], innov.p, new.start)
        model, new = fit_structured(data, upd, neighbors, noise_sets, n, R, method)
    model.diagnostics["first_pass_residual_variance"] = [nf.sigma2 for nf in first.nodes]
    return model, new
