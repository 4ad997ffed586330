"""Noise rank, node reordering and disturbance topology detection."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ._linalg import solve_gram
from .arx import InnovationEstimate, known_excitation, regressor_matrix
from .exceptions import (ConvergenceError, DegenerateDataError, InconsistentRankError,
                         ModelError)
from .glasso import GlassoResult, glasso_gram
from .netmodel import Dataset, NetworkModel

REL_FLOOR = 1e-8
DEFAULT_GRID = tuple(range(0, 2001, 25))
CRITERIA = ("AIC", "BIC", "CV")


@dataclass
class RankResult:
    singular_values: np.ndarray
    p_hat: int
    permutation: Tuple[int, ...]
    gap_ratio: float
    threshold: float

    def to_dict(self):
        return {"singular_values": self.singular_values.tolist(), "p_hat": self.p_hat,
                "permutation": [i + 1 for i in self.permutation],
                "gap_ratio": self.gap_ratio, "threshold": self.threshold}


def _floored(s, rel_floor):
    floor = rel_floor * s[0]
    return np.append(np.maximum(s, floor), floor)


def estimate_rank(lambda_hat, rel_floor: float = REL_FLOOR, abs_floor: float = 0.0,
                  reorder: str = "ordered") -> RankResult:
    """Rank by the largest relative gap of the singular values.

    ``p_hat = argmax_i s_i / s_{i+1}`` over ``i = 1..L`` after raising every
    value to at least ``rel_floor * s_1`` and appending that floor as
    ``s_{L+1}``. If ``s_1 <= abs_floor`` the data carry no noise at all and
    :class:`DegenerateDataError` is raised.
    """
    lam = np.asarray(lambda_hat, float)
    if lam.ndim != 2 or lam.shape[0] != lam.shape[1]:
        raise ModelError("covariance must be square")
    if not np.allclose(lam, lam.T, atol=1e-10 * max(1.0, np.abs(lam).max())):
        raise ModelError("covariance must be symmetric")
    s = np.linalg.svd(lam, compute_uv=False)
    if s.size == 0 or s[0] <= abs_floor or s[0] == 0:
        raise DegenerateDataError("all singular values of the innovation covariance "
                                  "are negligible (rank 0)")
    sf = _floored(s, rel_floor)
    ratios = sf[:-1] / sf[1:]
    p_hat = int(np.argmax(ratios)) + 1
    gap = float(np.inf) if p_hat == len(s) else float(s[p_hat - 1] / s[p_hat]) \
        if s[p_hat] > 0 else float(np.inf)
    thr = float(np.sqrt(sf[p_hat - 1] * sf[p_hat]))
    perm = reorder_nodes(lam, p_hat, method=reorder, tol=thr)
    return RankResult(s, p_hat, perm, gap, thr)


def _min_eig(lam, idx):
    if not idx:
        return np.inf
    return float(np.linalg.eigvalsh(lam[np.ix_(idx, idx)])[0])


def reorder_nodes(lambda_hat, p_hat: int, method: str = "ordered",
                  tol: Optional[float] = None) -> Tuple[int, ...]:
    """Permutation putting ``p_hat`` nodes with full-rank noise first.

    Returns ``perm`` with ``perm[i]`` the original index of new node i.
    ``method="ordered"`` scans nodes by index and keeps a node if the leading
    block stays nonsingular (min eigenvalue above ``tol``), which leaves an
    already valid ordering untouched. ``method="greedy"`` adds the node that
    maximizes the smallest eigenvalue of the leading block. Selected nodes
    keep their original relative order, as do the remaining ones. If the
    scan fails the greedy rule is tried before giving up.
    """
    lam = np.asarray(lambda_hat, float)
    L = lam.shape[0]
    if not 0 <= p_hat <= L:
        raise ModelError("rank must lie between 0 and L")
    if tol is None:
        s = np.linalg.svd(lam, compute_uv=False)
        sf = _floored(s, REL_FLOOR)
        tol = float(np.sqrt(sf[p_hat - 1] * sf[p_hat])) if p_hat > 0 else 0.0
    if p_hat == L:
        if _min_eig(lam, list(range(L))) <= tol:
            raise InconsistentRankError(f"covariance is not of full rank {L}")
        return tuple(range(L))
    chosen = None
    if method == "ordered":
        sel: List[int] = []
        for i in range(L):
            if len(sel) < p_hat and _min_eig(lam, sel + [i]) > tol:
                sel.append(i)
        if len(sel) == p_hat:
            chosen = sel
    elif method != "greedy":
        raise ModelError(f"unknown reorder method {method!r}")
    if chosen is None:
        sel = []
        for _ in range(p_hat):
            rest = [i for i in range(L) if i not in sel]
            best = max(rest, key=lambda i: (_min_eig(lam, sel + [i]), -i))
            sel.append(best)
        if _min_eig(lam, sel) <= tol:
            raise InconsistentRankError(f"no set of {p_hat} nodes has a nonsingular "
                                        "noise covariance block")
        chosen = sorted(sel)
    rest = [i for i in range(L) if i not in chosen]
    return tuple(sorted(chosen) + rest)


@dataclass
class TopologyEstimate:
    """Noise input sets ``V[j]`` (0-based channel indices) per node."""

    V: Tuple[Tuple[int, ...], ...]
    p: int
    method: str = "true"
    score_table: Dict[int, list] = field(default_factory=dict)
    lambdas: Dict[int, float] = field(default_factory=dict)

    def __post_init__(self):
        self.V = tuple(tuple(sorted(set(v))) for v in self.V)
        for j, v in enumerate(self.V):
            if any(not 0 <= s < self.p for s in v):
                raise ModelError(f"noise set of node {j + 1} outside 1..{self.p}")

    @property
    def L(self) -> int:
        return len(self.V)

    @property
    def edges(self) -> set:
        return {(j, s) for j, v in enumerate(self.V) for s in v}

    @classmethod
    def from_model(cls, model: NetworkModel) -> "TopologyEstimate":
        return cls(model.noise_sets, model.p, "true")

    def to_dict(self):
        per_node = {}
        for j, v in enumerate(self.V):
            entry = {"V": [s + 1 for s in v], "method": self.method}
            if j in self.score_table:
                entry["score_table"] = self.score_table[j]
            if j in self.lambdas:
                entry["lambda"] = self.lambdas[j]
            per_node[str(j + 1)] = entry
        return {"p": self.p, "per_node": per_node}


# ---------------------------------------------------------------- designs

@dataclass
class _NodeDesign:
    groups: List[Tuple[str, int]]
    n: int
    A: np.ndarray
    b: np.ndarray
    yy: float
    rows: int
    train: tuple      # (A, b, yy, rows)
    valid: tuple
    Phi: Optional[np.ndarray] = None
    y: Optional[np.ndarray] = None
    ntr: int = 0

    def cols(self, keep_groups):
        return np.concatenate([np.arange(i * self.n, (i + 1) * self.n)
                               for i, g in enumerate(self.groups) if g in keep_groups]
                              or [np.zeros(0, int)])


def cv_train_length(N: int) -> int:
    """Chronological training length ``floor(2/3 (N + 1))``."""
    return int(math.floor(2 * (N + 1) / 3))


def _grams(Phi, y):
    return Phi.T @ Phi, Phi.T @ y, float(y @ y), Phi.shape[0]


def node_design(data: Dataset, innov: InnovationEstimate, n: int, j: int,
                neighbors: Sequence[int], R=None) -> _NodeDesign:
    """Gram data of node j's predictor with every noise channel included."""
    p = innov.p
    groups = [("G", l) for l in sorted(neighbors)] + [("H", s) for s in range(p)]
    inputs = [(data.w[:, l], 1) for l in sorted(neighbors)]
    inputs += [(innov.eps[:, s], 1) for s in range(p)]
    offset = known_excitation(data, R or {})[:, j]
    start = max(n, innov.start + n)
    Phi, y = regressor_matrix(data.w[:, j], inputs, n, start=start, known_offset=offset)
    ntr = cv_train_length(data.N) - start
    if ntr <= 0 or ntr >= len(y):
        train = valid = None
    else:
        train = _grams(Phi[:ntr], y[:ntr])
        valid = _grams(Phi[ntr:], y[ntr:])
    return _NodeDesign(groups, n, *_grams(Phi, y), train=train, valid=valid,
                       Phi=Phi, y=y, ntr=max(ntr, 0))


def _rss(A, b, yy, coef):
    return max(yy - 2 * coef @ b + coef @ A @ coef, 0.0)


def _fit_subset(design: _NodeDesign, keep):
    idx = design.cols(keep)
    A = design.A[np.ix_(idx, idx)]
    coef, _, dropped = solve_gram(A, design.b[idx])
    return idx, coef, dropped


def _cv_rmse(design: _NodeDesign, keep):
    if design.train is None:
        raise ModelError("data too short for the cross-validation split")
    idx = design.cols(keep)
    At, bt, _, _ = design.train
    Av, bv, yyv, nv = design.valid
    coef, _, dropped = solve_gram(At[np.ix_(idx, idx)], bt[idx])
    rss = _rss(Av[np.ix_(idx, idx)], bv[idx], yyv, coef)
    return float(np.sqrt(rss / nv)), dropped


def _cv_residuals(design: _NodeDesign, keep):
    """Validation residuals of the training-data least-squares fit."""
    if design.train is None or design.Phi is None:
        raise ModelError("data too short for the cross-validation split")
    idx = design.cols(keep)
    At, bt, _, _ = design.train
    coef = solve_gram(At[np.ix_(idx, idx)], bt[idx])[0]
    return design.y[design.ntr:] - design.Phi[design.ntr:, idx] @ coef


def score_candidate(design: _NodeDesign, V, criterion: str):
    """Score one candidate noise set; returns ``(score, n_params, V_N, flagged)``."""
    keep = [g for g in design.groups if g[0] == "G"] + [("H", s) for s in V]
    idx, coef, dropped = _fit_subset(design, keep)
    N = design.rows
    rss = _rss(design.A[np.ix_(idx, idx)], design.b[idx], design.yy, coef) \
        if idx.size else design.yy
    VN = rss / N
    n_p = int(idx.size)
    logV = np.log(VN) if VN > 0 else -np.inf
    if criterion == "AIC":
        score = 0.5 * logV + n_p / N
    elif criterion == "BIC":
        score = N * logV + N * (np.log(2 * np.pi) + 1) + n_p * np.log(N)
    elif criterion == "CV":
        score, dropped_cv = _cv_rmse(design, keep)
        dropped = max(dropped, dropped_cv)
    else:
        raise ModelError(f"unknown criterion {criterion!r}; choose from {CRITERIA}")
    return float(score), n_p, float(VN), bool(dropped)


def select_structure(data: Dataset, innov: InnovationEstimate, n: int, criterion: str,
                     node: int, neighbors: Sequence[int], R=None, design=None):
    """Exhaustive search over noise-input sets for one node.

    Every subset of ``0..p-1`` is fitted by least squares and scored; the
    smallest score wins, ties going to fewer edges and then to the
    lexicographically smallest set. Returns ``(V_j, score_table)``.
    """
    criterion = criterion.upper()
    if criterion not in CRITERIA:
        raise ModelError(f"unknown criterion {criterion!r}; choose from {CRITERIA}")
    design = design or node_design(data, innov, n, node, neighbors, R)
    p = innov.p
    table = []
    for size in range(p + 1):
        for V in itertools.combinations(range(p), size):
            score, n_p, VN, flag = score_candidate(design, V, criterion)
            table.append({"V": [s + 1 for s in V], "score": score, "n_params": n_p,
                          "V_N": VN, "rank_deficient": flag})
    best = min(table, key=lambda r: (r["score"], len(r["V"]), r["V"]))
    return tuple(s - 1 for s in best["V"]), table


@dataclass
class GlassoFit:
    eta: np.ndarray
    groups: List[Tuple[str, int]]
    active: List[Tuple[str, int]]
    V: Tuple[int, ...]
    result: GlassoResult


def _weights(groups, penalize_G):
    return np.array([1.0 if (g[0] == "H" or penalize_G) else 0.0 for g in groups])


def glasso_fit(data: Dataset, innov: InnovationEstimate, n: int, node: int, lam: float,
               neighbors: Sequence[int], R=None, penalize_G: bool = True,
               design=None, eta0=None, **solver) -> GlassoFit:
    """Group-lasso fit of node ``node`` with all noise channels as candidates.

    Groups are the n coefficients of each module. With ``penalize_G`` the
    known-topology G modules are penalized too. The noise set is read off
    the H groups whose norm exceeds 1e-3.
    """
    design = design or node_design(data, innov, n, node, neighbors, R)
    groups = design.groups
    gid = np.repeat(np.arange(len(groups)), n)
    res = glasso_gram(design.A, design.b, gid, lam, _weights(groups, penalize_G),
                      yy=design.yy, eta0=eta0, **solver)
    active = [g for g, a in zip(groups, res.active) if a]
    V = tuple(s for k, s in active if k == "H")
    return GlassoFit(res.eta, groups, active, V, res)


def tune_lambda(data: Dataset, innov: InnovationEstimate, n: int, node: int,
                neighbors: Sequence[int], grid=DEFAULT_GRID, R=None,
                penalize_G: bool = True, design=None, rule: str = "min"):
    """Grid search for the group-lasso penalty by chronological CV.

    Each grid value gives a noise set; that set is refitted by least squares
    on the training part and scored by validation RMSE. With ``rule="min"``
    the lowest RMSE wins, ties going to the larger penalty. With
    ``rule="1se"`` a larger penalty also counts as tied when its validation
    error is within one standard error of the best, the standard error
    being that of the paired per-sample difference of squared residuals.
    Grid points whose solver fails are skipped and reported.
    Returns ``(lambda, V_j, table)``.
    """
    if rule not in ("min", "1se"):
        raise ModelError(f"unknown tuning rule {rule!r}")
    grid = sorted(set(float(x) for x in grid), reverse=True)
    if not grid:
        raise ModelError("lambda grid is empty")
    design = design or node_design(data, innov, n, node, neighbors, R)
    resid: Dict[Tuple[int, ...], np.ndarray] = {}
    table = []
    eta = None
    for lam in grid:
        try:
            fit = glasso_fit(data, innov, n, node, lam, neighbors, R, penalize_G,
                             design=design, eta0=eta)
        except ConvergenceError as exc:
            table.append({"lambda": lam, "failed": str(exc)})
            continue
        eta = fit.eta
        if fit.V not in resid:
            keep = [g for g in design.groups if g[0] == "G"] + [("H", s) for s in fit.V]
            resid[fit.V] = _cv_residuals(design, keep)
        table.append({"lambda": lam, "V": [s + 1 for s in fit.V],
                      "rmse": float(np.sqrt(np.mean(resid[fit.V] ** 2))),
                      "iterations": fit.result.iterations})
    ok = [r for r in table if "rmse" in r]
    if not ok:
        raise ConvergenceError("group lasso failed at every grid point")
    best = min(ok, key=lambda r: (r["rmse"], -r["lambda"]))
    if rule == "1se":
        e_best = resid[tuple(s - 1 for s in best["V"])] ** 2
        for r in ok:  # descending penalty
            if r["lambda"] <= best["lambda"]:
                break
            d = resid[tuple(s - 1 for s in r["V"])] ** 2 - e_best
            se = d.std(ddof=1) / np.sqrt(d.size) if d.size > 1 else 0.0
            if d.mean() <= se:
                best = r
                break
    return best["lambda"], tuple(s - 1 for s in best["V"]), table


def estimate_topology(data: Dataset, innov: InnovationEstimate, n: int, method: str,
                      neighbors: Sequence[Sequence[int]], R=None, grid=DEFAULT_GRID,
                      penalize_G: bool = True, rule: str = "min") -> TopologyEstimate:
    """Noise sets for all nodes by ``AIC``, ``BIC``, ``CV`` or ``GLASSO``."""
    method = method.upper()
    V, tables, lambdas = [], {}, {}
    for j in range(data.L):
        design = node_design(data, innov, n, j, neighbors[j], R)
        if method == "GLASSO":
            lam, Vj, table = tune_lambda(data, innov, n, j, neighbors[j], grid, R,
                                         penalize_G, design=design, rule=rule)
            lambdas[j] = lam
        else:
            Vj, table = select_structure(data, innov, n, method, j, neighbors[j], R,
                                         design=design)
        V.append(Vj)
        tables[j] = table
    return TopologyEstimate(tuple(V), innov.p, method, tables, lambdas)


@dataclass
class RocPoint:
    TP: int
    FP: int
    Pos: int
    Neg: int
    TPR: float
    FPR: float
    dis: float
    flags: Tuple[str, ...] = ()

    def to_dict(self):
        return dict(TP=self.TP, FP=self.FP, Pos=self.Pos, Neg=self.Neg, TPR=self.TPR,
                    FPR=self.FPR, dis=self.dis, flags=list(self.flags))


def roc_eval(estimated: TopologyEstimate, truth: TopologyEstimate) -> RocPoint:
    """True/false positive rates of the noise edges and distance to (0, 1)."""
    if estimated.L != truth.L or estimated.p != truth.p:
        raise ModelError("estimated and true topology differ in L or p")
    est, tru = estimated.edges, truth.edges
    Pos = len(tru)
    Neg = truth.p * truth.L - Pos
    TP = len(est & tru)
    FP = len(est - tru)
    flags = []
    if Pos == 0:
        TPR = 0.0
        flags.append("no true edges: TPR undefined, reported as 0")
    else:
        TPR = TP / Pos
    if Neg == 0:
        FPR = 0.0
        flags.append("no absent edges: FPR undefined, reported as 0")
    else:
        FPR = FP / Neg
    return RocPoint(TP, FP, Pos, Neg, TPR, FPR, float(np.hypot(FPR, 1 - TPR)), tuple(flags))
