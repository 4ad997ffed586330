"""Weighted null-space fitting of Box-Jenkins modules.

A high-order FIR estimate ``x_1 .. x_n`` of a module ``B/A`` satisfies
``A x - B = 0`` on its first n coefficients, which is linear in the
parameters. This module builds that linear system per node, solves it, and
reweights it with the inverse covariance of the residual until the
parameters settle.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from ._linalg import pinv_psd, solve_gram
from .arx import InnovationEstimate, StructuredPredictorModel
from .exceptions import ConvergenceError, DimensionError, ModelError, RankError
from .netmodel import NetworkModel, RationalTF

T_COND_LIMIT = 1e12
Module = Tuple[str, int, int]   # ("G" | "H", row, column)


def toeplitz_lower(x, n: int, m: int) -> np.ndarray:
    """n-by-m lower-triangular Toeplitz matrix with first column ``x[:n]``
    (zero padded)."""
    col = np.zeros(n)
    x = np.asarray(x, float)[:n]
    col[:len(x)] = x
    row = np.zeros(m)
    if m:
        row[0] = col[0]
    return linalg.toeplitz(col, row)


def identity_block(n: int, m: int) -> np.ndarray:
    """``[I_m; 0]`` with n rows."""
    out = np.zeros((n, m))
    out[np.arange(min(n, m)), np.arange(min(n, m))] = 1.0
    return out


@dataclass
class BjOrders:
    """Numerator and denominator orders per module.

    ``orders[("G", j, l)] = (m_l, m_f)`` and ``orders[("H", j, s)] = (m_c,
    m_d)``; modules missing from the table get ``default``.
    """

    orders: Dict[Module, Tuple[int, int]] = field(default_factory=dict)
    default_G: Tuple[int, int] = (2, 2)
    default_H: Tuple[int, int] = (1, 1)

    def get(self, module: Module) -> Tuple[int, int]:
        if module in self.orders:
            return self.orders[module]
        return self.default_G if module[0] == "G" else self.default_H

    @classmethod
    def from_model(cls, model: NetworkModel) -> "BjOrders":
        """Exact orders of every module present in ``model``."""
        orders = {}
        for (j, l), tf in model.G.items():
            orders[("G", j, l)] = (tf.num.degree, tf.den.degree)
        for (j, s), tf in model.H.items():
            orders[("H", j, s)] = (tf.num.degree, tf.den.degree)
        return cls(orders)

    @classmethod
    def uniform(cls, m_l: int, m_f: int, m_c: int, m_d: int) -> "BjOrders":
        return cls({}, (m_l, m_f), (m_c, m_d))


def gamma_estimate(innov: InnovationEstimate) -> np.ndarray:
    """Feedthrough ``(sum eps_b eps_a^T)(sum eps_a eps_a^T)^-1``."""
    E = innov.window
    ea, eb = E[:, :innov.p], E[:, innov.p:]
    Saa = ea.T @ ea
    if innov.p and np.linalg.cond(Saa) > 1e12:
        raise RankError("covariance of the leading innovations is singular")
    if eb.shape[1] == 0:
        return np.zeros((0, innov.p))
    return linalg.solve(Saa, ea.T @ eb, assume_a="pos").T


def feedthrough(j: int, s: int, p: int, gamma) -> float:
    """Known constant term of H_js: identity for the first p rows, Gamma below."""
    if j < p:
        return 1.0 if j == s else 0.0
    return float(gamma[j - p, s])


@dataclass
class ModuleBlock:
    module: Module
    m_num: int
    m_den: int
    x: np.ndarray          # x_0 .. x_n (x_0 known)

    @property
    def n_params(self) -> int:
        return self.m_num + self.m_den


@dataclass
class NullspaceSystem:
    """``eta ~ Q theta`` for one node, plus the inverse covariance of eta."""

    node: int
    n: int
    blocks: List[ModuleBlock]
    Q: np.ndarray
    eta: np.ndarray
    P_inv: Optional[np.ndarray] = None

    @property
    def n_params(self) -> int:
        return self.Q.shape[1]

    def split(self, theta) -> List[Tuple[np.ndarray, np.ndarray]]:
        """Per module ``(den_tail, num_tail)``: (f_1..f_m, l_1..l_m) etc."""
        out, pos = [], 0
        for b in self.blocks:
            den = theta[pos:pos + b.m_den]
            num = theta[pos + b.m_den:pos + b.n_params]
            out.append((den, num))
            pos += b.n_params
        return out


def build_nullspace(node: int, eta_blocks: Sequence[Tuple[Module, np.ndarray]], n: int,
                    orders: BjOrders, x0: Optional[Mapping[Module, float]] = None,
                    P_inv=None) -> NullspaceSystem:
    """Assemble the null-space regression of one node.

    ``eta_blocks`` lists each module with its strictly causal high-order
    coefficients ``x_1..x_n``; ``x0`` gives known constant terms (zero for G
    modules). Each module contributes the block ``[-T(x) I]`` with T the
    n-by-m_den lower Toeplitz matrix of ``(x_0..x_{n-1})`` and target
    ``(x_1..x_n)``.
    """
    x0 = x0 or {}
    blocks, Qs, targets = [], [], []
    for module, coeffs in eta_blocks:
        coeffs = np.asarray(coeffs, float)
        if coeffs.size != n:
            raise DimensionError(f"module {module} has {coeffs.size} coefficients, expected {n}")
        m_num, m_den = orders.get(module)
        if n < m_num + m_den:
            raise DimensionError(f"order n={n} too small for module {module} "
                                 f"(needs at least {m_num + m_den})")
        c0 = 0.0 if module[0] == "G" else float(x0.get(module, 0.0))
        x = np.concatenate([[c0], coeffs])
        blocks.append(ModuleBlock(module, m_num, m_den, x))
        Qs.append(np.hstack([-toeplitz_lower(x[:n], n, m_den), identity_block(n, m_num)]))
        targets.append(coeffs)
    Q = linalg.block_diag(*Qs) if Qs else np.zeros((0, 0))
    eta = np.concatenate(targets) if targets else np.zeros(0)
    return NullspaceSystem(node, n, blocks, Q, eta, P_inv)


def _check_blocks(system: NullspaceSystem):
    pos = 0
    rows = 0
    for b in system.blocks:
        Qb = system.Q[rows:rows + system.n, pos:pos + b.n_params]
        if b.n_params and np.linalg.matrix_rank(Qb) < b.n_params:
            kind, j, c = b.module
            raise RankError(f"null-space block of module {kind}{j + 1}{c + 1} is rank deficient")
        pos += b.n_params
        rows += system.n


def _weighted_solve(Z, z, Winv_half_gram):
    A = Z.T @ Winv_half_gram @ Z
    rhs = Z.T @ Winv_half_gram @ z
    theta, cond, dropped = solve_gram(A, rhs)
    if dropped:
        raise RankError("weighted null-space normal matrix is singular")
    return theta


def initial_theta(system: NullspaceSystem, weighted: bool = True) -> np.ndarray:
    """Least-squares solution of ``eta ~ Q theta``.

    With ``weighted`` and a covariance available the residual is weighted by
    the inverse covariance of the high-order estimate.
    """
    _check_blocks(system)
    if system.n_params == 0:
        return np.zeros(0)
    M = system.P_inv if (weighted and system.P_inv is not None) else np.eye(len(system.eta))
    return _weighted_solve(system.Q, system.eta, M)


def den_toeplitz(system: NullspaceSystem, theta) -> np.ndarray:
    """Block diagonal of n-by-n lower Toeplitz matrices of the denominators."""
    mats = [toeplitz_lower(np.concatenate([[1.0], den]), system.n, system.n)
            for den, _ in system.split(theta)]
    return linalg.block_diag(*mats) if mats else np.zeros((0, 0))


def weighting(system: NullspaceSystem, theta, P_eta=None) -> np.ndarray:
    """``W = T^-T P^-1 T^-1`` with T the denominator Toeplitz blocks of theta.

    ``P_eta`` defaults to the inverse of ``system.P_inv``; only its inverse
    is ever needed.
    """
    Pinv = pinv_psd(np.asarray(P_eta, float)) if P_eta is not None else system.P_inv
    if Pinv is None:
        Pinv = np.eye(len(system.eta))
    T = den_toeplitz(system, theta)
    Tinv = linalg.solve_triangular(T, np.eye(T.shape[0]), lower=True)
    W = Tinv.T @ Pinv @ Tinv
    return 0.5 * (W + W.T)


@dataclass
class IterationLog:
    iterations: int
    converged: bool
    history: List[float]
    stopped: str = ""


def iterate_theta(system: NullspaceSystem, theta_init, tol: float = 1e-4,
                  max_iter: int = 50):
    """Reweighted null-space iterations from ``theta_init``.

    Each step solves ``min (eta - Q theta)^T W(theta_k) (eta - Q theta)``.
    Stops when ``||theta_k+1 - theta_k|| / ||theta_k|| < tol``; stops early,
    keeping the last good iterate, when a denominator Toeplitz matrix has
    condition number above 1e12. Returns ``(theta, IterationLog)``.
    """
    theta = np.asarray(theta_init, float).copy()
    if system.n_params == 0:
        return theta, IterationLog(0, True, [])
    Pinv = system.P_inv if system.P_inv is not None else np.eye(len(system.eta))
    history = []
    for k in range(1, max_iter + 1):
        T = den_toeplitz(system, theta)
        if np.linalg.cond(T) > T_COND_LIMIT:
            return theta, IterationLog(k - 1, False, history, "ill-conditioned denominator")
        Z = linalg.solve_triangular(T, system.Q, lower=True)
        z = linalg.solve_triangular(T, system.eta, lower=True)
        new = _weighted_solve(Z, z, Pinv)
        change = np.linalg.norm(new - theta) / max(np.linalg.norm(theta), 1e-300)
        history.append(float(change))
        theta = new
        if change < tol:
            return theta, IterationLog(k, True, history)
    return theta, IterationLog(max_iter, False, history, "iteration cap reached")


def nonparametric_covariance(design, sigma2: float) -> np.ndarray:
    """``sigma2 (Phi^T Phi)^-1``; pass either Phi or its Gram matrix."""
    design = np.asarray(design, float)
    gram = design if design.shape[0] == design.shape[1] and np.allclose(design, design.T) \
        else design.T @ design
    return sigma2 * pinv_psd(gram)


@dataclass
class BjEstimate:
    """Parametric estimate of every node.

    ``theta[j]`` stacks, per module of node j in order (G modules by
    neighbor, then H modules by channel), the denominator tail followed by
    the numerator tail. ``theta_init`` holds the non-iterated solution.
    """

    L: int
    p: int
    neighbors: Tuple[Tuple[int, ...], ...]
    noise_sets: Tuple[Tuple[int, ...], ...]
    orders: BjOrders
    gamma: np.ndarray
    theta: List[np.ndarray]
    theta_init: List[np.ndarray]
    logs: List[IterationLog]

    @property
    def modules(self) -> List[List[Module]]:
        return [[("G", j, l) for l in self.neighbors[j]] + [("H", j, s) for s in self.noise_sets[j]]
                for j in range(self.L)]

    def theta_vector(self, initial: bool = False) -> np.ndarray:
        parts = self.theta_init if initial else self.theta
        return np.concatenate(parts) if parts else np.zeros(0)

    @property
    def iterations(self) -> int:
        return max((lg.iterations for lg in self.logs), default=0)

    @property
    def converged(self) -> bool:
        return all(lg.converged for lg in self.logs)

    def transfer_functions(self, initial: bool = False) -> Dict[Module, RationalTF]:
        out = {}
        parts = self.theta_init if initial else self.theta
        for j, mods in enumerate(self.modules):
            pos = 0
            for mod in mods:
                m_num, m_den = self.orders.get(mod)
                den = parts[j][pos:pos + m_den]
                num = parts[j][pos + m_den:pos + m_den + m_num]
                pos += m_num + m_den
                c0 = 0.0 if mod[0] == "G" else feedthrough(j, mod[2], self.p, self.gamma)
                out[mod] = RationalTF(np.concatenate([[c0], num]), np.concatenate([[1.0], den]))
        return out

    def to_network_model(self, R, K: int, Lambda=None, name: str = "estimate") -> NetworkModel:
        tfs = self.transfer_functions()
        G = {(j, c): tf for (kind, j, c), tf in tfs.items() if kind == "G"}
        H = {(j, c): tf for (kind, j, c), tf in tfs.items() if kind == "H"}
        lam = np.eye(self.p) if Lambda is None else Lambda
        return NetworkModel(self.L, K, self.p, G, H, dict(R), lam, name)

    def iteration_log(self):
        return [{"node": j + 1, "k": lg.iterations, "converged": lg.converged,
                 "criterion": lg.history, "stopped": lg.stopped}
                for j, lg in enumerate(self.logs)]


def true_theta(model: NetworkModel, neighbors=None, noise_sets=None,
               orders: Optional[BjOrders] = None) -> np.ndarray:
    """Parameter vector of ``model`` in the :class:`BjEstimate` layout.

    Modules absent from the model but present in the given sets count as
    zero numerator with denominator 1 at the requested orders.
    """
    neighbors = model.neighbor_sets if neighbors is None else neighbors
    noise_sets = model.noise_sets if noise_sets is None else noise_sets
    orders = orders or BjOrders.from_model(model)
    parts = []
    for j in range(model.L):
        mods = [("G", l, model.G) for l in sorted(neighbors[j])] + \
               [("H", s, model.H) for s in sorted(noise_sets[j])]
        for kind, c, table in mods:
            m_num, m_den = orders.get((kind, j, c))
            tf = table.get((j, c))
            num = np.zeros(m_num)
            den = np.zeros(m_den)
            if tf is not None:
                if tf.num.degree > m_num or tf.den.degree > m_den:
                    raise ModelError(f"orders too small for module {kind}{j + 1}{c + 1}")
                num[:tf.num.degree] = tf.num.coeffs[1:]
                den[:tf.den.degree] = tf.den.coeffs[1:]
            parts += [den, num]
    return np.concatenate(parts) if parts else np.zeros(0)


def fit_wnsf(spm: StructuredPredictorModel, innov: InnovationEstimate, orders: BjOrders,
             weighted_init: bool = True, iterate: bool = True, tol: float = 1e-4,
             max_iter: int = 50, gamma=None) -> BjEstimate:
    """Parametric estimate from the refined structured predictor.

    ``innov`` is the innovation produced by the structured fit; its
    leading-versus-trailing regression gives Gamma (unless supplied), which
    fixes the constant terms of the H modules below row p.
    """
    p = innov.p
    L = len(spm.nodes)
    gamma = gamma_estimate(innov) if gamma is None else np.asarray(gamma, float)
    thetas, inits, logs = [], [], []
    for j, nf in enumerate(spm.nodes):
        eta_blocks, x0 = [], {}
        for kind, c in nf.groups:
            mod = (kind, j, c)
            eta_blocks.append((mod, nf.block(kind, c)))
            if kind == "H":
                x0[mod] = feedthrough(j, c, p, gamma)
        P_inv = nf.fit.gram / nf.sigma2 if nf.sigma2 > 0 else None
        system = build_nullspace(j, eta_blocks, spm.n, orders, x0, P_inv)
        th0 = initial_theta(system, weighted=weighted_init)
        if iterate:
            th, log = iterate_theta(system, th0, tol, max_iter)
        else:
            th, log = th0.copy(), IterationLog(0, True, [])
        thetas.append(th)
        inits.append(th0)
        logs.append(log)
    return BjEstimate(L, p, spm.neighbors, spm.noise_sets, orders, gamma, thetas, inits, logs)
