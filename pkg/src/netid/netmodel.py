"""Polynomials and rational filters in the delay operator, the network data
model and its time-domain simulation.

All coefficient vectors are stored in ascending powers of q^-1, so
``[c0, c1, c2]`` stands for ``c0 + c1 q^-1 + c2 q^-2``. Node, noise and
excitation indices are 0-based in code and 1-based in files and reports.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg, signal

from .exceptions import ModelError, SimulationError

DIVERGENCE_THRESHOLD = 1e12
DEFAULT_BURN_IN = 500


def _as_coeffs(c) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(c, dtype=float)).copy()
    if arr.ndim != 1 or arr.size == 0:
        raise ModelError("coefficient list must be a non-empty 1-D sequence")
    if not np.all(np.isfinite(arr)):
        raise ModelError("coefficients must be finite")
    arr.flags.writeable = False
    return arr


class Polynomial:
    """``c0 + c1 q^-1 + ... + cm q^-m``."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        self.coeffs = _as_coeffs(coeffs)

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    @property
    def is_monic(self) -> bool:
        return self.coeffs[0] == 1.0

    @property
    def is_strictly_proper(self) -> bool:
        return self.coeffs[0] == 0.0

    def __mul__(self, other: "Polynomial") -> "Polynomial":
        return Polynomial(np.convolve(self.coeffs, other.coeffs))

    def __add__(self, other: "Polynomial") -> "Polynomial":
        m = max(self.coeffs.size, other.coeffs.size)
        out = np.zeros(m)
        out[: self.coeffs.size] += self.coeffs
        out[: other.coeffs.size] += other.coeffs
        return Polynomial(out)

    def __neg__(self) -> "Polynomial":
        return Polynomial(-self.coeffs)

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return self + (-other)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Polynomial):
            return NotImplemented
        return np.array_equal(self.coeffs, other.coeffs)

    def __repr__(self) -> str:
        return f"Polynomial({self.coeffs.tolist()})"


class RationalTF:
    """Scalar transfer function ``num(q^-1) / den(q^-1)`` with monic ``den``."""

    __slots__ = ("num", "den")

    def __init__(self, num, den=(1.0,)):
        num = num if isinstance(num, Polynomial) else Polynomial(num)
        den = den if isinstance(den, Polynomial) else Polynomial(den)
        if not den.is_monic:
            raise ModelError(f"denominator must be monic, got {den.coeffs.tolist()}")
        self.num = num
        self.den = den

    @property
    def feedthrough(self) -> float:
        return float(self.num.coeffs[0])

    @property
    def is_strictly_proper(self) -> bool:
        return self.num.is_strictly_proper

    def poles(self) -> np.ndarray:
        # den(q^-1) = 1 + a1 q^-1 + ... ; the poles are the roots in z of
        # z^m + a1 z^(m-1) + ..., i.e. np.roots of the same coefficient list.
        return np.roots(self.den.coeffs) if self.den.degree > 0 else np.zeros(0)

    def is_stable(self) -> bool:
        return bool(np.all(np.abs(self.poles()) < 1.0))

    def impulse_response(self, n: int) -> np.ndarray:
        return impulse_response(self, n).coeffs

    def filter(self, u) -> np.ndarray:
        return filter_series(self, u)

    def minus_constant(self, c: float) -> "RationalTF":
        """``self - c`` as a rational function over the same denominator."""
        return RationalTF(self.num - Polynomial(c * self.den.coeffs), self.den)

    def __eq__(self, other) -> bool:
        if not isinstance(other, RationalTF):
            return NotImplemented
        return self.num == other.num and self.den == other.den

    def __repr__(self) -> str:
        return f"RationalTF({self.num.coeffs.tolist()}, {self.den.coeffs.tolist()})"


def filter_series(tf: RationalTF, u) -> np.ndarray:
    """Causal difference-equation response of ``tf`` to ``u``, zero initial state.

    Works along axis 0, so ``u`` may be a series or an (N, m) block.
    """
    u = np.asarray(u, dtype=float)
    if u.shape[0] == 0:
        raise ModelError("input series is empty")
    if not tf.den.is_monic:
        raise ModelError("denominator must be monic")
    return signal.lfilter(tf.num.coeffs, tf.den.coeffs, u, axis=0)


def impulse_response(tf: RationalTF, n: int) -> Polynomial:
    """First ``n`` coefficients of the power series of ``tf`` in q^-1."""
    if n < 1:
        raise ModelError("impulse response length must be >= 1")
    b = np.zeros(n)
    m = min(n, tf.num.coeffs.size)
    b[:m] = tf.num.coeffs[:m]
    a = tf.den.coeffs
    h = np.zeros(n)
    for k in range(n):
        acc = b[k]
        for i in range(1, min(k, a.size - 1) + 1):
            acc -= a[i] * h[k - i]
        h[k] = acc
    return Polynomial(h)


Entry = Tuple[int, int]


@dataclass(frozen=True)
class NetworkModel:
    """Network ``w = G w + R r + H e`` with ``cov(e) = Lambda``.

    ``G``, ``H`` and ``R`` are sparse maps from ``(row, column)`` to the
    present modules; absent keys are zero transfer functions.
    """

    L: int
    K: int
    p: int
    G: Dict[Entry, RationalTF]
    H: Dict[Entry, RationalTF]
    R: Dict[Entry, RationalTF]
    Lambda: np.ndarray
    name: str = ""

    def __post_init__(self):
        if self.L < 1 or self.K < 0 or not 0 <= self.p <= self.L:
            raise ModelError(f"invalid dimensions L={self.L}, K={self.K}, p={self.p}")
        for label, entries, ncols in (("G", self.G, self.L), ("H", self.H, self.p),
                                      ("R", self.R, self.K)):
            for (j, c), tf in entries.items():
                if not (0 <= j < self.L and 0 <= c < ncols):
                    raise ModelError(f"{label}[{j + 1}][{c + 1}] is out of range")
                if not isinstance(tf, RationalTF):
                    raise ModelError(f"{label}[{j + 1}][{c + 1}] is not a RationalTF")
        for (j, l), tf in self.G.items():
            if j == l:
                raise ModelError(f"G[{j + 1}][{l + 1}]: self-loops are not allowed")
            if not tf.is_strictly_proper:
                raise ModelError(f"G[{j + 1}][{l + 1}] must be strictly proper")
        lam = np.atleast_2d(np.asarray(self.Lambda, dtype=float))
        if self.p == 0:
            lam = np.zeros((0, 0))
        if lam.shape != (self.p, self.p):
            raise ModelError(f"Lambda must be {self.p}x{self.p}, got {lam.shape}")
        if not np.allclose(lam, lam.T, atol=1e-12):
            raise ModelError("Lambda must be symmetric")
        if lam.size and np.linalg.eigvalsh(lam).min() < -1e-12 * max(1.0, np.abs(lam).max()):
            raise ModelError("Lambda must be positive semidefinite")
        lam.flags.writeable = False
        object.__setattr__(self, "Lambda", lam)

    # ---- topology -------------------------------------------------------
    def neighbors(self, j: int) -> Tuple[int, ...]:
        return tuple(sorted(l for (row, l) in self.G if row == j))

    def noise_inputs(self, j: int) -> Tuple[int, ...]:
        return tuple(sorted(s for (row, s) in self.H if row == j))

    def excitations(self, j: int) -> Tuple[int, ...]:
        return tuple(sorted(k for (row, k) in self.R if row == j))

    @property
    def neighbor_sets(self) -> Tuple[Tuple[int, ...], ...]:
        return tuple(self.neighbors(j) for j in range(self.L))

    @property
    def noise_sets(self) -> Tuple[Tuple[int, ...], ...]:
        return tuple(self.noise_inputs(j) for j in range(self.L))

    def mask(self, which: str) -> np.ndarray:
        entries = {"G": (self.G, self.L), "H": (self.H, self.p), "R": (self.R, self.K)}
        d, ncols = entries[which]
        out = np.zeros((self.L, ncols), dtype=bool)
        for (j, c) in d:
            out[j, c] = True
        return out

    @property
    def gamma(self) -> np.ndarray:
        """Feedthrough of the rows ``p..L-1`` of H, an (L-p) x p matrix."""
        out = np.zeros((self.L - self.p, self.p))
        for (j, s), tf in self.H.items():
            if j >= self.p:
                out[j - self.p, s] = tf.feedthrough
        return out

    def rb_signals(self) -> Tuple[int, ...]:
        """Excitations that only enter nodes ``p..L-1`` (the known block of R)."""
        rows_of = {}
        for (j, k) in self.R:
            rows_of.setdefault(k, []).append(j)
        return tuple(sorted(k for k, rows in rows_of.items()
                            if all(j >= self.p for j in rows)))

    def permuted(self, perm: Sequence[int]) -> "NetworkModel":
        """Relabel nodes so that new node ``i`` is old node ``perm[i]``."""
        perm = list(perm)
        if sorted(perm) != list(range(self.L)):
            raise ModelError(f"not a permutation of 0..{self.L - 1}: {perm}")
        inv = {old: new for new, old in enumerate(perm)}
        G = {(inv[j], inv[l]): tf for (j, l), tf in self.G.items()}
        H = {(inv[j], s): tf for (j, s), tf in self.H.items()}
        R = {(inv[j], k): tf for (j, k), tf in self.R.items()}
        return NetworkModel(self.L, self.K, self.p, G, H, R, self.Lambda, self.name)

    def with_excitation(self, R: Dict[Entry, RationalTF], K: int) -> "NetworkModel":
        return NetworkModel(self.L, K, self.p, dict(self.G), dict(self.H), R,
                            self.Lambda, self.name)


@dataclass(frozen=True)
class Dataset:
    """Time-aligned node signals ``w`` (N, L), excitations ``r`` (N, K) and,
    for simulated data, the generating white noise ``e_true`` (N, p)."""

    w: np.ndarray
    r: np.ndarray
    e_true: Optional[np.ndarray] = None
    node_order: Tuple[int, ...] = field(default=())

    def __post_init__(self):
        w = np.atleast_2d(np.asarray(self.w, dtype=float))
        r = np.asarray(self.r, dtype=float)
        if r.ndim == 1:
            r = r[:, None]
        if r.size == 0:
            r = np.zeros((w.shape[0], 0))
        if r.shape[0] != w.shape[0]:
            raise ModelError("w and r must have the same number of samples")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "r", r)
        if self.e_true is not None:
            e = np.asarray(self.e_true, dtype=float)
            if e.ndim == 1:
                e = e[:, None]
            if e.shape[0] != w.shape[0]:
                raise ModelError("e_true must have the same number of samples as w")
            object.__setattr__(self, "e_true", e)
        order = tuple(self.node_order) or tuple(range(w.shape[1]))
        if sorted(order) != list(range(w.shape[1])):
            raise ModelError(f"node_order is not a permutation: {order}")
        object.__setattr__(self, "node_order", order)

    @property
    def N(self) -> int:
        return self.w.shape[0]

    @property
    def L(self) -> int:
        return self.w.shape[1]

    @property
    def K(self) -> int:
        return self.r.shape[1]

    def permuted(self, perm: Sequence[int]) -> "Dataset":
        perm = list(perm)
        if sorted(perm) != list(range(self.L)):
            raise ModelError(f"not a permutation of 0..{self.L - 1}: {perm}")
        order = tuple(self.node_order[i] for i in perm)
        return Dataset(self.w[:, perm], self.r, self.e_true, order)

    def head(self, n: int) -> "Dataset":
        e = None if self.e_true is None else self.e_true[:n]
        return Dataset(self.w[:n], self.r[:n], e, self.node_order)


def build_check_H(model: NetworkModel):
    """Square monic noise model ``[[H_a, 0], [H_b - Gamma, I]]``.

    Returned as an L x L nested list with ``None`` for zero entries. Nodes
    must already be ordered so that the top p x p block carries the noise.
    """
    L, p = model.L, model.p
    ft = np.zeros((p, p))
    for (j, s), tf in model.H.items():
        if j < p:
            ft[j, s] = tf.feedthrough
    if not np.array_equal(ft, np.eye(p)):
        raise ModelError("feedthrough of the leading p x p noise block is not the identity")
    gamma = model.gamma
    out = [[None] * L for _ in range(L)]
    for (j, s), tf in model.H.items():
        if j < p:
            out[j][s] = tf
        else:
            g = gamma[j - p, s]
            out[j][s] = tf.minus_constant(g) if g != 0.0 else tf
    for j in range(p, L):
        out[j][j] = RationalTF([1.0])
    return out


def check_lambda(model: NetworkModel) -> np.ndarray:
    """Covariance ``[I; Gamma] Lambda [I; Gamma]^T`` of the square-form noise."""
    M = np.vstack([np.eye(model.p), model.gamma])
    return M @ model.Lambda @ M.T


def noise_factor(Lambda: np.ndarray) -> np.ndarray:
    """Lower factor F with ``F F^T = Lambda``; Cholesky when definite."""
    Lambda = np.atleast_2d(Lambda)
    if Lambda.size == 0:
        return Lambda.copy()
    try:
        return linalg.cholesky(Lambda, lower=True)
    except linalg.LinAlgError:
        vals, vecs = np.linalg.eigh(Lambda)
        return vecs * np.sqrt(np.clip(vals, 0.0, None))


def _module_state_space(tf: RationalTF):
    """Controllable canonical form of a strictly proper SISO filter."""
    b = tf.num.coeffs
    a = tf.den.coeffs
    m = max(b.size, a.size) - 1
    if m == 0:
        return np.zeros((0, 0)), np.zeros(0), np.zeros(0)
    a = np.pad(a, (0, m + 1 - a.size))
    b = np.pad(b, (0, m + 1 - b.size))
    A = np.zeros((m, m))
    A[0, :] = -a[1:]
    A[1:, :-1] = np.eye(m - 1)
    B = np.zeros(m)
    B[0] = 1.0
    return A, B, b[1:].copy()


def _network_state_space(model: NetworkModel):
    blocks = [(j, l, *_module_state_space(tf)) for (j, l), tf in sorted(model.G.items())]
    nx = sum(blk[2].shape[0] for blk in blocks)
    A = np.zeros((nx, nx))
    B = np.zeros((nx, model.L))
    C = np.zeros((model.L, nx))
    i = 0
    for j, l, Am, Bm, Cm in blocks:
        m = Am.shape[0]
        A[i:i + m, i:i + m] = Am
        B[i:i + m, l] = Bm
        C[j, i:i + m] = Cm
        i += m
    return A, B, C


def simulate(model: NetworkModel, r, seed=None, burn_in: int = DEFAULT_BURN_IN,
             e=None) -> Dataset:
    """Simulate ``w = G w + R r + H e`` from zero initial conditions.

    ``r`` has ``N + burn_in`` rows; the first ``burn_in`` samples are
    discarded. White noise with covariance ``model.Lambda`` is drawn from
    ``numpy.random.default_rng(seed)`` unless ``e`` is supplied.
    """
    r = np.asarray(r, dtype=float)
    if r.ndim == 1:
        r = r[:, None]
    if model.K == 0 and r.size == 0:
        r = np.zeros((r.shape[0], 0))
    if r.shape[1] != model.K:
        raise ModelError(f"r has {r.shape[1]} columns, model has K={model.K}")
    T = r.shape[0]
    if T <= burn_in:
        raise ModelError(f"r must be longer than the burn-in ({burn_in} samples)")
    if e is None:
        rng = np.random.default_rng(seed)
        e = rng.standard_normal((T, model.p)) @ noise_factor(model.Lambda).T
    else:
        e = np.asarray(e, dtype=float).reshape(T, model.p)

    s = np.zeros((T, model.L))
    for (j, k), tf in model.R.items():
        s[:, j] += filter_series(tf, r[:, k])
    for (j, c), tf in model.H.items():
        s[:, j] += filter_series(tf, e[:, c])

    if model.G:
        A, B, C = _network_state_space(model)
        Acl = A + B @ C
        drive = s @ B.T
        X = np.empty((T, A.shape[0]))
        x = np.zeros(A.shape[0])
        with np.errstate(over="ignore", invalid="ignore"):
            for t in range(T):
                X[t] = x
                x = Acl @ x + drive[t]
            w = X @ C.T + s
    else:
        w = s
    if not np.all(np.isfinite(w)) or np.abs(w).max(initial=0.0) > DIVERGENCE_THRESHOLD:
        raise SimulationError("node signals diverged; the closed loop is not stable")
    return Dataset(w[burn_in:], r[burn_in:], e[burn_in:])


def simulate_experiment(model: NetworkModel, N: int, seed=None, r_variance: float = 5.0,
                        burn_in: int = DEFAULT_BURN_IN) -> Dataset:
    """White Gaussian excitation of variance ``r_variance`` plus simulation.

    Excitation and noise come from independent children of one seed, so the
    same seed always reproduces the same dataset.
    """
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    r_seq, e_seq = ss.spawn(2)
    r = np.sqrt(r_variance) * np.random.default_rng(r_seq).standard_normal((N + burn_in, model.K))
    return simulate(model, r, seed=e_seq, burn_in=burn_in)
