"""Exact Markov-chain analysis of sequential Bounce-Bind updates on small instances.

States are integers: bit i is spin i, with -1 -> 0 and +1 -> 1.  Matrices
are dense and row-stochastic, and act on row vectors (pi' = pi P).
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.special import expit
from scipy.sparse.csgraph import connected_components

from . import kernels as K
from .model import IsingInstance, _bb_value

__all__ = [
    "SizeError",
    "TransitionMatrix",
    "StateDistribution",
    "MAX_MATRIX_SPINS",
    "MAX_DISTRIBUTION_SPINS",
    "MAX_BRUTE_FORCE_SPINS",
    "state_spins",
    "state_index",
    "single_spin_kernel",
    "sweep_kernel",
    "stationary",
    "closed_classes",
    "transient",
    "boltzmann",
    "all_energies",
    "brute_force_ground",
    "total_variation",
    "demo_instance",
    "matrix_to_csv",
    "distributions_to_csv",
    "read_matrix_csv",
]

MAX_MATRIX_SPINS = 12
MAX_DISTRIBUTION_SPINS = 20
MAX_BRUTE_FORCE_SPINS = 24


class SizeError(ValueError):
    """Instance too large for exhaustive treatment."""


@dataclass
class TransitionMatrix:
    P: np.ndarray

    def __post_init__(self):
        P = np.asarray(self.P, dtype=np.float64)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise ValueError("transition matrix must be square")
        self.P = P

    @property
    def dim(self) -> int:
        return self.P.shape[0]

    def is_stochastic(self, tol: float = 1e-12) -> bool:
        return bool(np.all(self.P >= 0) and np.all(self.P <= 1)
                    and np.allclose(self.P.sum(axis=1), 1.0, rtol=0, atol=tol))


@dataclass
class StateDistribution:
    """Probability vector over the 2**n states.

    ``kind`` is one of stationary, empirical, boltzmann, transient.
    ``unique`` is False when the chain has more than one closed class; a
    stationary vector then exists but P alone does not determine it.
    """

    probs: np.ndarray
    kind: str
    t: int | None = None
    unique: bool = True
    converged: bool = True
    iterations: int = 0

    @property
    def degenerate(self) -> bool:
        return not (self.unique and self.converged)


def _check(inst: IsingInstance, cap: int):
    if inst.n > cap:
        raise SizeError(f"n={inst.n} exceeds the exhaustive limit of {cap} spins")


def state_spins(n: int) -> np.ndarray:
    """(2**n, n) array of spins for every state index."""
    idx = np.arange(1 << n, dtype=np.int64)
    return ((idx[:, None] >> np.arange(n)) & 1) * 2 - 1


def state_index(spins) -> int:
    s = np.asarray(spins)
    return int(((s > 0).astype(np.int64) << np.arange(s.shape[0])).sum())


def _fields_all(inst: IsingInstance) -> np.ndarray:
    """Integer local fields (no B term) of every spin in every state, (2**n, n)."""
    M = state_spins(inst.n)
    F = np.tile(inst.h, (M.shape[0], 1))
    for (i, j), w in zip(inst.pair_idx, inst.pair_w):
        F[:, i] += w * M[:, j]
        F[:, j] += w * M[:, i]
    for (i, j, k), w in zip(inst.triple_idx, inst.triple_w):
        F[:, i] += w * M[:, j] * M[:, k]
        F[:, j] += w * M[:, i] * M[:, k]
        F[:, k] += w * M[:, i] * M[:, j]
    return F


def _up_probs(inst: IsingInstance, bb, beta: float) -> tuple[np.ndarray, np.ndarray]:
    """(P(spin i -> +1 | s), P(spin i -> -1 | s)), each of shape (2**n, n).

    (1 + tanh x) / 2 equals expit(2x).  Evaluating both tails through expit
    keeps tiny transition probabilities accurate to relative precision, which
    matters for the stationary law of stiff chains.
    """
    M = state_spins(inst.n)
    x = beta * (_fields_all(inst) / inst.scale + _bb_value(bb) * M)
    return expit(2.0 * x), expit(-2.0 * x)


def single_spin_kernel(instance: IsingInstance, bb, beta: float, i: int) -> TransitionMatrix:
    """Resample spin i only; from s, bit i becomes 1 w.p. (1 + tanh(beta I_BB,i(s))) / 2."""
    _check(instance, MAX_MATRIX_SPINS)
    if not 0 <= i < instance.n:
        raise IndexError(f"spin index {i} out of range")
    dim = 1 << instance.n
    up, down = _up_probs(instance, bb, beta)
    s = np.arange(dim)
    P = np.zeros((dim, dim))
    P[s, s | (1 << i)] = up[:, i]
    P[s, s & ~(1 << i)] = down[:, i]
    return TransitionMatrix(P)


def _apply_spin(P: np.ndarray, up_i: np.ndarray, down_i: np.ndarray, i: int) -> np.ndarray:
    """P @ K_i without forming K_i (two nonzeros per row)."""
    s = np.arange(P.shape[0])
    bit = 1 << i
    lo = s[(s & bit) == 0]
    hi = lo | bit
    out = np.empty_like(P)
    out[:, hi] = P[:, lo] * up_i[lo] + P[:, hi] * up_i[hi]
    out[:, lo] = P[:, lo] * down_i[lo] + P[:, hi] * down_i[hi]
    return out


def sweep_kernel(instance: IsingInstance, bb, beta: float) -> TransitionMatrix:
    """K_0 K_1 ... K_{n-1}: one ascending sequential sweep, K_0 acting first."""
    _check(instance, MAX_MATRIX_SPINS)
    up, down = _up_probs(instance, bb, beta)
    P = np.eye(1 << instance.n)
    for i in range(instance.n):
        P = _apply_spin(P, up[:, i], down[:, i], i)
    return TransitionMatrix(P)


NEGLIGIBLE = 1e-30


def closed_classes(P: np.ndarray, negligible: float = NEGLIGIBLE) -> int:
    """Number of closed communicating classes of the chain (1 <=> unique stationary law).

    Transitions below ``negligible`` count as absent: over any horizon the
    solver can cover they are never taken, so e.g. B = +-64 splits the chain.
    """
    G = csr_matrix(P > negligible)
    ncomp, labels = connected_components(G, directed=True, connection="strong")
    # a class is closed if no edge leaves it
    rows, cols = G.nonzero()
    leaks = np.zeros(ncomp, dtype=bool)
    leaks[labels[rows][labels[rows] != labels[cols]]] = True
    return int(np.count_nonzero(~leaks))


def stationary(P, tol: float = 1e-12, max_iter: int = 1_000_000,
               plain_iter: int = 100, max_horizon: int = 2**60) -> StateDistribution:
    """Solve pi P = pi by power iteration from the uniform vector.

    Each step averages pi P with pi P^2 (a window of two iterates) to damp
    period-2 oscillation.  After ``plain_iter`` single steps without
    convergence the step matrix is squared repeatedly, so the number of chain
    steps covered doubles per iteration.  ``max_iter`` bounds iterations
    performed and ``max_horizon`` the chain steps covered; hitting either
    leaves ``converged=False``.  Chains with more than one closed class are
    flagged ``unique=False``.
    """
    P = P.P if isinstance(P, TransitionMatrix) else np.asarray(P, dtype=np.float64)
    dim = P.shape[0]
    pi = np.full(dim, 1.0 / dim)
    Q = P
    step = 1
    horizon = 0
    converged = False
    for it in range(1, max_iter + 1):
        a = pi @ Q
        nxt = 0.5 * (a + a @ Q)
        horizon += step
        nxt /= nxt.sum()
        diff = np.max(np.abs(nxt - pi))
        pi = nxt
        if diff < tol:
            converged = True
            break
        if horizon >= max_horizon:
            break
        if it >= plain_iter:
            Q = Q @ Q
            Q /= Q.sum(axis=1, keepdims=True)  # squaring amplifies row-sum rounding
            step *= 2
    return StateDistribution(pi, "stationary", unique=closed_classes(P) == 1,
                             converged=converged, iterations=horizon)


def transient(P, initial, t: int) -> StateDistribution:
    """initial @ P**t."""
    P = P.P if isinstance(P, TransitionMatrix) else np.asarray(P, dtype=np.float64)
    pi = initial.probs if isinstance(initial, StateDistribution) else np.asarray(initial, float)
    pi = pi.astype(np.float64, copy=True)
    for _ in range(int(t)):
        pi = pi @ P
    return StateDistribution(pi, "transient", t=int(t))


def all_energies(instance: IsingInstance) -> np.ndarray:
    """Integer energy numerator of every state."""
    _check(instance, MAX_BRUTE_FORCE_SPINS)
    return K.enumerate_energies(instance)


def boltzmann(instance: IsingInstance, beta: float) -> StateDistribution:
    """exp(-beta E) / Z over all states; B is absent since it only shifts E."""
    _check(instance, MAX_DISTRIBUTION_SPINS)
    e = all_energies(instance) / instance.scale
    w = np.exp(-beta * (e - e.min()))
    return StateDistribution(w / w.sum(), "boltzmann")


def brute_force_ground(instance: IsingInstance):
    """(minimum energy, array of minimising spin vectors) by exhaustive enumeration."""
    e = all_energies(instance)
    emin = int(e.min())
    idx = np.flatnonzero(e == emin)
    states = (((idx[:, None] >> np.arange(instance.n)) & 1) * 2 - 1).astype(np.int8)
    return instance.to_rational(emin), states


def total_variation(p, q) -> float:
    p = p.probs if isinstance(p, StateDistribution) else np.asarray(p, float)
    q = q.probs if isinstance(q, StateDistribution) else np.asarray(q, float)
    return 0.5 * float(np.abs(p - q).sum())


def demo_instance() -> IsingInstance:
    """Stand-in 3-spin instance for the transition-matrix demos: all J = 1, h = (1, 0, -1)."""
    return IsingInstance.build(3, [(0, 1, 1), (1, 2, 1), (0, 2, 1)], [1, 0, -1])


# -- CSV export ------------------------------------------------------------------

def _state_label(s: int, n: int) -> str:
    # most significant spin first, matching the <abc> labels of the demos
    return format(s, f"0{n}b")


def matrix_to_csv(P, n: int) -> str:
    P = P.P if isinstance(P, TransitionMatrix) else np.asarray(P)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    labels = [_state_label(s, n) for s in range(P.shape[0])]
    w.writerow(["from\\to", *labels])
    for s, row in enumerate(P):
        w.writerow([labels[s], *(repr(float(x)) for x in row)])
    return buf.getvalue()


def read_matrix_csv(text: str) -> np.ndarray:
    rows = list(csv.reader(io.StringIO(text)))
    return np.array([[float(x) for x in r[1:]] for r in rows[1:]])


def distributions_to_csv(dists: dict[str, StateDistribution], n: int) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    names = list(dists)
    w.writerow(["state", "index", *names])
    for s in range(1 << n):
        w.writerow([_state_label(s, n), s, *(repr(float(dists[k].probs[s])) for k in names)])
    return buf.getvalue()
