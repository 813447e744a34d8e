"""Benchmark encoders: MAX-CUT (random dense graphs, Gset files) and
3-regular 3-XORSAT (second-order gadget and native third-order form).

Boolean to spin convention: x = 0 -> m = +1, x = 1 -> m = -1, so the clause
x_i ^ x_j ^ x_k = b reads m_i m_j m_k = (-1)**b.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .model import IsingInstance, InstanceFormatError, as_spins, energy

__all__ = [
    "MaxCutGraph",
    "XorsatInstance",
    "GadgetParams",
    "GADGET_A",
    "GADGET_B",
    "GenerationError",
    "maxcut_to_ising",
    "cut_value",
    "cut_value_direct",
    "gen_erdos_renyi",
    "parse_gset",
    "format_gset",
    "read_gset",
    "gen_3r3x",
    "xorsat_to_second_order",
    "xorsat_to_third_order",
    "format_xorsat",
    "parse_xorsat",
    "spins_to_bits",
    "bits_to_spins",
]


class GenerationError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class MaxCutGraph:
    n_vertices: int
    edges: np.ndarray  # (m, 3) int64 rows (u, v, w), u < v

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 3)
        n = int(self.n_vertices)
        if n < 1:
            raise ValueError("graph needs at least one vertex")
        if e.shape[0]:
            if np.any(e[:, 0] >= e[:, 1]):
                raise ValueError("edges must satisfy u < v")
            if e[:, :2].min() < 0 or e[:, :2].max() >= n:
                raise IndexError("edge endpoint out of range")
            if np.any(e[:, 2] == 0):
                raise ValueError("edge weights must be nonzero")
            if np.unique(e[:, :2], axis=0).shape[0] != e.shape[0]:
                raise ValueError("duplicate edge")
        e.setflags(write=False)
        object.__setattr__(self, "n_vertices", n)
        object.__setattr__(self, "edges", e)

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Sequence[int]]) -> "MaxCutGraph":
        rows = [(min(u, v), max(u, v), w) for u, v, w in edges]
        return cls(n, np.array(rows, dtype=np.int64).reshape(-1, 3))

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    @property
    def total_weight(self) -> int:
        return int(self.edges[:, 2].sum())


def maxcut_to_ising(graph: MaxCutGraph) -> IsingInstance:
    """J_uv = -w_uv, no fields: E(m) = sum w_uv m_u m_v."""
    e = graph.edges
    return IsingInstance(
        n=graph.n_vertices,
        pair_idx=e[:, :2].copy(),
        pair_w=-e[:, 2],
        h=np.zeros(graph.n_vertices, dtype=np.int64),
        triple_idx=np.zeros((0, 3), dtype=np.int64),
        triple_w=np.zeros(0, dtype=np.int64),
    )


def cut_value(graph: MaxCutGraph, state) -> int:
    """Cut from the Ising energy: -E/2 + (1/4) * sum_ij w_ij (symmetric sum)."""
    m = as_spins(state, graph.n_vertices)
    e = int(energy(maxcut_to_ising(graph), m))
    num = -2 * e + 2 * graph.total_weight  # 4 * cut
    assert num % 4 == 0
    return num // 4


def cut_value_direct(graph: MaxCutGraph, state) -> int:
    m = as_spins(state, graph.n_vertices)
    e = graph.edges
    return int(e[m[e[:, 0]] != m[e[:, 1]], 2].sum())


def gen_erdos_renyi(n: int, density: float = 0.5, weight_set: Sequence[int] = (1,),
                    seed: int = 0) -> MaxCutGraph:
    """G(n, density) with weights drawn uniformly from ``weight_set``."""
    if n < 2:
        raise ValueError("need n >= 2")
    ws = np.asarray(list(weight_set), dtype=np.int64)
    if ws.size == 0 or np.any(ws == 0):
        raise ValueError("weight_set must be nonempty and exclude 0")
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, 1)
    keep = rng.random(iu.size) < density
    w = ws[rng.integers(0, ws.size, size=int(keep.sum()))]
    return MaxCutGraph(n, np.column_stack([iu[keep], ju[keep], w]))


def parse_gset(text: str) -> MaxCutGraph:
    """Gset / rudy format: ``n m`` header then ``u v w`` lines, 1-indexed."""
    lines = [(k, ln.split()) for k, ln in enumerate(text.splitlines(), 1) if ln.strip()]
    if not lines:
        raise InstanceFormatError("empty Gset text")
    k0, head = lines[0]
    if len(head) != 2:
        raise InstanceFormatError("header must be 'n_vertices n_edges'", k0)
    try:
        n, m = int(head[0]), int(head[1])
    except ValueError:
        raise InstanceFormatError("non-integer header", k0) from None
    body = lines[1:]
    if len(body) != m:
        raise InstanceFormatError(f"header declares {m} edges, found {len(body)}")
    rows = np.empty((m, 3), dtype=np.int64)
    seen = set()
    for r, (k, tok) in enumerate(body):
        if len(tok) != 3:
            raise InstanceFormatError("edge line must be 'u v w'", k)
        try:
            u, v, w = (int(t) for t in tok)
        except ValueError:
            raise InstanceFormatError("non-integer edge field", k) from None
        if not (1 <= u <= n and 1 <= v <= n) or u == v:
            raise InstanceFormatError(f"vertex out of range or self-loop: {u} {v}", k)
        if w == 0:
            raise InstanceFormatError("zero edge weight", k)
        key = (min(u, v), max(u, v))
        if key in seen:
            raise InstanceFormatError(f"duplicate edge {u} {v}", k)
        seen.add(key)
        rows[r] = key[0] - 1, key[1] - 1, w
    return MaxCutGraph(n, rows)


def read_gset(path) -> MaxCutGraph:
    return parse_gset(Path(path).read_text())


def format_gset(graph: MaxCutGraph) -> str:
    out = [f"{graph.n_vertices} {graph.n_edges}"]
    out += [f"{u + 1} {v + 1} {w}" for u, v, w in graph.edges]
    return "\n".join(out) + "\n"


# -- 3R3X ----------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class XorsatInstance:
    n_vars: int
    clauses: np.ndarray  # (n, 3) sorted variable indices
    parity: np.ndarray  # (n,) in {0, 1}
    planted: np.ndarray | None = field(default=None)

    def __post_init__(self):
        c = np.asarray(self.clauses, dtype=np.int64).reshape(-1, 3)
        b = np.asarray(self.parity, dtype=np.int64).reshape(-1)
        n = int(self.n_vars)
        if c.shape[0] != n or b.shape[0] != n:
            raise ValueError("a 3R3X instance has exactly n clauses")
        if n and (c.min() < 0 or c.max() >= n):
            raise IndexError("variable index out of range")
        if np.any(np.diff(c, axis=1) <= 0):
            raise ValueError("clause variables must be distinct and sorted")
        if np.any(np.bincount(c.ravel(), minlength=n) != 3):
            raise ValueError("every variable must appear in exactly 3 clauses")
        if np.any((b != 0) & (b != 1)):
            raise ValueError("parity bits must be 0 or 1")
        for name, arr in (("clauses", c), ("parity", b)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.planted is not None:
            x = np.asarray(self.planted, dtype=np.int64).reshape(-1)
            x.setflags(write=False)
            object.__setattr__(self, "planted", x)
        object.__setattr__(self, "n_vars", n)

    def satisfied(self, bits) -> np.ndarray:
        x = np.asarray(bits, dtype=np.int64)
        return (x[self.clauses].sum(axis=1) & 1) == self.parity


def spins_to_bits(spins) -> np.ndarray:
    return (np.asarray(spins) < 0).astype(np.int64)


def bits_to_spins(bits) -> np.ndarray:
    return (1 - 2 * np.asarray(bits, dtype=np.int64)).astype(np.int8)


def gen_3r3x(n: int, seed: int = 0, planted: bool = True, max_tries: int = 1000) -> XorsatInstance:
    """Uniform 3-regular clause/variable incidence by permuting 3n stubs.

    Permutations that put a variable twice in a clause, or repeat a clause,
    are rejected whole.
    """
    if n < 4:
        raise ValueError("3-regular 3-XORSAT needs n >= 4")
    rng = np.random.default_rng(seed)
    stubs = np.repeat(np.arange(n, dtype=np.int64), 3)
    for _ in range(max_tries):
        c = np.sort(rng.permutation(stubs).reshape(n, 3), axis=1)
        if np.any(np.diff(c, axis=1) == 0):
            continue
        if np.unique(c, axis=0).shape[0] != n:
            continue
        break
    else:
        raise GenerationError(f"no simple 3-regular incidence after {max_tries} tries")
    if planted:
        x = rng.integers(0, 2, size=n)
        b = x[c].sum(axis=1) & 1
        return XorsatInstance(n, c, b, x)
    return XorsatInstance(n, c, rng.integers(0, 2, size=n), None)


@dataclass(frozen=True)
class GadgetParams:
    """Coefficients of the one-auxiliary 3-XOR gadget.

    Clause cost ``h_s*S + h_a*a + J_s*P + J_a*S*a`` with S the sum of the
    three data spins, P the sum of their pairwise products and a the auxiliary
    spin.  Both legal choices reach -4 exactly on the even-parity assignments.
    """

    h_s: int = -1
    h_a: int = -2
    J_s: int = 1
    J_a: int = 2

    def __post_init__(self):
        if (self.h_s, self.h_a, self.J_s, self.J_a) not in ((-1, -2, 1, 2), (-1, 2, 1, -2)):
            raise ValueError("gadget must be (-1, -2, 1, 2) or (-1, 2, 1, -2)")


GADGET_A = GadgetParams(-1, -2, 1, 2)
GADGET_B = GadgetParams(-1, 2, 1, -2)


def xorsat_to_second_order(inst: XorsatInstance, params: GadgetParams = GADGET_A) -> IsingInstance:
    """2n spins: data spins 0..n-1, auxiliary spin of clause c is n + c.

    Odd-parity clauses negate every term touching their first literal
    (gauge m -> -m), which moves the -4 minimum onto the odd assignments.
    Contributions from different clauses to a shared coefficient are summed.
    """
    n = inst.n_vars
    h = np.zeros(2 * n, dtype=np.int64)
    J: dict[tuple[int, int], int] = {}

    def add(i, j, w):
        key = (i, j) if i < j else (j, i)
        J[key] = J.get(key, 0) + w

    for c, ((a, b, d), par) in enumerate(zip(inst.clauses, inst.parity)):
        aux = n + c
        sign = {int(a): -1 if par else 1, int(b): 1, int(d): 1}
        # Ising E = -sum J m m - sum h m, so each cost coefficient enters negated
        for v, g in sign.items():
            h[v] += -params.h_s * g
            add(v, aux, -params.J_a * g)
        h[aux] += -params.h_a
        for u, v in ((a, b), (a, d), (b, d)):
            add(int(u), int(v), -params.J_s * sign[int(u)] * sign[int(v)])
    pairs = sorted((i, j, w) for (i, j), w in J.items() if w != 0)
    return IsingInstance(
        n=2 * n,
        pair_idx=np.array([p[:2] for p in pairs], dtype=np.int64).reshape(-1, 2),
        pair_w=np.array([p[2] for p in pairs], dtype=np.int64),
        h=h,
        triple_idx=np.zeros((0, 3), dtype=np.int64),
        triple_w=np.zeros(0, dtype=np.int64),
    )


def xorsat_to_third_order(inst: XorsatInstance) -> IsingInstance:
    """One triple per clause with J3 = (-1)**b; ground energy -n when satisfiable."""
    return IsingInstance(
        n=inst.n_vars,
        pair_idx=np.zeros((0, 2), dtype=np.int64),
        pair_w=np.zeros(0, dtype=np.int64),
        h=np.zeros(inst.n_vars, dtype=np.int64),
        triple_idx=inst.clauses.copy(),
        triple_w=1 - 2 * inst.parity,
    )


def format_xorsat(inst: XorsatInstance) -> str:
    out = [f"x {inst.n_vars}"]
    out += [f"c {i} {j} {k} {b}" for (i, j, k), b in zip(inst.clauses, inst.parity)]
    if inst.planted is not None:
        out.append("# planted " + "".join(str(int(v)) for v in inst.planted))
    return "\n".join(out) + "\n"


def parse_xorsat(text: str) -> XorsatInstance:
    n = None
    clauses, parity, planted = [], [], None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if line.startswith("# planted"):
            planted = [int(ch) for ch in line.split()[-1]]
            continue
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        try:
            if tok[0] == "x" and len(tok) == 2:
                n = int(tok[1])
            elif tok[0] == "c" and len(tok) == 5:
                i, j, k, b = (int(t) for t in tok[1:])
                clauses.append(sorted((i, j, k)))
                parity.append(b)
            else:
                raise InstanceFormatError(f"unrecognised record {line!r}", lineno)
        except ValueError as exc:
            if isinstance(exc, InstanceFormatError):
                raise
            raise InstanceFormatError("non-integer field", lineno) from None
    if n is None:
        raise InstanceFormatError("missing 'x <n>' header")
    try:
        return XorsatInstance(n, np.array(clauses, dtype=np.int64).reshape(-1, 3),
                              np.array(parity, dtype=np.int64), planted)
    except (ValueError, IndexError) as exc:
        raise InstanceFormatError(str(exc)) from None
