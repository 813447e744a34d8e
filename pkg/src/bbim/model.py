"""Ising instances and energies (classical, Bounce-Bind, third order).

Couplings are stored as exact integers sharing one denominator ``scale``, so
every energy is an exact rational and hitting-time checks never suffer from
rounding.  Pairs are kept as ``i < j`` and triples as ``i < j < k``; the
symmetric expansion lives in CSR-style adjacency arrays built once at
construction and consumed by the kernels.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "DimensionError",
    "InstanceFormatError",
    "IsingInstance",
    "BounceBindParam",
    "quantize_bb",
    "as_spins",
    "energy",
    "energy_bb",
    "local_field",
    "flip_delta",
    "format_instance",
    "parse_instance",
    "read_instance",
    "write_instance",
    "BB_STEP",
    "BB_MIN",
    "BB_MAX",
]

# s[2][3] fixed point: sign bit, two integer bits, three fraction bits.
BB_STEP = Fraction(1, 8)
BB_MIN = Fraction(-4)
BB_MAX = Fraction(31, 8)


class DimensionError(ValueError):
    """State length does not match the instance."""


class InstanceFormatError(ValueError):
    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


def _to_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, Rational):
        return Fraction(x.numerator, x.denominator)
    if isinstance(x, str):
        return Fraction(x.strip())
    # floats: go through repr so 0.1 stays 1/10
    return Fraction(repr(float(x)))


def _common_scale(values: Iterable[Fraction]) -> int:
    scale = 1
    for v in values:
        scale = scale * v.denominator // math.gcd(scale, v.denominator)
    return scale


@dataclass(frozen=True, eq=False)
class IsingInstance:
    """Second-order Ising model with optional third-order hyperedges.

    ``pair_idx``/``pair_w``, ``h`` and ``triple_idx``/``triple_w`` hold
    integer numerators; the physical value is numerator / ``scale``.
    Use :meth:`build` to construct from rational coefficients.
    """

    n: int
    pair_idx: np.ndarray
    pair_w: np.ndarray
    h: np.ndarray
    triple_idx: np.ndarray
    triple_w: np.ndarray
    scale: int = 1
    # derived adjacency (CSR), filled in __post_init__
    indptr: np.ndarray = field(init=False, repr=False)
    nbr: np.ndarray = field(init=False, repr=False)
    nbr_w: np.ndarray = field(init=False, repr=False)
    tptr: np.ndarray = field(init=False, repr=False)
    tnbr: np.ndarray = field(init=False, repr=False)
    tnbr_w: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n = int(self.n)
        if n <= 0:
            raise ValueError("an instance needs at least one spin")
        if int(self.scale) <= 0:
            raise ValueError("scale must be a positive integer")
        pidx = np.asarray(self.pair_idx, dtype=np.int64).reshape(-1, 2)
        pw = np.asarray(self.pair_w, dtype=np.int64).reshape(-1)
        h = np.asarray(self.h, dtype=np.int64).reshape(-1)
        tidx = np.asarray(self.triple_idx, dtype=np.int64).reshape(-1, 3)
        tw = np.asarray(self.triple_w, dtype=np.int64).reshape(-1)
        if h.shape[0] != n:
            raise DimensionError(f"field vector has length {h.shape[0]}, expected {n}")
        if pidx.shape[0] != pw.shape[0] or tidx.shape[0] != tw.shape[0]:
            raise ValueError("index and weight arrays differ in length")
        for idx, name in ((pidx, "pair"), (tidx, "triple")):
            if idx.size and (idx.min() < 0 or idx.max() >= n):
                raise IndexError(f"{name} index out of range [0, {n})")
            if idx.shape[0] and np.any(np.diff(idx, axis=1) <= 0):
                raise ValueError(f"{name} indices must be strictly increasing")
            if idx.shape[0] != np.unique(idx, axis=0).shape[0]:
                raise ValueError(f"duplicate {name}")
        for name, arr in (("n", n), ("pair_idx", pidx), ("pair_w", pw), ("h", h),
                          ("triple_idx", tidx), ("triple_w", tw), ("scale", int(self.scale))):
            if isinstance(arr, np.ndarray):
                arr.setflags(write=False)
            object.__setattr__(self, name, arr)

        # pair adjacency: spin i sees (j, J_ij) for every pair mentioning it
        rows = np.concatenate([pidx[:, 0], pidx[:, 1]])
        cols = np.concatenate([pidx[:, 1], pidx[:, 0]])
        ws = np.concatenate([pw, pw])
        order = np.lexsort((cols, rows))
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=n), out=indptr[1:])
        # triple adjacency: spin i sees (j, k, J_ijk) for every triple mentioning it
        trow = tidx.T.reshape(-1)
        tpart = np.concatenate([tidx[:, [1, 2]], tidx[:, [0, 2]], tidx[:, [0, 1]]])
        tws = np.concatenate([tw, tw, tw])
        torder = np.argsort(trow, kind="stable")
        tptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(trow, minlength=n), out=tptr[1:])
        derived = {
            "indptr": indptr,
            "nbr": np.ascontiguousarray(cols[order]),
            "nbr_w": np.ascontiguousarray(ws[order]),
            "tptr": tptr,
            "tnbr": np.ascontiguousarray(tpart[torder].reshape(-1, 2)),
            "tnbr_w": np.ascontiguousarray(tws[torder]),
        }
        for name, arr in derived.items():
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def build(cls, n: int, pairs: Iterable[Sequence] = (), fields: Sequence | None = None,
              triples: Iterable[Sequence] = ()) -> "IsingInstance":
        """Build from rational coefficients.

        Pairs may be given in either index order; they are canonicalised to
        ``i < j``.  Zero weights are dropped.
        """
        pairs = [(int(p[0]), int(p[1]), _to_fraction(p[2])) for p in pairs]
        triples = [(int(t[0]), int(t[1]), int(t[2]), _to_fraction(t[3])) for t in triples]
        hf = [Fraction(0)] * n if fields is None else [_to_fraction(v) for v in fields]
        if len(hf) != n:
            raise DimensionError(f"field vector has length {len(hf)}, expected {n}")
        scale = _common_scale([w for *_, w in pairs] + [w for *_, w in triples] + hf)

        def num(v: Fraction) -> int:
            return int(v * scale)

        pp = []
        for i, j, w in pairs:
            if i == j:
                raise ValueError(f"self-coupling on spin {i}")
            if w != 0:
                pp.append((min(i, j), max(i, j), num(w)))
        tt = []
        for i, j, k, w in triples:
            if len({i, j, k}) != 3:
                raise ValueError(f"triple ({i}, {j}, {k}) repeats a spin")
            if w != 0:
                a, b, c = sorted((i, j, k))
                tt.append((a, b, c, num(w)))
        return cls(
            n=n,
            pair_idx=np.array([p[:2] for p in pp], dtype=np.int64).reshape(-1, 2),
            pair_w=np.array([p[2] for p in pp], dtype=np.int64),
            h=np.array([num(v) for v in hf], dtype=np.int64),
            triple_idx=np.array([t[:3] for t in tt], dtype=np.int64).reshape(-1, 3),
            triple_w=np.array([t[3] for t in tt], dtype=np.int64),
            scale=scale,
        )

    # rational views -------------------------------------------------------
    @property
    def pairs(self) -> list[tuple[int, int, Fraction]]:
        return [(int(i), int(j), Fraction(int(w), self.scale))
                for (i, j), w in zip(self.pair_idx, self.pair_w)]

    @property
    def triples(self) -> list[tuple[int, int, int, Fraction]]:
        return [(int(i), int(j), int(k), Fraction(int(w), self.scale))
                for (i, j, k), w in zip(self.triple_idx, self.triple_w)]

    @property
    def fields(self) -> list[Fraction]:
        return [Fraction(int(v), self.scale) for v in self.h]

    @property
    def has_triples(self) -> bool:
        return self.triple_w.shape[0] > 0

    def degree(self) -> np.ndarray:
        """Number of distinct neighbours of each spin (pairs and triples)."""
        nb = [set() for _ in range(self.n)]
        for i, j in self.pair_idx:
            nb[i].add(int(j))
            nb[j].add(int(i))
        for i, j, k in self.triple_idx:
            nb[i].update((int(j), int(k)))
            nb[j].update((int(i), int(k)))
            nb[k].update((int(i), int(j)))
        return np.array([len(s) for s in nb], dtype=np.int64)

    def coupling_matrix(self) -> np.ndarray:
        """Dense symmetric J (rational values as float). Small n only."""
        J = np.zeros((self.n, self.n))
        for (i, j), w in zip(self.pair_idx, self.pair_w):
            J[i, j] = J[j, i] = w / self.scale
        return J

    def to_rational(self, numerator: int) -> Fraction | int:
        if self.scale == 1:
            return int(numerator)
        return Fraction(int(numerator), self.scale)

    def scaled_threshold(self, value) -> int:
        """Largest integer numerator e with e / scale <= value."""
        return math.floor(_to_fraction(value) * self.scale)


@dataclass(frozen=True)
class BounceBindParam:
    """Bounce-Bind parameter. ``quantized`` restricts it to s[2][3] fixed point."""

    value: float = 0.0
    quantized: bool = False

    def __post_init__(self):
        v = float(self.value)
        if self.quantized:
            q = quantize_bb(v)
            if q != v:
                raise ValueError(f"{v} is not representable in s[2][3]; nearest is {q}")
        object.__setattr__(self, "value", v)

    def __float__(self):
        return self.value

    @property
    def fraction(self) -> Fraction:
        return Fraction(self.value)


def quantize_bb(x: float) -> float:
    """Nearest multiple of 1/8 in [-4, 3.875]; ties go toward -inf."""
    f = _to_fraction(x) / BB_STEP
    lo = math.floor(f)
    k = lo if f - lo <= Fraction(1, 2) else lo + 1
    q = Fraction(k) * BB_STEP
    if q < BB_MIN or q > BB_MAX:
        raise ValueError(f"{x} is outside the s[2][3] range [-4, 3.875]")
    return float(q)


def _bb_value(bb) -> float:
    if bb is None:
        return 0.0
    return float(bb.value) if isinstance(bb, BounceBindParam) else float(bb)


def as_spins(state, n: int | None = None) -> np.ndarray:
    """Validate a spin vector (entries exactly -1 or +1) and return it as int8."""
    s = np.asarray(state)
    if s.ndim != 1:
        raise DimensionError("spin state must be one-dimensional")
    if n is not None and s.shape[0] != n:
        raise DimensionError(f"state has length {s.shape[0]}, instance has {n} spins")
    if not np.all((s == 1) | (s == -1)):
        raise ValueError("spins must be -1 or +1")
    return s.astype(np.int8, copy=False)


def _energy_num(inst: IsingInstance, m: np.ndarray) -> int:
    m = m.astype(np.int64)
    e = -int(inst.h @ m)
    if inst.pair_w.size:
        e -= int(inst.pair_w @ (m[inst.pair_idx[:, 0]] * m[inst.pair_idx[:, 1]]))
    if inst.triple_w.size:
        t = inst.triple_idx
        e -= int(inst.triple_w @ (m[t[:, 0]] * m[t[:, 1]] * m[t[:, 2]]))
    return e


def energy(instance: IsingInstance, state) -> Fraction | int:
    """Ising energy -sum J3 mmm - sum J mm - sum h m (exact)."""
    m = as_spins(state, instance.n)
    return instance.to_rational(_energy_num(instance, m))


def energy_bb(instance: IsingInstance, state, bb) -> Fraction:
    """Energy including the Bounce-Bind term, a constant -B*n/2 for binary spins."""
    e = Fraction(energy(instance, state))
    return e - Fraction(_bb_value(bb)) * instance.n / 2


def _field_num(inst: IsingInstance, m: np.ndarray, i: int) -> int:
    lo, hi = inst.indptr[i], inst.indptr[i + 1]
    f = int(inst.h[i]) + int(inst.nbr_w[lo:hi] @ m[inst.nbr[lo:hi]].astype(np.int64))
    lo, hi = inst.tptr[i], inst.tptr[i + 1]
    if hi > lo:
        pj = m[inst.tnbr[lo:hi, 0]].astype(np.int64)
        pk = m[inst.tnbr[lo:hi, 1]].astype(np.int64)
        f += int(inst.tnbr_w[lo:hi] @ (pj * pk))
    return f


def _check_index(inst: IsingInstance, i) -> int:
    i = int(i)
    if not 0 <= i < inst.n:
        raise IndexError(f"spin index {i} out of range [0, {inst.n})")
    return i


def local_field(instance: IsingInstance, state, bb, i: int) -> Fraction:
    """Bounce-Bind local field sum J3 m m + sum J m + h_i + B*m_i."""
    m = as_spins(state, instance.n)
    i = _check_index(instance, i)
    base = Fraction(_field_num(instance, m, i), instance.scale)
    return base + Fraction(_bb_value(bb)) * int(m[i])


def flip_delta(instance: IsingInstance, state, i: int) -> Fraction | int:
    """Energy change from flipping spin i, using local couplings only."""
    m = as_spins(state, instance.n)
    i = _check_index(instance, i)
    return instance.to_rational(2 * int(m[i]) * _field_num(instance, m, i))


# -- text format -------------------------------------------------------------

def _fmt(num: int, scale: int) -> str:
    v = Fraction(int(num), scale)
    return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"


def format_instance(instance: IsingInstance, comment: str | None = None) -> str:
    lines = []
    if comment:
        lines.extend(f"# {c}" for c in comment.splitlines())
    lines.append(f"n {instance.n}")
    s = instance.scale
    for i, v in enumerate(instance.h):
        if v:
            lines.append(f"h {i} {_fmt(v, s)}")
    for (i, j), w in zip(instance.pair_idx, instance.pair_w):
        lines.append(f"p {i} {j} {_fmt(w, s)}")
    for (i, j, k), w in zip(instance.triple_idx, instance.triple_w):
        lines.append(f"t {i} {j} {k} {_fmt(w, s)}")
    return "\n".join(lines) + "\n"


_NUM = re.compile(r"^[+-]?(\d+(/\d+)?|\d*\.\d+|\d+\.\d*)$")


def parse_instance(text: str) -> IsingInstance:
    """Parse the ``n``/``p``/``t``/``h`` text format (zero-based indices)."""
    n = None
    pairs, triples, fields = [], [], {}
    seen_p, seen_t = set(), set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        kind, args = tok[0], tok[1:]
        arity = {"n": 1, "p": 3, "t": 4, "h": 2}.get(kind)
        if arity is None:
            raise InstanceFormatError(f"unknown record type {kind!r}", lineno)
        if len(args) != arity:
            raise InstanceFormatError(f"{kind!r} expects {arity} fields, got {len(args)}", lineno)
        if kind == "n":
            if n is not None:
                raise InstanceFormatError("repeated header", lineno)
            try:
                n = int(args[0])
            except ValueError:
                raise InstanceFormatError(f"bad spin count {args[0]!r}", lineno) from None
            if n <= 0:
                raise InstanceFormatError("spin count must be positive", lineno)
            continue
        if n is None:
            raise InstanceFormatError("missing 'n <count>' header before records", lineno)
        try:
            idx = [int(a) for a in args[:-1]]
        except ValueError:
            raise InstanceFormatError("indices must be integers", lineno) from None
        if not _NUM.match(args[-1]):
            raise InstanceFormatError(f"bad coefficient {args[-1]!r}", lineno)
        val = _to_fraction(args[-1])
        if any(not 0 <= k < n for k in idx):
            raise InstanceFormatError(f"index out of range [0, {n})", lineno)
        if kind == "h":
            if idx[0] in fields:
                raise InstanceFormatError(f"duplicate field for spin {idx[0]}", lineno)
            fields[idx[0]] = val
        elif kind == "p":
            key = tuple(sorted(idx))
            if key[0] == key[1] or key in seen_p:
                raise InstanceFormatError(f"invalid or duplicate pair {key}", lineno)
            seen_p.add(key)
            pairs.append((*key, val))
        else:
            key = tuple(sorted(idx))
            if len(set(key)) != 3 or key in seen_t:
                raise InstanceFormatError(f"invalid or duplicate triple {key}", lineno)
            seen_t.add(key)
            triples.append((*key, val))
    if n is None:
        raise InstanceFormatError("missing 'n <count>' header")
    h = [fields.get(i, Fraction(0)) for i in range(n)]
    return IsingInstance.build(n, pairs, h, triples)


def read_instance(path) -> IsingInstance:
    path = Path(path)
    try:
        return parse_instance(path.read_text())
    except InstanceFormatError as exc:
        err = InstanceFormatError(f"{path}: {exc}")
        err.lineno = exc.lineno
        raise err from None


def write_instance(instance: IsingInstance, path, comment: str | None = None) -> None:
    Path(path).write_text(format_instance(instance, comment))
