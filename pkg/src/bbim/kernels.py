"""Hot loops: sequential Bounce-Bind sweeps, the 32-bit LFSR, exhaustive
energy enumeration.

Every kernel is written once and compiled with numba when available.  With
``BBIM_DISABLE_NUMBA=1`` the same source runs as plain Python; results are
bit-identical because the uniform draws come from the same numpy
``Generator`` stream (numba implements the numpy algorithms) or from the
integer LFSR.  The only kernel with a genuinely different fallback is the
energy enumeration, which is vectorised with numpy when not jitted.
"""
import numpy as np

from ._jit import USE_NUMBA, njit

MODE_PORTABLE = 0
MODE_LFSR = 1

LFSR_MASK = 0xFFFFFFFF
LFSR_LOCKUP = 0xFFFFFFFF
# taps 32, 22, 2, 1 (1-indexed, bit 32 is the last stage) as zero-based shifts
_T32, _T22, _T2, _T1 = 31, 21, 1, 0
_U24 = 0xFFFFFF
_TWO24 = 16777216.0

LUT_SIZE = 64
LUT_STEP = 0.125


def tanh_lut_table() -> np.ndarray:
    """64-entry tanh table on |x| in [0, 8), 8 fractional bits per entry."""
    mid = (np.arange(LUT_SIZE) + 0.5) * LUT_STEP
    return np.round(np.tanh(mid) * 256.0) / 256.0


NO_LUT = np.zeros(0)


@njit(cache=True, nogil=True)
def lfsr_next(state):
    fb = ((state >> _T32) ^ (state >> _T22) ^ (state >> _T2) ^ (state >> _T1)) & 1
    return ((state << 1) & LFSR_MASK) | (fb ^ 1)


@njit(cache=True, nogil=True)
def lfsr_uniform(word):
    return (2.0 * (word & _U24) + 1.0) / _TWO24 - 1.0


@njit(cache=True, nogil=True)
def lfsr_fill(state, out):
    """Advance ``len(out)`` steps, storing each register value. Returns the last state."""
    for t in range(out.shape[0]):
        state = lfsr_next(state)
        out[t] = state
    return state


@njit(cache=True, nogil=True)
def lfsr_period(seed, limit):
    """Steps until the register returns to ``seed`` (or ``limit`` if it never does)."""
    state = seed
    for t in range(1, limit + 1):
        state = lfsr_next(state)
        if state == seed:
            return t
    return limit


@njit(cache=True, nogil=True)
def _tanh(x, lut):
    if lut.shape[0] == 0:
        return np.tanh(x)
    a = abs(x)
    k = int(a / LUT_STEP)
    v = 1.0 if k >= lut.shape[0] else lut[k]
    return v if x >= 0 else -v


@njit(cache=True, nogil=True)
def local_fields(indptr, nbr, nbr_w, tptr, tnbr, tnbr_w, h, spins):
    """Integer local fields (without the Bounce-Bind term) for every spin."""
    n = spins.shape[0]
    field = np.empty(n, dtype=np.int64)
    for i in range(n):
        f = h[i]
        for p in range(indptr[i], indptr[i + 1]):
            f += nbr_w[p] * spins[nbr[p]]
        for p in range(tptr[i], tptr[i + 1]):
            f += tnbr_w[p] * spins[tnbr[p, 0]] * spins[tnbr[p, 1]]
        field[i] = f
    return field


@njit(cache=True, nogil=True)
def total_energy(indptr, nbr, nbr_w, tptr, tnbr, tnbr_w, h, spins):
    """Exact integer energy numerator; pairs are seen twice and triples thrice."""
    n = spins.shape[0]
    e1 = 0
    e2 = 0
    e3 = 0
    for i in range(n):
        s = spins[i]
        e1 += h[i] * s
        for p in range(indptr[i], indptr[i + 1]):
            e2 += nbr_w[p] * s * spins[nbr[p]]
        for p in range(tptr[i], tptr[i + 1]):
            e3 += tnbr_w[p] * s * spins[tnbr[p, 0]] * spins[tnbr[p, 1]]
    return -e1 - e2 // 2 - e3 // 3


@njit(cache=True, nogil=True)
def _flip(i, indptr, nbr, nbr_w, tptr, tnbr, tnbr_w, field, spins):
    """Flip spin i, patch neighbour fields, return the energy change."""
    s = spins[i]
    d = -2 * s
    spins[i] = -s
    for p in range(indptr[i], indptr[i + 1]):
        field[nbr[p]] += nbr_w[p] * d
    for p in range(tptr[i], tptr[i + 1]):
        j = tnbr[p, 0]
        k = tnbr[p, 1]
        field[j] += tnbr_w[p] * d * spins[k]
        field[k] += tnbr_w[p] * d * spins[j]
    return 2 * s * field[i]


@njit(cache=True, nogil=True)
def sweep_kernel(indptr, nbr, nbr_w, tptr, tnbr, tnbr_w, inv_scale, field, spins,
                 beta, bb, mode, rng, lfsr, lut):
    """One ascending sequential sweep.

    Spin i becomes +1 iff tanh(beta * (I_i + bb * m_i)) >= u with u uniform on
    (-1, 1).  Returns (energy change numerator, LFSR state).
    """
    n = spins.shape[0]
    de = 0
    for i in range(n):
        s = spins[i]
        t = _tanh(beta * (field[i] * inv_scale + bb * s), lut)
        if mode == MODE_PORTABLE:
            u = 2.0 * rng.random() - 1.0
        else:
            lfsr = lfsr_next(lfsr)
            u = lfsr_uniform(lfsr)
        new = 1 if t >= u else -1
        if new != s:
            de += _flip(i, indptr, nbr, nbr_w, tptr, tnbr, tnbr_w, field, spins)
    return de, lfsr


CHECK_EVERY = 1024


@njit(cache=True, nogil=True)
def anneal_kernel(indptr, nbr, nbr_w, tptr, tnbr, tnbr_w, h, inv_scale, spins,
                  betas, sweeps_per_stage, bb, mode, rng, lfsr, lut, target, use_target):
    """One annealing pass with hitting-time termination.

    ``spins`` is updated in place.  Energies are integer numerators.
    Returns (hit, sweeps_used, best_energy, best_spins, lfsr_state).
    """
    field = local_fields(indptr, nbr, nbr_w, tptr, tnbr, tnbr_w, h, spins)
    e = total_energy(indptr, nbr, nbr_w, tptr, tnbr, tnbr_w, h, spins)
    best = e
    best_spins = spins.copy()
    if use_target and best <= target:
        return True, 0, best, best_spins, lfsr
    used = 0
    for stage in range(betas.shape[0]):
        beta = betas[stage]
        for _ in range(sweeps_per_stage):
            de, lfsr = sweep_kernel(indptr, nbr, nbr_w, tptr, tnbr, tnbr_w, inv_scale,
                                    field, spins, beta, bb, mode, rng, lfsr, lut)
            e += de
            used += 1
            if used % CHECK_EVERY == 0:
                if e != total_energy(indptr, nbr, nbr_w, tptr, tnbr, tnbr_w, h, spins):
                    raise RuntimeError("incremental energy drifted from full evaluation")
            if e < best:
                best = e
                best_spins[:] = spins
                if use_target and best <= target:
                    return True, used, best, best_spins, lfsr
    return False, used, best, best_spins, lfsr


@njit(cache=True, nogil=True)
def visit_kernel(indptr, nbr, nbr_w, tptr, tnbr, tnbr_w, h, inv_scale, spins,
                 beta, sweeps, bb, mode, rng, lfsr, lut, counts):
    """Fixed-beta sweeps, counting the state index (bit i set <=> m_i = +1) after each."""
    n = spins.shape[0]
    field = local_fields(indptr, nbr, nbr_w, tptr, tnbr, tnbr_w, h, spins)
    for _ in range(sweeps):
        de, lfsr = sweep_kernel(indptr, nbr, nbr_w, tptr, tnbr, tnbr_w, inv_scale,
                                field, spins, beta, bb, mode, rng, lfsr, lut)
        idx = 0
        for i in range(n):
            if spins[i] > 0:
                idx |= 1 << i
        counts[idx] += 1
    return lfsr


@njit(cache=True, nogil=True)
def _enumerate_gray(indptr, nbr, nbr_w, tptr, tnbr, tnbr_w, h):
    n = h.shape[0]
    total = 1 << n
    out = np.empty(total, dtype=np.int64)
    spins = -np.ones(n, dtype=np.int64)
    field = local_fields(indptr, nbr, nbr_w, tptr, tnbr, tnbr_w, h, spins)
    e = total_energy(indptr, nbr, nbr_w, tptr, tnbr, tnbr_w, h, spins)
    out[0] = e
    code = 0
    for k in range(1, total):
        # bit flipped between consecutive Gray codes = trailing zeros of k
        i = 0
        while not (k >> i) & 1:
            i += 1
        e += _flip(i, indptr, nbr, nbr_w, tptr, tnbr, tnbr_w, field, spins)
        code ^= 1 << i
        out[code] = e
    return out


def _enumerate_numpy(pair_idx, pair_w, h, triple_idx, triple_w, chunk=1 << 14):
    n = h.shape[0]
    total = 1 << n
    out = np.empty(total, dtype=np.int64)
    bits = np.arange(n, dtype=np.int64)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        m = ((idx[:, None] >> bits) & 1) * 2 - 1
        e = -(m @ h)
        if pair_w.size:
            e -= (m[:, pair_idx[:, 0]] * m[:, pair_idx[:, 1]]) @ pair_w
        if triple_w.size:
            t = triple_idx
            e -= (m[:, t[:, 0]] * m[:, t[:, 1]] * m[:, t[:, 2]]) @ triple_w
        out[start:start + idx.shape[0]] = e
    return out


def enumerate_energies(inst) -> np.ndarray:
    """Energy numerator of every state, indexed by bit pattern (bit i <=> m_i = +1)."""
    if USE_NUMBA:
        return _enumerate_gray(inst.indptr, inst.nbr, inst.nbr_w, inst.tptr, inst.tnbr,
                               inst.tnbr_w, inst.h)
    return _enumerate_numpy(inst.pair_idx, inst.pair_w, inst.h, inst.triple_idx, inst.triple_w)


def csr_args(inst):
    """Adjacency arrays in kernel argument order."""
    return inst.indptr, inst.nbr, inst.nbr_w, inst.tptr, inst.tnbr, inst.tnbr_w
