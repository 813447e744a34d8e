from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bbim.model import (BB_MAX, BB_MIN, BounceBindParam, DimensionError, InstanceFormatError,
                        IsingInstance, as_spins, energy, energy_bb, flip_delta, format_instance,
                        local_field, parse_instance, quantize_bb, read_instance)

from conftest import all_states, instances, naive_energy, random_instance

TRIANGLE_CUT = IsingInstance.build(3, [(0, 1, -1), (1, 2, -1), (0, 2, -1)])


def spins_for(inst, data):
    return np.array(data.draw(st.lists(st.sampled_from((-1, 1)), min_size=inst.n,
                                       max_size=inst.n)))


# -- energy ---------------------------------------------------------------------

@pytest.mark.parametrize("inst, state, expected", [
    (IsingInstance.build(1, [], [1]), [1], -1),
    (TRIANGLE_CUT, [1, 1, -1], -1),
    (IsingInstance.build(3, [], None, [(0, 1, 2, 1)]), [1, 1, 1], -1),
])
def test_energy_examples(inst, state, expected):
    assert energy(inst, state) == expected


def test_energy_bb_examples():
    inst = IsingInstance.build(3, [], None, [(0, 1, 2, 1)])
    assert energy_bb(inst, [1, 1, 1], BounceBindParam(1.0)) == Fraction(-5, 2)
    assert energy_bb(inst, [1, 1, 1], BounceBindParam(0.0)) == energy(inst, [1, 1, 1])


@settings(max_examples=150, deadline=None)
@given(instances(rational=True), st.data())
def test_energy_matches_naive_sum(inst, data):
    m = spins_for(inst, data)
    assert energy(inst, m) == naive_energy(inst, m)


@settings(max_examples=100, deadline=None)
@given(instances(), st.data(), st.sampled_from([-4, -1.5, -0.125, 0, 0.5, 3.875]))
def test_bb_shift_is_state_independent(inst, data, bb):
    m = spins_for(inst, data)
    shift = energy_bb(inst, m, BounceBindParam(bb)) - energy(inst, m)
    assert shift == -Fraction(bb) * inst.n / 2


def test_argmin_set_is_bb_invariant(rng):
    inst = random_instance(rng, 6, triples=3)
    states = all_states(6)
    ref = None
    for bb in (-2.0, 0.0, 1.5):
        e = [energy_bb(inst, s, BounceBindParam(bb)) for s in states]
        arg = {k for k, v in enumerate(e) if v == min(e)}
        ref = arg if ref is None else ref
        assert arg == ref


# -- local field and flips ---------------------------------------------------------

def test_local_field_examples():
    assert local_field(IsingInstance.build(1, [], [2]), [1], 0.0, 0) == 2
    assert local_field(IsingInstance.build(2, [(0, 1, 1)]), [1, 1], -1.0, 0) == 0
    tri = IsingInstance.build(3, [], None, [(0, 1, 2, 1)])
    assert local_field(tri, [1, -1, 1], 0.0, 0) == -1


def test_flip_delta_examples():
    assert flip_delta(IsingInstance.build(1, [], [1]), [1], 0) == 2
    before = [1, 1, -1]
    after = [1, 1, 1]
    assert flip_delta(TRIANGLE_CUT, before, 2) == energy(TRIANGLE_CUT, after) - energy(TRIANGLE_CUT, before)


@settings(max_examples=200, deadline=None)
@given(instances(rational=True), st.data())
def test_flip_delta_matches_reevaluation(inst, data):
    m = spins_for(inst, data)
    i = data.draw(st.integers(0, inst.n - 1))
    flipped = m.copy()
    flipped[i] = -flipped[i]
    full = naive_energy(inst, flipped) - naive_energy(inst, m)
    assert flip_delta(inst, m, i) == full
    # discrete derivative of the energy is 2 m_i times the B-free field
    assert full == 2 * m[i] * local_field(inst, m, 0.0, i)


@settings(max_examples=60, deadline=None)
@given(instances(), st.data(), st.sampled_from([-1.0, 0.5, 2.0]))
def test_local_field_bb_term(inst, data, bb):
    m = spins_for(inst, data)
    i = data.draw(st.integers(0, inst.n - 1))
    assert local_field(inst, m, bb, i) - local_field(inst, m, 0.0, i) == Fraction(bb) * m[i]


def test_flip_delta_thousand_random_cases():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        n = int(rng.integers(1, 9))
        inst = random_instance(rng, n, triples=int(rng.integers(0, 4)))
        m = rng.choice((-1, 1), size=n)
        i = int(rng.integers(n))
        f = m.copy()
        f[i] *= -1
        assert flip_delta(inst, m, i) == naive_energy(inst, f) - naive_energy(inst, m)


# -- validation -----------------------------------------------------------------------

def test_dimension_and_index_errors():
    with pytest.raises(DimensionError):
        energy(TRIANGLE_CUT, [1, 1])
    with pytest.raises(IndexError):
        local_field(TRIANGLE_CUT, [1, 1, 1], 0.0, 3)
    with pytest.raises(IndexError):
        flip_delta(TRIANGLE_CUT, [1, 1, 1], -1)
    with pytest.raises(ValueError):
        as_spins([1, 0, 1])


@pytest.mark.parametrize("bad", [
    dict(n=0, pairs=[]),
    dict(n=2, pairs=[(0, 0, 1)]),
    dict(n=2, pairs=[(0, 2, 1)]),
    dict(n=3, pairs=[(0, 1, 1), (1, 0, 2)]),
    dict(n=3, pairs=[], triples=[(0, 1, 1, 1)]),
])
def test_build_rejects_bad_instances(bad):
    with pytest.raises((ValueError, IndexError)):
        IsingInstance.build(bad["n"], bad["pairs"], None, bad.get("triples", ()))


def test_isolated_spins_allowed_and_instance_immutable():
    inst = IsingInstance.build(4, [(0, 1, 1)])
    assert list(inst.degree()) == [1, 1, 0, 0]
    with pytest.raises(ValueError):
        inst.h[0] = 3


def test_adjacency_matches_couplings(rng):
    inst = random_instance(rng, 7, triples=4)
    for i in range(inst.n):
        got = {(int(j), int(w)) for j, w in zip(inst.nbr[inst.indptr[i]:inst.indptr[i + 1]],
                                                inst.nbr_w[inst.indptr[i]:inst.indptr[i + 1]])}
        want = {(b if a == i else a, int(w)) for (a, b), w in zip(inst.pair_idx, inst.pair_w)
                if i in (a, b)}
        assert got == want
        tri = {(tuple(sorted(map(int, p))), int(w)) for p, w in
               zip(inst.tnbr[inst.tptr[i]:inst.tptr[i + 1]], inst.tnbr_w[inst.tptr[i]:inst.tptr[i + 1]])}
        want_t = {(tuple(x for x in t if x != i), int(w)) for t, w in
                  zip(map(tuple, inst.triple_idx.tolist()), inst.triple_w) if i in t}
        assert tri == want_t


# -- Bounce-Bind quantization ---------------------------------------------------------

@pytest.mark.parametrize("x, q", [
    (0.0, 0.0), (0.06, 0.0), (0.0625, 0.0), (0.0626, 0.125), (-0.0625, -0.125),
    (0.1875, 0.125), (-1.0, -1.0), (3.9, 3.875), (-4.0, -4.0), (-3.9375, -4.0),
])
def test_quantize_ties_toward_minus_infinity(x, q):
    assert quantize_bb(x) == q


@given(st.integers(-32, 31))
def test_quantized_grid_round_trips(k):
    v = k / 8
    assert quantize_bb(v) == v
    assert BounceBindParam(v, quantized=True).value == v


@given(st.floats(float(BB_MIN), float(BB_MAX)))
def test_quantize_is_nearest(x):
    q = quantize_bb(x)
    assert abs(q - x) <= 1 / 16
    assert (q * 8) == int(q * 8)


def test_quantized_rejects_off_grid_and_out_of_range():
    with pytest.raises(ValueError):
        BounceBindParam(0.3, quantized=True)
    with pytest.raises(ValueError):
        BounceBindParam(4.0, quantized=True)
    with pytest.raises(ValueError):
        quantize_bb(-4.0625)  # tie goes down to -4.125, off the grid
    assert BounceBindParam(64.0).value == 64.0


# -- text format ------------------------------------------------------------------------

@settings(max_examples=80, deadline=None)
@given(instances(rational=True))
def test_format_parse_round_trip(inst):
    back = parse_instance(format_instance(inst, "round trip"))
    assert back.n == inst.n
    assert back.pairs == inst.pairs and back.triples == inst.triples
    assert back.fields == inst.fields


def test_parse_accepts_comments_and_decimals():
    inst = parse_instance("# demo\nn 3\np 0 1 0.5  # half\nh 2 -1/4\nt 0 1 2 2\n")
    assert inst.pairs == [(0, 1, Fraction(1, 2))]
    assert inst.fields[2] == Fraction(-1, 4)
    assert inst.triples == [(0, 1, 2, Fraction(2))]


@pytest.mark.parametrize("text, line", [
    ("p 0 1 1\n", 1),
    ("n 2\np 0 1\n", 2),
    ("n 2\np 0 5 1\n", 2),
    ("n 2\n\np 0 1 x\n", 3),
    ("n 2\np 0 1 1\np 1 0 2\n", 3),
    ("n 3\nq 0 1\n", 2),
    ("n 3\nn 3\n", 2),
])
def test_parse_errors_carry_line_numbers(text, line):
    with pytest.raises(InstanceFormatError) as exc:
        parse_instance(text)
    assert exc.value.lineno == line
    assert f"line {line}" in str(exc.value)


def test_read_instance_keeps_line_number(tmp_path):
    p = tmp_path / "bad.ising"
    p.write_text("n 2\nh 0 1\nh 0 2\n")
    with pytest.raises(InstanceFormatError) as exc:
        read_instance(p)
    assert exc.value.lineno == 3 and str(p) in str(exc.value)
