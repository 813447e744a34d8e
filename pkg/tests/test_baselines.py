import itertools
import math

import numpy as np
import pytest
from scipy.optimize import minimize

from bbim.baselines import (GW_RATIO, PUBLISHED_CUTS, GeometricSchedule, LowRankEmbedding,
                            bm_optimize, gw_round, hyperplane_cuts, load_embedding,
                            save_embedding, sa_solve, sdp_objective)
from bbim.dynamics import AnnealSchedule, DynamicsConfig, run_trial
from bbim.model import BounceBindParam
from bbim.problems import MaxCutGraph, cut_value, gen_erdos_renyi, maxcut_to_ising

EDGE = MaxCutGraph.from_edges(2, [(0, 1, 1)])
TRIANGLE = MaxCutGraph.from_edges(3, [(0, 1, 1), (1, 2, 1), (0, 2, 1)])


def brute_max_cut(g):
    best = 0
    for bits in itertools.product((-1, 1), repeat=g.n_vertices - 1):
        m = np.array((1,) + bits)
        best = max(best, int(g.edges[m[g.edges[:, 0]] != m[g.edges[:, 1]], 2].sum()))
    return best


def planar_triangle_sdp():
    """Best SDP value for the triangle with vectors restricted to a plane."""
    def neg(angles):
        a = np.concatenate([[0.0], angles])
        return -sum((1 - math.cos(a[i] - a[j])) / 2 for i, j in ((0, 1), (1, 2), (0, 2)))
    return -minimize(neg, [1.0, 3.0], method="Nelder-Mead",
                     options=dict(xatol=1e-12, fatol=1e-14, maxiter=5000)).fun


# -- simulated annealing ------------------------------------------------------------

def test_sa_single_edge():
    r = sa_solve(EDGE, sweeps=64, seed=1, target_cut=1)
    assert r.success and cut_value(EDGE, r.best_state) == 1 and r.sweeps_used <= 8


def test_sa_triangle():
    r = sa_solve(TRIANGLE, sweeps=256, seed=2)
    assert cut_value(TRIANGLE, r.best_state) == 2


def test_sa_deterministic():
    g = gen_erdos_renyi(30, seed=3)
    a, b = sa_solve(g, sweeps=512, seed=4), sa_solve(g, sweeps=512, seed=4)
    assert a.same_outcome(b)


def test_sa_is_the_bb_zero_engine():
    g = gen_erdos_renyi(20, seed=5)
    sched = AnnealSchedule.for_budget(256)
    for seed in range(5):
        a = sa_solve(g, sched, seed=seed)
        b = run_trial(maxcut_to_ising(g), DynamicsConfig(bb=BounceBindParam(0.0), schedule=sched,
                                                         seed=seed))
        assert a.same_outcome(b)


def test_geometric_schedule():
    s = GeometricSchedule.for_budget(320)
    b = s.betas()
    assert b.size == 32 and b[0] == pytest.approx(0.1) and b[-1] == pytest.approx(4.0)
    assert np.allclose(b[1:] / b[:-1], (40) ** (1 / 31))
    assert s.total_sweeps == 320
    with pytest.raises(ValueError):
        GeometricSchedule(beta0=0)


# -- Burer-Monteiro -------------------------------------------------------------------

def test_single_edge_antipodal():
    emb = bm_optimize(EDGE, seed=1)
    assert emb.objective == pytest.approx(1.0, abs=1e-9)
    assert float(emb.vectors[0] @ emb.vectors[1]) == pytest.approx(-1.0, abs=1e-8)


def test_triangle_sdp_value():
    assert planar_triangle_sdp() == pytest.approx(2.25, abs=1e-9)
    for seed in range(5):
        emb = bm_optimize(TRIANGLE, seed=seed)
        assert abs(emb.objective - 2.25) < 1e-6
        G = emb.vectors @ emb.vectors.T
        assert np.allclose(G[np.triu_indices(3, 1)], -0.5, atol=1e-4)  # 120 degrees


def test_unit_rows_and_rank():
    g = gen_erdos_renyi(32, seed=6)
    emb = bm_optimize(g, seed=7)
    assert emb.rank == math.ceil(math.sqrt(64))
    assert np.allclose(np.linalg.norm(emb.vectors, axis=1), 1, atol=1e-8)
    assert emb.objective == pytest.approx(sdp_objective(g, emb.vectors), rel=1e-12)
    with pytest.raises(ValueError):
        bm_optimize(g, rank=1)


def test_ascent_is_monotone():
    for seed in range(4):
        emb = bm_optimize(gen_erdos_renyi(24, 0.4, (1, 2, 3), seed=seed), seed=seed)
        h = np.array(emb.history)
        assert np.all(np.diff(h) >= 0)
        assert emb.converged


def test_iteration_cap_flags_nonconvergence():
    emb = bm_optimize(gen_erdos_renyi(40, seed=8), iterations=3, seed=0)
    assert not emb.converged and emb.iterations == 3


def test_empty_graph():
    emb = bm_optimize(MaxCutGraph(4, np.zeros((0, 3), dtype=np.int64)))
    assert emb.objective == 0 and emb.converged


def test_relaxation_dominates_roundings():
    # when the relaxation is exact the ascent creeps up sublinearly, so the
    # bound holds to the optimizer's relative accuracy rather than exactly
    for seed in range(20):
        g = gen_erdos_renyi(int(6 + seed % 10), 0.5, (1, 2), seed=seed)
        emb = bm_optimize(g, seed=seed)
        best, _ = gw_round(emb, g, rounds=200, seed=seed)
        slack = 1e-8 * emb.objective
        assert emb.objective >= best - slack
        assert emb.objective >= brute_max_cut(g) - slack


# -- rounding -----------------------------------------------------------------------

def test_antipodal_rounding_always_cuts():
    emb = LowRankEmbedding(np.array([[1.0, 0.0], [-1.0, 0.0]]))
    cuts, _ = hyperplane_cuts(emb, EDGE, rounds=500, seed=1)
    assert np.all(cuts == 1)


def test_triangle_best_round_is_two():
    emb = bm_optimize(TRIANGLE, seed=0)
    best, state = gw_round(emb, TRIANGLE, rounds=100, seed=3)
    assert best == 2 and cut_value(TRIANGLE, state) == 2


def test_round_values_match_cut_value():
    g = gen_erdos_renyi(18, 0.5, (-1, 1, 2), seed=9)
    emb = bm_optimize(g, seed=1)
    cuts, S = hyperplane_cuts(emb, g, rounds=50, seed=2)
    for c, s in zip(cuts, S):
        assert c == cut_value(g, s)


def test_average_round_meets_gw_bound():
    for seed in range(10):
        g = gen_erdos_renyi(8 + seed, 0.5, (1, 2), seed=100 + seed)
        emb = bm_optimize(g, seed=seed)
        cuts, _ = hyperplane_cuts(emb, g, rounds=400, seed=seed)
        slack = 3 * cuts.std(ddof=1) / math.sqrt(cuts.size)
        assert cuts.mean() >= GW_RATIO * emb.objective - slack


def test_embedding_file_round_trip(tmp_path):
    emb = bm_optimize(gen_erdos_renyi(10, seed=1), seed=2)
    p = tmp_path / "e.bin"
    save_embedding(emb, p)
    back = load_embedding(p)
    assert np.array_equal(back.vectors, emb.vectors)
    raw = p.read_bytes()
    assert raw[:6] == b"BBEMB1" and len(raw) == 16 + 8 * emb.vectors.size
    p.write_bytes(raw[:-8])
    with pytest.raises(ValueError):
        load_embedding(p)
    p.write_bytes(b"nonsense" * 4)
    with pytest.raises(ValueError):
        load_embedding(p)


def test_reference_table():
    assert PUBLISHED_CUTS["G22"]["best_known"] == 13359
    assert PUBLISHED_CUTS["K2000"]["bbim_best"] == 35732
    assert PUBLISHED_CUTS["K2000"]["gw_sdp"] == 26957
