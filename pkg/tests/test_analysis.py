import json
import math

import numpy as np
import pytest

from hyperheat import (
    Hypergraph,
    f_interval,
    g_v,
    h_v,
    kappa,
    min_conductance_bruteforce,
    solve_exact,
    verify_corollary_1_2,
    verify_theorem_1_1,
)
from hyperheat.analysis import (
    f_interval_forms,
    f_log_derivative,
    g_v_finite_difference,
)
from conftest import seeded_instance


@pytest.fixture
def two_vertex_traj(two_vertex):
    return solve_exact(two_vertex, two_vertex.pi_vertex(0), t_end=3.0)


# -- decay rate -----------------------------------------------------------------


def test_g_two_vertex_closed_form(two_vertex, two_vertex_traj):
    # squared distance is e^{-4t}/2, so the negative log-derivative is 4
    for T in (0.1, 0.5, 1.5):
        assert g_v(two_vertex, two_vertex_traj, T) == pytest.approx(4.0, abs=1e-10)


def test_g_finite_difference_cross_check():
    for idx in range(8):
        G, _ = seeded_instance(50, idx)
        v = int(np.argmax(G.degree))
        traj = solve_exact(G, G.pi_vertex(v), t_end=2.0)
        T = 0.4
        if any(abs(e - T) < 1e-3 for e in traj.events):
            T = 0.37  # keep the difference stencil away from events
        ga = g_v(G, traj, T)
        gfd = g_v_finite_difference(G, traj, T)
        assert gfd == pytest.approx(ga, rel=1e-4)


def test_g_rejects_mixed_state(four_vertex):
    traj = solve_exact(four_vertex, four_vertex.pi(), t_end=1.0)
    with pytest.raises(ValueError):
        g_v(four_vertex, traj, 0.5)


# -- normalized rate -------------------------------------------------------------


def test_h_two_vertex(two_vertex, two_vertex_traj):
    h, j0, overlap = h_v(two_vertex, two_vertex_traj, 0.5)
    assert h == pytest.approx(1.0, abs=1e-10)
    assert j0 == 2
    assert abs(overlap) > 1e-3


def test_h_approaches_one_under_spectral_gap(two_vertex, two_vertex_traj):
    # single mode: h is exactly 1 at any T
    h, _, _ = h_v(two_vertex, two_vertex_traj, 2.0)
    assert abs(h - 1.0) <= 1e-6


def test_h_degenerate_stationary(four_vertex):
    traj = solve_exact(four_vertex, four_vertex.pi(), t_end=1.0)
    with pytest.raises(ValueError):
        h_v(four_vertex, traj, 0.5)


# -- window conductance ------------------------------------------------------------


def test_kappa_four_vertex_finds_planted_cut(four_vertex):
    # From the max-degree vertex (c), the sweep family contains {c, d} and
    # the window conductance hits the true minimum 1/2.
    traj = solve_exact(four_vertex, four_vertex.pi_vertex(2), t_end=2.0)
    kap, cut, xi = kappa(four_vertex, traj, 0.1, 2.0)
    assert kap == pytest.approx(0.5)
    assert cut.subset in ((0, 1), (2, 3))
    assert 0.1 <= xi <= 2.0


def test_kappa_four_vertex_tied_source(four_vertex):
    # From vertex a the two middle vertices stay exactly tied (balanced
    # flow), so the {a, b} sweep never appears and every sweep costs 1.
    traj = solve_exact(four_vertex, four_vertex.pi_vertex(0), t_end=2.0)
    kap, _, _ = kappa(four_vertex, traj, 0.1, 2.0)
    assert kap == pytest.approx(1.0)


def test_kappa_single_edge_is_one(triangle_edge):
    traj = solve_exact(triangle_edge, np.array([0.9, 0.1, 0.0]), t_end=2.0)
    kap, _, _ = kappa(triangle_edge, traj, 0.1, 2.0)
    assert kap == pytest.approx(1.0)


def test_kappa_dominates_oracle():
    for idx in range(10):
        G, _ = seeded_instance(51, idx)
        v = int(np.argmax(G.degree))
        traj = solve_exact(G, G.pi_vertex(v), t_end=3.0)
        kap, _, _ = kappa(G, traj, 0.2, 3.0)
        assert kap >= min_conductance_bruteforce(G).conductance - 1e-12


def test_kappa_window_monotone():
    G, _ = seeded_instance(52, 0)
    v = int(np.argmax(G.degree))
    traj = solve_exact(G, G.pi_vertex(v), t_end=4.0)
    wide, _, _ = kappa(G, traj, 0.1, 4.0)
    narrow, _, _ = kappa(G, traj, 0.5, 2.0)
    assert wide <= narrow + 1e-12


def test_kappa_rejects_constant(four_vertex):
    traj = solve_exact(four_vertex, four_vertex.pi(), t_end=1.0)
    with pytest.raises(ValueError):
        kappa(four_vertex, traj, 0.1, 1.0)


# -- theorem checks ----------------------------------------------------------------


def test_theorem_1_1_two_vertex(two_vertex, two_vertex_traj):
    rep = verify_theorem_1_1(two_vertex, 0, 0.1, 1.0, traj=two_vertex_traj)
    assert rep.g_value == pytest.approx(4.0, abs=1e-9)
    assert rep.kappa_value == pytest.approx(1.0)
    assert rep.checks["theorem_1_1"]["passed"]
    assert rep.checks["theorem_1_1"]["margin"] == pytest.approx(3.0, abs=1e-9)


def test_theorem_1_1_random_batch():
    for idx in range(30):
        G, _ = seeded_instance(53, idx)
        v = int(np.argmax(G.degree))
        rep = verify_theorem_1_1(G, v, 0.25, 4.0)
        assert rep.all_passed(), (idx, rep.checks)


def test_corollary_1_2_two_vertex(two_vertex, two_vertex_traj):
    rep = verify_corollary_1_2(two_vertex, 0, 0.1, 1.0, traj=two_vertex_traj)
    assert rep.applicable
    assert rep.h_value == pytest.approx(1.0, abs=1e-9)
    assert rep.phi_oracle == pytest.approx(1.0)
    # 4 * phi * h = 4 >= kappa^2 = 1
    assert rep.checks["corollary_1_2"]["margin"] == pytest.approx(3.0, abs=1e-9)
    assert rep.checks["support_chain"]["passed"]


def test_corollary_1_2_random_batch():
    for idx in range(30):
        G, _ = seeded_instance(54, idx)
        v = int(np.argmax(G.degree))
        rep = verify_corollary_1_2(G, v, 0.25, 4.0)
        assert rep.all_passed(), (idx, rep.checks)


def test_corollary_gate_reports_na_not_failure():
    # Symmetric two-leaf star from the center: the state keeps the leaves
    # tied, the support graph's second eigenvector is odd across them, and
    # the overlap vanishes: the check reports N/A.
    G = Hypergraph(3, [([0, 1], 1.0), ([0, 2], 1.0)])
    traj = solve_exact(G, G.pi_vertex(0), t_end=2.0)
    rep = verify_corollary_1_2(G, 0, 0.25, 2.0, traj=traj)
    assert rep.applicable is False
    assert rep.checks["corollary_1_2"]["passed"] is None
    assert rep.checks["support_chain"]["passed"]


def test_report_json_serializable(two_vertex, two_vertex_traj):
    rep = verify_corollary_1_2(two_vertex, 0, 0.1, 1.0, traj=two_vertex_traj)
    doc = rep.to_json_dict()
    json.dumps(doc)
    assert doc["kappa_cut"]["subset"] in ([0], [1])


# -- interval decay functional ---------------------------------------------------------


def test_f_interval_two_vertex(two_vertex, two_vertex_traj):
    for delta in (0.0, 0.3, 1.0):
        assert f_interval(two_vertex_traj, 0, delta) == pytest.approx(
            math.exp(-2.0 * delta) / 2.0, abs=1e-12
        )


def test_f_interval_forms_agree():
    for idx in range(8):
        G, _ = seeded_instance(55, idx)
        v = int(np.argmax(G.degree))
        traj = solve_exact(G, G.pi_vertex(v), t_end=2.0)
        for delta in (0.0, 0.2, 1.0):
            inner, norm = f_interval_forms(traj, 0, delta)
            assert inner == pytest.approx(norm, abs=1e-9 * max(1.0, norm))
            assert norm >= 0.0


def test_f_interval_at_zero_is_squared_distance(two_vertex, two_vertex_traj):
    rec = two_vertex_traj.intervals[0]
    pic = rec.graph.node_degree / rec.graph.volume
    want = rec.graph.dinv_norm(rec.entry_collapsed - pic) ** 2
    assert f_interval(two_vertex_traj, 0, 0.0) == pytest.approx(want, abs=1e-12)


def test_f_interval_bad_index(two_vertex_traj):
    with pytest.raises(ValueError):
        f_interval(two_vertex_traj, 5, 0.1)


def test_log_derivative_matches_rayleigh():
    # d/d delta log f equals minus the Rayleigh quotient of the centered state
    for idx in range(8):
        G, _ = seeded_instance(56, idx)
        v = int(np.argmax(G.degree))
        traj = solve_exact(G, G.pi_vertex(v), t_end=2.0)
        h = 1e-5
        for delta in (0.05, 0.3, 1.0):
            fd = (
                math.log(f_interval(traj, 0, delta + h))
                - math.log(f_interval(traj, 0, delta - h))
            ) / (2 * h)
            closed = f_log_derivative(traj, 0, delta)
            assert fd == pytest.approx(closed, rel=1e-5)


def test_log_f_convex():
    for idx in range(8):
        G, _ = seeded_instance(57, idx)
        v = int(np.argmax(G.degree))
        traj = solve_exact(G, G.pi_vertex(v), t_end=2.0)
        grid = np.linspace(0.02, 3.0, 24)
        logs = np.array([math.log(f_interval(traj, 0, float(d))) for d in grid])
        second = logs[2:] - 2 * logs[1:-1] + logs[:-2]
        assert np.min(second) >= -1e-6
