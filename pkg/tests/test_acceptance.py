"""Acceptance suite: every criterion at its stated tolerance, one line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
PASS lines and logged margins.
"""

import bisect
import json
import math
import time

import numpy as np
import pytest

from hyperheat import (
    Hypergraph,
    decompose,
    graph_cheeger_sweep,
    lambda2_u2,
    min_conductance_bruteforce,
    normalized_laplacian_apply,
    solve_exact,
    solve_implicit,
    solve_rk4,
)
from hyperheat.analysis import (
    f_interval,
    f_log_derivative,
    kappa,
    verify_corollary_1_2,
    verify_theorem_1_1,
)
from hyperheat.cli import initial_lambda2, planted_hypergraph
from conftest import random_weighted_graph

SUITE_N = 200
SUITE_SEED = 2026
QUALITY_N = 100
LAMBDA2_FLOOR = 1e-8


def _report(num, name, ok, detail=""):
    print(f"criterion {num:2d} [{name}]: {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, f"criterion {num} ({name}) failed: {detail}"


@pytest.fixture(scope="module")
def suite():
    """200 planted instances with exact trajectories to t = 40 / lambda2_hat."""
    t0 = time.perf_counter()
    out = []
    for idx in range(SUITE_N):
        rng = np.random.default_rng(np.random.SeedSequence([SUITE_SEED, idx]))
        n = int(rng.integers(4, 9))
        G = planted_hypergraph(rng, n, bridges=int(rng.integers(1, 3)))
        v = int(np.argmax(G.degree))
        lam2 = max(initial_lambda2(G, v), LAMBDA2_FLOOR)
        traj = solve_exact(G, G.pi_vertex(v), t_end=40.0 / lam2)
        out.append({"G": G, "v": v, "lam2": lam2, "traj": traj, "rng": rng})
    return {"instances": out, "exact_seconds": time.perf_counter() - t0}


@pytest.fixture(scope="module")
def suite_rk4(suite):
    """RK4 companions (h = 1e-4, horizon 1) for the same instances."""
    t0 = time.perf_counter()
    runs = []
    for inst in suite["instances"]:
        G = inst["G"]
        runs.append(solve_rk4(G, G.pi_vertex(inst["v"]), t_end=1.0, h=1e-4))
    return {"runs": runs, "rk4_seconds": time.perf_counter() - t0}


def test_criterion_1_closed_form_diffusion():
    G = Hypergraph(2, [([0, 1], 1.0)])
    t0 = time.perf_counter()
    traj = solve_exact(G, G.pi_vertex(0), t_end=2.0)
    worst = max(
        abs(traj.state_at(t)[0] - (0.5 + 0.5 * math.exp(-2.0 * t)))
        for t in (0.1, 0.5, 1.0, 2.0)
    )
    elapsed = time.perf_counter() - t0
    _report(1, "closed-form diffusion", worst <= 1e-10 and elapsed < 1.0,
            f"max err {worst:.2e}, {elapsed:.3f}s")


def test_criterion_2_mass_conservation(suite, suite_rk4):
    worst_exact = max(float(np.max(i["traj"].mass_errors())) for i in suite["instances"])
    worst_rk4 = max(float(np.max(r.mass_errors())) for r in suite_rk4["runs"])
    elapsed = suite["exact_seconds"] + suite_rk4["rk4_seconds"]
    ok = worst_exact <= 1e-10 and worst_rk4 <= 1e-8 and elapsed < 120.0
    _report(2, "mass conservation",
            ok, f"exact {worst_exact:.2e}, rk4 {worst_rk4:.2e}, {elapsed:.1f}s")


def test_criterion_3_convergence_to_stationarity(suite):
    worst_final = 0.0
    worst_increase = -math.inf
    for inst in suite["instances"]:
        G, traj = inst["G"], inst["traj"]
        pi = G.pi()
        norms = np.array([G.dinv_norm(st - pi) for st in traj.sample_states])
        worst_final = max(worst_final, float(norms[-1]))
        worst_increase = max(worst_increase, float(np.max(np.diff(norms))))
    ok = worst_final <= 1e-6 and worst_increase <= 1e-9
    _report(3, "convergence to pi", ok,
            f"final norm {worst_final:.2e}, worst increase {worst_increase:.2e}")


def test_criterion_4_theorem_1_1(suite):
    violations = 0
    min_margin = math.inf
    for inst in suite["instances"]:
        G, v, lam2, traj = inst["G"], inst["v"], inst["lam2"], inst["traj"]
        rep = verify_theorem_1_1(G, v, 0.25, 8.0 / lam2, traj=traj)
        margin = rep.checks["theorem_1_1"]["margin"]
        min_margin = min(min_margin, margin)
        if not rep.checks["theorem_1_1"]["passed"]:
            violations += 1
    _report(4, "theorem g >= kappa^2", violations == 0,
            f"violations {violations}/{SUITE_N}, min margin {min_margin:.3e}")


def test_criterion_5_corollary_1_2(suite):
    violations = 0
    not_applicable = 0
    min_margin = math.inf
    for inst in suite["instances"]:
        G, v, lam2, traj = inst["G"], inst["v"], inst["lam2"], inst["traj"]
        phi = min_conductance_bruteforce(G).conductance
        rep = verify_corollary_1_2(G, v, 0.25, 8.0 / lam2, traj=traj, phi_oracle=phi)
        if rep.applicable is False:
            not_applicable += 1
            continue
        check = rep.checks["corollary_1_2"]
        if not check["passed"]:
            violations += 1
        elif math.isfinite(check["margin"]):
            min_margin = min(min_margin, check["margin"])
    _report(5, "corollary 4 phi h >= kappa^2", violations == 0,
            f"violations {violations}, N/A {not_applicable}/{SUITE_N}, "
            f"min finite margin {min_margin:.3e}")


def test_criterion_6_algorithm_quality():
    good = 0
    exceptions = []
    for idx in range(QUALITY_N):
        rng = np.random.default_rng(np.random.SeedSequence([SUITE_SEED + 1, idx]))
        n = int(rng.integers(4, 13))
        G = planted_hypergraph(rng, n, bridges=int(rng.integers(1, 3)))
        v = int(np.argmax(G.degree))
        lam2 = max(initial_lambda2(G, v), LAMBDA2_FLOOR)
        T, t = 0.25, 8.0 / lam2
        traj = solve_exact(G, G.pi_vertex(v), t_end=t)
        kap, cut, xi = kappa(G, traj, T, t)
        phi = min_conductance_bruteforce(G).conductance
        bound = 2.0 * math.sqrt(2.0 * phi) + 1e-6
        if cut.conductance <= bound:
            good += 1
        else:
            rep = verify_corollary_1_2(G, v, T, t, traj=traj, phi_oracle=phi)
            exceptions.append(
                {
                    "index": idx,
                    "n": n,
                    "phi_out": cut.conductance,
                    "bound": bound,
                    "overlap_gate": rep.applicable,
                    "h": rep.h_value,
                    "diagnostics": rep.to_json_dict(),
                }
            )
    for exc in exceptions:
        print("quality exception:", json.dumps(exc, default=str, sort_keys=True))
        assert exc["overlap_gate"] is False or (exc["h"] is not None and exc["h"] > 1.0)
    _report(6, "algorithm-1 quality", good >= 0.95 * QUALITY_N,
            f"{good}/{QUALITY_N} within 2 sqrt(2 phi), {len(exceptions)} exceptions dumped")


def test_criterion_7_sweep_equality():
    from hyperheat.hypercore import conductance
    from hyperheat.laplacian import (
        collapsed_graph,
        support_selection,
        tie_tolerance,
        value_partition,
    )

    worst = 0.0
    for idx in range(50):
        rng = np.random.default_rng(np.random.SeedSequence([SUITE_SEED + 2, idx]))
        n = int(rng.integers(4, 9))
        G = planted_hypergraph(rng, n)
        x = rng.normal(size=n)
        if idx % 3 == 0:
            x = np.round(x, 1)  # force ties in a third of the draws
        P = value_partition(G, x)
        if P.size < 2:
            continue
        sel = support_selection(G, x, P, tol=tie_tolerance(x))
        Gt = collapsed_graph(G, P, sel)
        for i in range(1, P.size):
            S = [u for k in range(i) for u in P.classes[k]]
            gap = abs(conductance(G, S).conductance - Gt.conductance(range(i)))
            worst = max(worst, gap)
    _report(7, "sweep equality G vs collapsed", worst <= 1e-12, f"worst gap {worst:.2e}")


def test_criterion_8_norm_compatibility(suite):
    worst = 0.0
    for inst in suite["instances"]:
        G, traj = inst["G"], inst["traj"]
        pi = G.pi()
        for tau, state in zip(traj.sample_times, traj.sample_states):
            i = max(0, min(bisect.bisect_right(traj.events, tau) - 1, len(traj.intervals) - 1))
            rec = traj.intervals[i]
            pic = rec.graph.node_degree / rec.graph.volume
            collapsed = rec.decomposition.propagate(
                rec.entry_collapsed, float(tau) - rec.entry_time
            )
            a = rec.graph.dinv_norm(collapsed - pic)
            b = G.dinv_norm(state - pi)
            worst = max(worst, abs(a - b))
    _report(8, "norm compatibility", worst <= 1e-9, f"worst gap {worst:.2e}")


def test_criterion_9_monotone_operator(suite):
    pairs_per_instance = 10000 // SUITE_N
    worst = math.inf
    for inst in suite["instances"]:
        G, rng = inst["G"], inst["rng"]
        for _ in range(pairs_per_instance):
            x1 = rng.normal(size=G.n)
            x2 = rng.normal(size=G.n)
            y1 = normalized_laplacian_apply(G, x1)
            y2 = normalized_laplacian_apply(G, x2)
            worst = min(worst, G.dinv_inner(y1 - y2, x1 - x2))
    _report(9, "monotone operator", worst >= -1e-10, f"min inner product {worst:.3e}")


def test_criterion_10_implicit_euler():
    G = Hypergraph(4, [([0, 1, 2], 1.0), ([2, 3], 1.0)])
    exact = solve_exact(G, G.pi_vertex(0), t_end=2.0)
    target = exact.state_at(2.0)
    lams = [0.02, 0.01, 0.005]
    gaps = []
    worst_ratio = 0.0
    for lam in lams:
        traj = solve_implicit(G, G.pi_vertex(0), t_end=2.0, lam=lam)
        worst_ratio = max(worst_ratio, max(r.residual / lam for r in traj.prox_reports))
        gaps.append(G.dinv_norm(traj.state_at(2.0) - target))
    slope = float(np.polyfit(np.log(lams), np.log(gaps), 1)[0])
    ok = worst_ratio <= 1e-6 and 0.4 <= slope <= 1.1
    _report(10, "implicit-euler certificate", ok,
            f"max residual/lambda {worst_ratio:.2e}, slope {slope:.3f}")


def test_criterion_11_spectral_sanity():
    rng = np.random.default_rng(SUITE_SEED + 3)
    worst_recon = 0.0
    worst_slack = math.inf
    for _ in range(100):
        Gw = random_weighted_graph(rng, int(rng.integers(2, 10)))
        dec = decompose(Gw)
        worst_recon = max(worst_recon, dec.reconstruction_error())
        lam2, u2 = lambda2_u2(dec)
        x = u2 / Gw.node_degree
        if np.ptp(x) == 0:
            continue
        _, phi = graph_cheeger_sweep(Gw, x)
        worst_slack = min(worst_slack, math.sqrt(2.0 * max(lam2, 0.0)) + 1e-8 - phi)
    ok = worst_recon <= 1e-8 and worst_slack >= 0.0
    _report(11, "spectral sanity", ok,
            f"recon {worst_recon:.2e}, min cheeger slack {worst_slack:.3e}")


def test_criterion_12_interval_decay_checks(suite):
    worst_rel = 0.0
    worst_second = math.inf
    h = 1e-5
    checked = 0
    for inst in suite["instances"][:40]:
        traj = inst["traj"]
        for delta in (0.05, 0.3, 1.0):
            f_mid = f_interval(traj, 0, delta)
            if f_mid < 1e-200:
                continue
            fd = (
                math.log(f_interval(traj, 0, delta + h))
                - math.log(f_interval(traj, 0, delta - h))
            ) / (2 * h)
            closed = f_log_derivative(traj, 0, delta)
            worst_rel = max(worst_rel, abs(fd - closed) / max(abs(closed), 1e-12))
            checked += 1
        grid = np.linspace(0.02, 2.0, 20)
        logs = np.array([math.log(max(f_interval(traj, 0, float(d)), 1e-300)) for d in grid])
        worst_second = min(worst_second, float(np.min(logs[2:] - 2 * logs[1:-1] + logs[:-2])))
    ok = worst_rel <= 1e-5 and worst_second >= -1e-6 and checked > 0
    _report(12, "interval decay functional", ok,
            f"log-derivative rel err {worst_rel:.2e}, min 2nd diff {worst_second:.2e}")
