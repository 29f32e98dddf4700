"""Diagnostics for heat trajectories: decay rates, spectral overlaps, and sweep bounds.

Computes the decay-rate functional of a trajectory, its normalization by the
support graph's relevant eigenvalue, and the windowed minimum sweep
conductance, then verifies the two main inequalities relating them on
concrete instances.  Failures are reported with margins, never thrown.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .hypercore import (
    Cut,
    Hypergraph,
    best_sweep_cut,
    conductance,
    min_conductance_bruteforce,
    sweep_sets,
)
from .laplacian import normalized_laplacian_apply, support_graph, tie_tolerance
from .spectral import decompose, rayleigh_quotient
from .diffusion import Trajectory

__all__ = [
    "DiagnosticsReport",
    "g_v",
    "g_v_finite_difference",
    "h_v",
    "kappa",
    "verify_theorem_1_1",
    "verify_corollary_1_2",
    "f_interval",
    "f_interval_forms",
    "f_log_derivative",
]

# Eigen-coefficient significance, relative to the state's own norm.
A_TOL_SCALE = 1e-8
# Additive slack for the verified inequalities.
CHECK_SLACK = 1e-8
# Default size of the log-spaced time grid for windowed sweeps.
KAPPA_GRID_POINTS = 256


@dataclass
class DiagnosticsReport:
    """Diagnostic bundle for one (instance, source vertex, window) triple."""

    vertex: int
    T: float
    t: float
    g_value: float
    kappa_value: float | None = None
    kappa_cut: Cut | None = None
    kappa_time: float | None = None
    lambda2: float | None = None
    j0: int | None = None
    h_value: float | None = None
    h_intro: float | None = None
    overlap: float | None = None
    overlap_magnitude: float | None = None
    applicable: bool | None = None
    phi_oracle: float | None = None
    checks: dict = field(default_factory=dict)

    def add_check(self, name: str, margin: float | None, passed: bool | None):
        self.checks[name] = {"margin": margin, "passed": passed}

    def all_passed(self) -> bool:
        return all(c["passed"] is not False for c in self.checks.values())

    def to_json_dict(self) -> dict:
        def cut_dict(c):
            if c is None:
                return None
            return {
                "subset": list(c.subset),
                "cut_weight": c.cut_weight,
                "conductance": c.conductance,
            }

        out = {
            "vertex": self.vertex,
            "T": self.T,
            "t": self.t,
            "g": self.g_value,
            "kappa": self.kappa_value,
            "kappa_cut": cut_dict(self.kappa_cut),
            "kappa_time": self.kappa_time,
            "lambda2": self.lambda2,
            "j0": self.j0,
            "h": self.h_value,
            "h_intro": self.h_intro,
            "overlap": self.overlap,
            "overlap_magnitude": self.overlap_magnitude,
            "applicable": self.applicable,
            "phi_oracle": self.phi_oracle,
            "checks": self.checks,
        }
        return out


def _state(traj: Trajectory, T: float) -> np.ndarray:
    return traj.state_at(T)


def g_v(G: Hypergraph, traj: Trajectory, T: float) -> float:
    """Decay rate of the squared distance to stationarity at time ``T``.

    Algebraic form: twice the degree-weighted inner product of the state with
    its Laplacian image, over the squared distance to the stationary
    distribution.
    """
    rho = _state(traj, T)
    diff = rho - G.pi()
    denom = G.dinv_norm(diff)
    if denom <= 1e-12:
        raise ValueError(f"state at T={T} is fully mixed; decay rate undefined")
    element = normalized_laplacian_apply(G, rho)
    return 2.0 * G.dinv_inner(rho, element) / denom**2


def g_v_finite_difference(G: Hypergraph, traj: Trajectory, T: float, step: float = 1e-5) -> float:
    """Centered finite difference of ``log ||rho_t - pi||^2``; cross-check only."""
    pi = G.pi()
    lo = math.log(G.dinv_norm(_state(traj, T - step) - pi) ** 2)
    hi = math.log(G.dinv_norm(_state(traj, T + step) - pi) ** 2)
    return -(hi - lo) / (2.0 * step)


def _support_spectrum(G: Hypergraph, rho_T: np.ndarray):
    """Support graph at the state, its decomposition, and eigen-coefficients."""
    Gs = support_graph(G, G.mu(rho_T))
    dec = decompose(Gs)
    coeffs = dec.vectors.T @ (rho_T * dec.inv_sqrt_degree)
    return Gs, dec, coeffs


def h_v(G: Hypergraph, traj: Trajectory, T: float):
    """Decay rate normalized by twice the first active eigenvalue.

    Expands the state in the degree-orthonormal eigenbasis of its support
    graph, locates the first index at or above 2 with a significant
    coefficient, and returns ``(h, j0, overlap)`` where ``overlap`` is the
    coefficient on the second eigenvector.  ``h`` is ``inf`` when the active
    eigenvalue vanishes (disconnected support graph).
    """
    rho_T = _state(traj, T)
    _, dec, coeffs = _support_spectrum(G, rho_T)
    a_tol = A_TOL_SCALE * G.dinv_norm(rho_T)
    active = np.nonzero(np.abs(coeffs[1:]) > a_tol)[0]
    if active.size == 0:
        raise ValueError("state is aligned with the stationary direction; no active mode")
    j0 = int(active[0]) + 2  # 1-based index of the first active mode
    lam_j0 = float(dec.eigenvalues[j0 - 1])
    g = g_v(G, traj, T)
    h = g / (2.0 * lam_j0) if lam_j0 > 1e-12 else math.inf
    return h, j0, float(coeffs[1])


def _overlap_magnitude(dec, coeffs) -> float:
    """Projection onto the full second-eigenvalue eigenspace.

    Robust to eigenvalue multiplicity, where individual eigenvectors are
    basis-dependent; the stationary mode (index 0) is always excluded.
    """
    lam = dec.eigenvalues
    gtol = 1e-10 * max(1.0, float(np.max(np.abs(lam))))
    group = [j for j in range(1, lam.size) if abs(lam[j] - lam[1]) <= gtol]
    return float(np.sqrt(sum(coeffs[j] ** 2 for j in group)))


def kappa(
    G: Hypergraph,
    traj: Trajectory,
    T: float,
    t: float,
    time_grid: np.ndarray | None = None,
    grid_points: int = KAPPA_GRID_POINTS,
):
    """Minimum sweep conductance over the time window ``[T, t]``.

    Sweeps the degree-normalized states on event times plus a log-spaced
    grid; sweep families only change when the value ordering changes, so the
    grid discretization can only overestimate the continuum infimum.
    Returns ``(kappa, cut, time)`` with the witnessing sweep cut.
    """
    if not T <= t:
        raise ValueError("window must satisfy T <= t")
    if time_grid is None:
        lo = T if T > 0 else min(1e-9 * max(t, 1.0), t)
        time_grid = np.geomspace(max(lo, 1e-300), t, grid_points)
    times = np.concatenate(
        [
            np.asarray(time_grid, dtype=np.float64),
            [T, t],
            [e for e in traj.events if T <= e <= t],
        ]
    )
    times = np.unique(np.clip(times, T, t))
    best: tuple[float, Cut, float] | None = None
    for xi in times:
        mu = G.mu(traj.state_at(float(xi)))
        if float(np.ptp(mu)) <= tie_tolerance(mu):
            continue  # fully tied state has no proper sweep set
        cut = best_sweep_cut(G, mu)
        if best is None or cut.conductance < best[0] - 1e-12:
            best = (cut.conductance, cut, float(xi))
    if best is None:
        raise ValueError("state is constant at every sampled time in the window")
    return best


def verify_theorem_1_1(
    G: Hypergraph,
    v: int,
    T: float,
    t: float,
    traj: Trajectory | None = None,
    grid_points: int = KAPPA_GRID_POINTS,
) -> DiagnosticsReport:
    """Check that the decay rate dominates the squared window conductance.

    Runs exact diffusion from the point mass at ``v`` when no trajectory is
    supplied; failures are recorded in the report, not raised.
    """
    from .diffusion import solve_exact

    if traj is None:
        traj = solve_exact(G, G.pi_vertex(v), t_end=t)
    g = g_v(G, traj, T)
    kap, cut, xi = kappa(G, traj, T, t, grid_points=grid_points)
    report = DiagnosticsReport(
        vertex=v, T=T, t=t, g_value=g, kappa_value=kap, kappa_cut=cut, kappa_time=xi
    )
    margin = g - kap**2
    report.add_check("theorem_1_1", margin, margin >= -CHECK_SLACK)
    return report


def verify_corollary_1_2(
    G: Hypergraph,
    v: int,
    T: float,
    t: float,
    traj: Trajectory | None = None,
    phi_oracle: float | None = None,
    grid_points: int = KAPPA_GRID_POINTS,
) -> DiagnosticsReport:
    """Check the Cheeger-type bound through the normalized decay rate.

    Applies only when the state at ``T`` has significant overlap with the
    second eigenspace of its support graph; gated-out instances report
    ``applicable=False`` with no pass/fail verdict.  Also asserts the chain
    step that support-graph conductance never exceeds hypergraph conductance
    on the sweep witnesses.
    """
    from .diffusion import solve_exact

    if traj is None:
        traj = solve_exact(G, G.pi_vertex(v), t_end=t)
    if phi_oracle is None:
        phi_oracle = min_conductance_bruteforce(G).conductance
    rho_T = _state(traj, T)
    Gs, dec, coeffs = _support_spectrum(G, rho_T)
    a_tol = A_TOL_SCALE * G.dinv_norm(rho_T)
    overlap_mag = _overlap_magnitude(dec, coeffs)
    g = g_v(G, traj, T)
    lam2 = float(dec.eigenvalues[1])
    kap, cut, xi = kappa(G, traj, T, t, grid_points=grid_points)
    report = DiagnosticsReport(
        vertex=v,
        T=T,
        t=t,
        g_value=g,
        kappa_value=kap,
        kappa_cut=cut,
        kappa_time=xi,
        lambda2=lam2,
        overlap=float(coeffs[1]),
        overlap_magnitude=overlap_mag,
        phi_oracle=phi_oracle,
        h_intro=g / lam2 if lam2 > 1e-12 else math.inf,
    )
    report.applicable = overlap_mag > a_tol
    if report.applicable:
        h, j0, _ = h_v(G, traj, T)
        report.h_value = h
        report.j0 = j0
        margin = math.inf if math.isinf(h) else 4.0 * phi_oracle * h - kap**2
        report.add_check("corollary_1_2", margin, margin >= -CHECK_SLACK)
    else:
        report.add_check("corollary_1_2", None, None)

    # Chain step: support-graph conductance <= hypergraph conductance on the
    # kappa witness and every sweep of the state at T.
    mu_T = G.mu(rho_T)
    witnesses = [cut.subset]
    if float(np.ptp(mu_T)) > tie_tolerance(mu_T):
        witnesses.extend(sweep_sets(mu_T))
    worst = -math.inf
    for S in witnesses:
        gap = conductance(G, S).conductance - Gs.conductance(S)
        worst = max(worst, -gap)
    report.add_check("support_chain", -worst, worst <= 1e-12)
    return report


def f_interval_forms(traj: Trajectory, i: int, delta: float) -> tuple[float, float]:
    """Both forms of the interval decay functional: inner product and norm."""
    rec = traj.intervals[i]
    Gt = rec.graph
    pi_c = Gt.node_degree / Gt.volume
    rho_half = rec.decomposition.propagate(rec.entry_collapsed, delta / 2.0)
    rho_full = rec.decomposition.propagate(rec.entry_collapsed, delta)
    inner = float(np.sum(rec.entry_collapsed * (rho_full - pi_c) / Gt.node_degree))
    norm = Gt.dinv_norm(rho_half - pi_c) ** 2
    return inner, norm


def f_interval(traj: Trajectory, i: int, delta: float) -> float:
    """Interval decay functional (the squared-norm form)."""
    if not 0 <= i < len(traj.intervals):
        raise ValueError(f"trajectory has no interval {i}")
    _, norm = f_interval_forms(traj, i, delta)
    return norm


def f_log_derivative(traj: Trajectory, i: int, delta: float) -> float:
    """Closed form of ``d/d delta log f_i``: minus a Rayleigh quotient.

    Evaluated on the centered, degree-normalized state at half the offset.
    """
    rec = traj.intervals[i]
    Gt = rec.graph
    rho_half = rec.decomposition.propagate(rec.entry_collapsed, delta / 2.0)
    centered = rho_half / Gt.node_degree - 1.0 / Gt.volume
    return -rayleigh_quotient(Gt, centered)
