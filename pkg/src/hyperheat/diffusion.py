"""Solvers for the hypergraph heat equation.

Three routes to the same trajectory: an event-driven exact solver that rides
closed-form linear diffusion on collapsed graphs between ordering changes, an
implicit-Euler solver built on the proximal operator of the edge energy with
a per-step residual certificate, and a classical RK4 reference on the
canonical single-valued selection.
"""

from __future__ import annotations

import bisect as _bisect
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .hypercore import Hypergraph
from .laplacian import (
    EPS_TIE,
    OrderedPartition,
    SupportSelection,
    WeightedGraph,
    collapsed_graph,
    laplacian_apply,
    min_norm_transport,
    ordered_partition,
    support_selection,
    tie_tolerance,
)
from .spectral import SpectralDecomposition, decompose, heat_propagate

__all__ = [
    "IntervalRecord",
    "Trajectory",
    "ProxStepReport",
    "EventCapError",
    "ProxStallError",
    "default_sample_times",
    "solve_exact",
    "next_tie_time",
    "prox_step",
    "prox_objective",
    "solve_implicit",
    "solve_rk4",
]

# Minimum spacing between consecutive events; nearer ties merge at entry.
DELTA_MIN = 1e-8
# Bisection tolerance for tie times.
TIE_TIME_TOL = 1e-10
# Scan-grid resolution for bracketing ordering changes.
SCAN_POINTS = 512
# Classes up to this size get complete subset (Hall) feasibility monitors.
_HALL_SUBSET_CAP = 14


class EventCapError(RuntimeError):
    """Raised when the exact solver exceeds its event budget.

    Carries the partial trajectory built so far in ``trajectory``.
    """

    def __init__(self, message, trajectory):
        super().__init__(message)
        self.trajectory = trajectory


class ProxStallError(RuntimeError):
    """Raised when a proximal step cannot certify its residual bound.

    Carries the best :class:`ProxStepReport` in ``report``.
    """

    def __init__(self, message, report):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class ProxStepReport:
    """Certificate of one implicit-Euler step."""

    iterations: int
    residual: float
    objective: float


@dataclass
class IntervalRecord:
    """Spectral data of one interval of the exact solver.

    ``edge_classes[e]`` lists the partition classes present in hyperedge
    ``e``, sorted by the class order; tie detection only needs those.
    """

    entry_time: float
    partition: OrderedPartition
    selection: SupportSelection
    graph: WeightedGraph
    decomposition: SpectralDecomposition
    entry_state: np.ndarray
    entry_collapsed: np.ndarray
    edge_classes: tuple[tuple[int, ...], ...]

    def state_at_offset(self, delta: float, degree: np.ndarray) -> np.ndarray:
        """Hypergraph state ``delta`` after entry: propagate and expand by class."""
        rho_c = heat_propagate(self.decomposition, self.entry_collapsed, delta)
        mu_c = rho_c / self.graph.node_degree
        return degree * self.partition.spread(mu_c, degree.size)


@dataclass
class Trajectory:
    """Piecewise description of one heat-equation solve."""

    solver: str
    hypergraph: Hypergraph
    initial: np.ndarray
    t_end: float
    params: dict
    events: list[float]
    intervals: list[IntervalRecord]
    sample_times: np.ndarray
    sample_states: np.ndarray
    step_times: np.ndarray | None = None
    step_states: np.ndarray | None = None
    prox_reports: list[ProxStepReport] = field(default_factory=list)

    def state_at(self, t: float) -> np.ndarray:
        """State at time ``t`` within ``[0, t_end]``.

        Exact trajectories evaluate in closed form on the containing
        interval; implicit trajectories are piecewise constant on step
        intervals; RK4 trajectories answer only at sampled times.
        """
        if t < 0 or t > self.t_end * (1 + 1e-12) + 1e-15:
            raise ValueError(f"time {t} outside trajectory range [0, {self.t_end}]")
        if self.solver == "exact":
            i = _bisect.bisect_right(self.events, t) - 1
            i = max(0, min(i, len(self.intervals) - 1))
            rec = self.intervals[i]
            return rec.state_at_offset(t - rec.entry_time, self.hypergraph.degree)
        if self.solver == "implicit":
            lam = self.params["lam"]
            if t <= 0:
                return self.step_states[0].copy()
            k = min(int(math.ceil(t / lam)) - 1, self.step_states.shape[0] - 1)
            return self.step_states[k].copy()
        hits = np.nonzero(np.isclose(self.sample_times, t, rtol=0, atol=1e-12))[0]
        if hits.size == 0:
            raise ValueError("rk4 trajectories can only be queried at sampled times")
        return self.sample_states[hits[0]].copy()

    def mass_errors(self) -> np.ndarray:
        total = float(np.sum(self.initial))
        return np.abs(self.sample_states.sum(axis=1) - total)

    def to_json_dict(self) -> dict:
        out = {
            "hyperheat-traj": 1,
            "solver": self.solver,
            "t_end": self.t_end,
            "params": {k: v for k, v in self.params.items()},
            "events": list(self.events),
            "intervals": [
                {
                    "entry_time": rec.entry_time,
                    "classes": [list(c) for c in rec.partition.classes],
                    "converged": rec.partition.converged,
                }
                for rec in self.intervals
            ],
            "samples": {
                "times": self.sample_times.tolist(),
                "states": self.sample_states.tolist(),
            },
        }
        if self.prox_reports:
            out["prox"] = {
                "residuals": [r.residual for r in self.prox_reports],
                "iterations": [r.iterations for r in self.prox_reports],
            }
        return out


def default_sample_times(t_end: float, per_decade: int = 64, decades: int = 3) -> np.ndarray:
    """Log-spaced sample grid: ``per_decade`` points per decade up to ``t_end``."""
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    pts = np.geomspace(t_end * 10.0 ** (-decades), t_end, per_decade * decades + 1)
    return np.unique(np.concatenate([[0.0], pts, [t_end]]))


def _validate_initial(G: Hypergraph, s: np.ndarray, allow_signed: bool) -> np.ndarray:
    s = np.asarray(s, dtype=np.float64).copy()
    if s.shape != (G.n,):
        raise ValueError(f"initial vector has shape {s.shape}, expected ({G.n},)")
    if not allow_signed:
        if abs(float(s.sum()) - 1.0) > 1e-9 or float(s.min()) < -1e-12:
            raise ValueError(
                "initial vector must be a distribution (pass allow_signed=True for general s)"
            )
    return s


# -- exact event-driven solver -------------------------------------------------


def _monitored_pairs(edge_classes) -> list[tuple[int, int]]:
    """Class pairs whose ordering change can alter some edge's selection.

    For each edge only crossings involving its current top or bottom class
    matter; a crossing between two middle classes leaves the edge's
    argmax/argmin sets untouched (the following entry re-partition catches
    it if it ever becomes the top or bottom of some edge).
    """
    pairs = set()
    for ks in edge_classes:
        if len(ks) < 2:
            continue
        top, bot = ks[0], ks[-1]
        for k in ks:
            if k != top:
                pairs.add((top, k))
            if k != bot:
                pairs.add((min(bot, k), max(bot, k)))
    return sorted(pairs)


def _monitor_rows(G: Hypergraph, record: IntervalRecord):
    """Margin functions whose sign change ends the interval.

    Two families, both finite sums of decaying modes over the collapsed
    spectrum: (a) ordering margins between monitored class pairs, which must
    stay positive for every edge's argmax/argmin classes to persist; (b)
    flow-feasibility margins for members of multi-vertex classes, which must
    stay positive for the class to keep evolving as one node (a member whose
    required rate leaves its incident capacity forces a split).

    Returns ``(rows, thresholds, armed_floor)`` where each row gives mode
    coefficients and the margin must stay above ``-threshold``.
    """
    part = record.partition
    sel = record.selection
    M, lam = record.decomposition.mu_expansion(record.entry_collapsed)
    mu_entry = record.entry_collapsed / record.graph.node_degree
    mu_scale = float(np.max(np.abs(mu_entry)))

    rows = []
    thresholds = []
    armed_only = []
    meta = []
    # (a) ordering margins: fire strictly inside the tie tolerance so the
    # next entry partition merges the pair instead of seeing a spuriously
    # flipped order.
    cross_thresh = 0.25 * EPS_TIE * mu_scale
    for a, b in _monitored_pairs(record.edge_classes):
        rows.append(M[a] - M[b])
        thresholds.append(cross_thresh)
        armed_only.append(False)
        meta.append(("cross", a, b))

    # (b) feasibility margins for multi-member classes: the class evolves as
    # one node only while the per-edge flows can realize every member's
    # degree-share of the class rate.  By max-flow/min-cut that holds iff for
    # every subset B of the class, the maximum net flow into B (everything
    # from edges whose receiving set touches B, minus the forced outflow of
    # edges whose giving set lies inside B) covers B's required rate.
    multi = [k for k, cls in enumerate(part.classes) if 1 < len(cls) <= _HALL_SUBSET_CAP]
    if multi:
        class_of = part.class_of(G.n)
        mudot = M * (-lam)[None, :]  # per-class value derivative rows
        edge_rows = []
        for e in range(G.m):
            kS = int(class_of[sel.S_ref[e][0]])
            kI = int(class_of[sel.I_ref[e][0]])
            if kS != kI:
                edge_rows.append((e, kS, kI, G.edge_weights[e] * (M[kS] - M[kI])))
        rate_scale = float(np.max(np.abs(mudot.sum(axis=1)))) if lam.size else 0.0
        cap_scale = max((abs(float(r.sum())) for _, _, _, r in edge_rows), default=0.0)
        feas_thresh = 0.25 * EPS_TIE * max(rate_scale, cap_scale, mu_scale)
        for k in multi:
            members = part.classes[k]
            receiving = []  # (member mask, row) for edges received by this class
            giving = []
            for e, kS, kI, row in edge_rows:
                if kI == k:
                    receiving.append((frozenset(sel.I_ref[e]), row))
                if kS == k:
                    giving.append((frozenset(sel.S_ref[e]), row))
            if not receiving and not giving:
                continue
            for bits in range(1, (1 << len(members)) - 1):
                B = frozenset(m for i, m in enumerate(members) if (bits >> i) & 1)
                row = -sum(G.degree[u] for u in B) * mudot[k]
                for touch, r in receiving:
                    if touch & B:
                        row = row + r
                for within, r in giving:
                    if within <= B:
                        row = row - r
                rows.append(row)
                thresholds.append(feas_thresh)
                armed_only.append(True)
                meta.append(("feas", k, B))
    return rows, np.asarray(thresholds), armed_only, lam, meta


def next_tie_time(
    G: Hypergraph,
    record: IntervalRecord,
    horizon: float,
    scan_points: int = SCAN_POINTS,
    delta_min: float = DELTA_MIN,
    bisect_tol: float = TIE_TIME_TOL,
) -> float | None:
    """Earliest time after entry at which some edge's selection changes.

    Ordering and feasibility margins are finite sums of decaying modes; sign
    changes (beyond the tie tolerance) are bracketed on a log-spaced scan
    grid and bisected.  Returns an absolute time, or None when the interval
    dynamics stay valid through ``horizon``.
    """
    if horizon <= delta_min:
        return None
    if record.partition.size < 2:
        return None
    rows, thresholds, armed_only, lam, _ = _monitor_rows(G, record)
    if not rows:
        return None
    C = np.asarray(rows)

    grid = np.geomspace(delta_min, horizon, scan_points)
    vals = C @ np.exp(-np.outer(lam, grid))  # row x grid
    # Feasibility rows arm with hysteresis: the entry partition certified
    # feasibility at the boundary, so a row must first rise clearly above its
    # threshold before a later drop below it counts as an event.  Rows that
    # hover inside the band never fire (no event accumulation at the
    # boundary); rows that rise and then fall fire at the fall.
    above = vals > thresholds[:, None]
    armed = np.ones(vals.shape, dtype=bool)
    for i, only in enumerate(armed_only):
        if only:
            ups = np.nonzero(above[i])[0]
            armed[i] = False
            if ups.size:
                armed[i, ups[0]:] = True
    crossed = armed & (vals < -thresholds[:, None])
    if not crossed.any():
        return None
    first_col = int(np.argmax(crossed.any(axis=0)))
    lo = 0.0 if first_col == 0 else float(grid[first_col - 1])
    roots = []
    for p in np.nonzero(crossed[:, first_col])[0]:
        a, b = lo, float(grid[first_col])
        fa = float(C[p] @ np.exp(-lam * a)) + thresholds[p]
        if fa <= 0.0:
            roots.append(delta_min)  # already crossed at entry: spacing guard
            continue
        while b - a > max(bisect_tol, 1e-13 * b):
            mid = 0.5 * (a + b)
            if float(C[p] @ np.exp(-lam * mid)) + thresholds[p] > 0.0:
                a = mid
            else:
                b = mid
        roots.append(b)
    delta = max(min(roots), delta_min)
    if delta >= horizon:
        return None
    return record.entry_time + delta


def _build_record(G: Hypergraph, part: OrderedPartition, rho: np.ndarray, t: float) -> IntervalRecord:
    mu = G.mu(rho)
    sel = support_selection(G, mu, part, tol=tie_tolerance(mu))
    Gt = collapsed_graph(G, part, sel)
    dec = decompose(Gt)
    class_of = part.class_of(G.n)
    edge_classes = tuple(
        tuple(int(k) for k in np.unique(class_of[G.edge_members[e]])) for e in range(G.m)
    )
    return IntervalRecord(
        entry_time=t,
        partition=part,
        selection=sel,
        graph=Gt,
        decomposition=dec,
        entry_state=rho.copy(),
        entry_collapsed=part.sums(rho),
        edge_classes=edge_classes,
    )


def _jet_splits(G: Hypergraph, record: IntervalRecord, jet_orders: int = 6):
    """Boundary-tight feasibility margins whose forward jet is negative.

    A class can enter an interval with a Hall margin exactly at zero (the
    instantaneous rates sit on the feasibility boundary); whether it may stay
    one class is decided by the first nonvanishing derivative of the margin.
    Returns at most one tight subset per class, to be split off below the
    rest of its class.
    """
    rows, thresholds, armed_only, lam, meta = _monitor_rows(G, record)
    splits: dict[int, tuple[float, frozenset]] = {}
    for i, row in enumerate(rows):
        if not armed_only[i]:
            continue
        if float(row.sum()) > thresholds[i]:
            continue  # clearly positive at entry: the scan grid handles it
        kind, k, B = meta[i]
        verdict = 0.0
        powers = -lam
        for order in range(1, jet_orders + 1):
            d = float(row @ powers)
            scale = float(np.abs(row) @ np.abs(powers)) + 1e-300
            if abs(d) > 1e-6 * scale:
                verdict = d / scale
                break
            powers = powers * (-lam)
        if verdict < 0.0:
            if k not in splits or verdict < splits[k][0]:
                splits[k] = (verdict, B)
    return splits


def _split_classes(part: OrderedPartition, splits) -> OrderedPartition:
    classes = []
    for k, cls in enumerate(part.classes):
        if k in splits:
            B = splits[k][1]
            keep = tuple(sorted(set(cls) - B))
            drop = tuple(sorted(B))
            classes.extend([keep, drop])
        else:
            classes.append(cls)
    return OrderedPartition(
        classes=tuple(classes),
        representatives=tuple(c[0] for c in classes),
        refinement_depth=part.refinement_depth,
        converged=part.converged,
    )


def _entry_record(G: Hypergraph, rho: np.ndarray, t: float) -> IntervalRecord:
    """Interval record at an entry state, with sustainable class structure."""
    part = ordered_partition(G, rho)
    record = _build_record(G, part, rho, t)
    for _ in range(G.n):
        splits = _jet_splits(G, record)
        if not splits:
            return record
        part = _split_classes(part, splits)
        record = _build_record(G, part, rho, t)
    return record


def solve_exact(
    G: Hypergraph,
    s: np.ndarray,
    t_end: float,
    grid: np.ndarray | None = None,
    *,
    allow_signed: bool = False,
    max_events: int = 1000,
    scan_points: int = SCAN_POINTS,
    delta_min: float = DELTA_MIN,
) -> Trajectory:
    """Event-driven exact solution of the heat equation on ``[0, t_end]``.

    At each event time the ordered partition is rebuilt, the hypergraph is
    collapsed, and the linear dynamics are advanced in closed form until the
    next ordering change.  Events closer than ``delta_min`` are merged
    through the entry tie tolerance, which guards against event accumulation.
    """
    s = _validate_initial(G, s, allow_signed)
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    sample_times = np.asarray(grid, dtype=np.float64) if grid is not None else default_sample_times(t_end)
    sample_times = np.unique(np.clip(sample_times, 0.0, t_end))

    events: list[float] = [0.0]
    intervals: list[IntervalRecord] = []
    out_times: list[float] = []
    out_states: list[np.ndarray] = []

    def partial_trajectory():
        return Trajectory(
            solver="exact",
            hypergraph=G,
            initial=s,
            t_end=t_end,
            params={"max_events": max_events, "delta_min": delta_min},
            events=events,
            intervals=intervals,
            sample_times=np.asarray(out_times),
            sample_states=np.asarray(out_states) if out_states else np.zeros((0, G.n)),
        )

    t = 0.0
    rho = s.copy()
    if sample_times.size and sample_times[0] == 0.0:
        out_times.append(0.0)
        out_states.append(rho.copy())

    while True:
        record = _entry_record(G, rho, t)
        intervals.append(record)
        t_next = next_tie_time(
            G, record, horizon=t_end - t, scan_points=scan_points, delta_min=delta_min
        )
        upper = t_end if t_next is None else t_next
        for tau in sample_times[(sample_times > t) & (sample_times <= upper)]:
            out_times.append(float(tau))
            out_states.append(record.state_at_offset(float(tau) - t, G.degree))
        if t_next is None:
            if not out_times or out_times[-1] < t_end:
                out_times.append(t_end)
                out_states.append(record.state_at_offset(t_end - t, G.degree))
            break
        rho = record.state_at_offset(t_next - t, G.degree)
        if not out_times or out_times[-1] < t_next:
            out_times.append(t_next)
            out_states.append(rho.copy())
        t = t_next
        events.append(t)
        if len(events) > max_events:
            raise EventCapError(
                f"exceeded {max_events} events at t={t:g}", partial_trajectory()
            )

    return partial_trajectory()


# -- implicit Euler via the proximal operator -----------------------------------


def prox_objective(G: Hypergraph, xbar: np.ndarray, xbar_prev: np.ndarray, lam: float) -> float:
    """Value of the proximal objective: edge energy plus the anchoring term."""
    energy = 0.0
    for e in range(G.m):
        vals = xbar[G.edge_members[e]]
        f = float(vals.max() - vals.min())
        energy += G.edge_weights[e] * f * f
    diff = xbar - xbar_prev
    return 0.5 * lam * energy + 0.5 * float(np.sum(diff * diff * G.degree))


def _edge_prox(v: np.ndarray, c: float) -> np.ndarray:
    """Exact minimizer of ``(c/2)(max u - min u)^2 + (1/2)||u - v||^2``.

    Pool-adjacent search: the top pool is pulled down to a common level and
    the bottom pool up, growing either pool while an outside value would
    overtake it.  Sorting makes the top mean dominate the bottom mean, so
    the optimal spread is never negative.
    """
    k = v.size
    if k < 2:
        return v.copy()
    order = np.argsort(-v, kind="stable")
    vs = v[order]
    csum = np.cumsum(vs)
    a, b = 1, 1
    while True:
        Sa = float(csum[a - 1])
        Sb = float(csum[k - 1] - (csum[k - b - 1] if k - b - 1 >= 0 else 0.0))
        s = (Sa / a - Sb / b) / (1.0 + c * (1.0 / a + 1.0 / b))
        M = (Sa - c * s) / a
        m = (Sb + c * s) / b
        if a + b < k and vs[a] > M:
            a += 1
            continue
        if a + b < k and vs[k - b - 1] < m:
            b += 1
            continue
        break
    u = v.copy()
    u[order[:a]] = M
    u[order[k - b:]] = m
    return u


def _admm_prox(G: Hypergraph, p: np.ndarray, lam: float, x0: np.ndarray, iters: int, state=None):
    """ADMM on edge duplicates for the proximal objective.

    Each hyperedge gets a copy of its member values; the edge update is the
    exact closed-form single-edge prox, and the consensus update is diagonal.
    Returns the iterate and the carried ADMM state for warm restarts.
    """
    rho = max(1.0, float(G.degree.max()))
    members = G.edge_members
    if state is None:
        z = [p[mem].copy() for mem in members]
        u = [np.zeros(mem.size) for mem in members]
    else:
        z, u = state
    counts = np.zeros(G.n)
    for mem in members:
        counts[mem] += 1.0
    den = G.degree + rho * counts
    x = x0.copy()
    for _ in range(iters):
        num = G.degree * p
        for e, mem in enumerate(members):
            num_add = rho * (z[e] - u[e])
            np.add.at(num, mem, num_add)
        x = num / den
        for e, mem in enumerate(members):
            w = x[mem] + u[e]
            z[e] = _edge_prox(w, lam * G.edge_weights[e] / rho)
            u[e] = w - z[e]
    return x, (z, u)


def _union_groups(G: Hypergraph, x: np.ndarray, tol: float):
    """Equality groups induced by within-edge top/bottom pools at tolerance.

    Only vertices coupled through a pooled edge extreme are unioned;
    coincidentally equal values elsewhere stay independent.
    """
    parent = list(range(G.n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[rb] = ra

    for e in range(G.m):
        mem = G.edge_members[e]
        vals = x[mem]
        mx, mn = vals.max(), vals.min()
        top = mem[vals >= mx - tol]
        bot = mem[vals <= mn + tol]
        for v in top[1:]:
            union(int(top[0]), int(v))
        for v in bot[1:]:
            union(int(bot[0]), int(v))
    roots = {}
    group_of = np.empty(G.n, dtype=np.int64)
    for v in range(G.n):
        r = find(v)
        group_of[v] = roots.setdefault(r, len(roots))
    return group_of, len(roots)


def _pattern_polish(G: Hypergraph, x: np.ndarray, p: np.ndarray, lam: float, tol: float):
    """Exact optimum restricted to the tie pattern read off an iterate.

    Vertices pooled by edge extremes share one value; the restricted
    objective is an unconstrained positive-definite quadratic in the group
    values.  Returns None when the solved values contradict the assumed
    argmax/argmin pattern.
    """
    group_of, ng = _union_groups(G, x, tol)
    A = np.zeros((ng, ng))
    rhs = np.zeros(ng)
    for v in range(G.n):
        gv = group_of[v]
        A[gv, gv] += G.degree[v]
        rhs[gv] += G.degree[v] * p[v]
    for e in range(G.m):
        mem = G.edge_members[e]
        vals = x[mem]
        gt = group_of[mem[int(np.argmax(vals))]]
        gb = group_of[mem[int(np.argmin(vals))]]
        if gt == gb:
            continue
        w = lam * G.edge_weights[e]
        A[gt, gt] += w
        A[gb, gb] += w
        A[gt, gb] -= w
        A[gb, gt] -= w
    try:
        g = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError:
        return None
    out = g[group_of]
    # The assumed pattern must reproduce itself at the solved point.
    for e in range(G.m):
        mem = G.edge_members[e]
        vals = x[mem]
        new = out[mem]
        spread_tol = 1e-12 * (1.0 + float(np.max(np.abs(out))))
        if new[int(np.argmax(vals))] < new.max() - spread_tol:
            return None
        if new[int(np.argmin(vals))] > new.min() + spread_tol:
            return None
    return out


def _fit_element(G: Hypergraph, xbar: np.ndarray, xbar_prev: np.ndarray, lam: float):
    """Best certifying Laplacian element at ``xbar`` for the Euler residual.

    Minimizes ``|| D(xbar - xbar_prev) + lam * sum_e w_e f_e b_e ||_{D^{-1}}``
    over valid subgradient selections ``b_e``; exact ties make the argmax and
    argmin simplices the free directions.
    """
    v = G.degree * (xbar - xbar_prev)
    sel = support_selection(G, xbar, tol=0.0)
    blocks = []
    for e in range(G.m):
        vals = xbar[G.edge_members[e]]
        f = float(vals.max() - vals.min())
        if f <= 0.0:
            continue
        r = lam * G.edge_weights[e] * f
        blocks.append((+1, sel.S[e], r))
        blocks.append((-1, sel.I[e], r))
    resid, _ = min_norm_transport(G.degree, blocks, offset=v)
    return float(np.sqrt(np.sum(resid * resid / G.degree)))


def prox_step(
    G: Hypergraph,
    xbar_prev: np.ndarray,
    lam: float,
    inner_tol: float = 1e-10,
    residual_tol: float = 1e-6,
    max_iter: int = 4000,
):
    """One implicit-Euler step: the proximal operator of the edge energy.

    Minimizes ``lam/2 * sum_e w_e f_e(x)^2 + 1/2 ||x - xbar_prev||_D^2`` by
    ADMM on per-edge duplicates (the single-edge prox is exact), reads the
    tie pattern off the iterate, re-solves the pattern-restricted quadratic
    exactly, and certifies the implicit-Euler residual against
    ``lam * residual_tol`` with the best Laplacian element at the returned
    point.

    Returns ``(xbar, ProxStepReport)``; raises :class:`ProxStallError` when
    the certificate cannot be met within the iteration budget.
    """
    if lam <= 0:
        raise ValueError("prox step size must be positive")
    xbar_prev = np.asarray(xbar_prev, dtype=np.float64)
    p = xbar_prev
    target = lam * residual_tol
    scale = float(np.max(np.abs(p))) + 1e-30
    iters = 0
    best_report = None
    best_x = p.copy()
    x = p.copy()
    state = None
    block = 100
    prev_x = None
    while iters < max_iter:
        x, state = _admm_prox(G, p, lam, x, block, state)
        iters += block
        candidates = []
        for gtol in (1e-7, 1e-5, 1e-9, 1e-3):
            xp = _pattern_polish(G, x, p, lam, gtol * scale)
            if xp is not None:
                candidates.append(xp)
        candidates.append(x)
        for xc in candidates:
            resid = _fit_element(G, xc, p, lam)
            if best_report is None or resid < best_report.residual:
                best_report = ProxStepReport(
                    iterations=iters,
                    residual=resid,
                    objective=prox_objective(G, xc, p, lam),
                )
                best_x = xc
            if resid <= target:
                return xc, ProxStepReport(
                    iterations=iters,
                    residual=resid,
                    objective=prox_objective(G, xc, p, lam),
                )
        if prev_x is not None and float(np.max(np.abs(x - prev_x))) <= inner_tol * max(1.0, scale):
            break  # ADMM stalled without a certificate
        prev_x = x.copy()
    if best_report is None:
        best_report = ProxStepReport(
            iterations=iters,
            residual=_fit_element(G, x, p, lam),
            objective=prox_objective(G, x, p, lam),
        )
    raise ProxStallError(
        f"prox residual {best_report.residual:g} above target {target:g}",
        best_report,
    )


def solve_implicit(
    G: Hypergraph,
    s: np.ndarray,
    t_end: float,
    lam: float,
    grid: np.ndarray | None = None,
    *,
    allow_signed: bool = False,
    inner_tol: float = 1e-10,
    residual_tol: float = 1e-6,
) -> Trajectory:
    """Implicit-Euler (difference approximation) solve with uniform steps.

    Every step is one proximal operator evaluation; the trajectory is
    piecewise constant, holding each computed state through the following
    step interval.
    """
    s = _validate_initial(G, s, allow_signed)
    if not 0.0 < lam < 1.0:
        raise ValueError("implicit solver expects lam in (0, 1)")
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    n_steps = int(math.ceil(t_end / lam - 1e-12))
    step_states = [s.copy()]
    reports: list[ProxStepReport] = []
    x = s.copy()
    for _ in range(n_steps):
        xbar, report = prox_step(
            G, G.mu(x), lam, inner_tol=inner_tol, residual_tol=residual_tol
        )
        x = G.degree * xbar
        step_states.append(x.copy())
        reports.append(report)
    step_times = lam * np.arange(n_steps + 1)
    sample_times = np.asarray(grid, dtype=np.float64) if grid is not None else default_sample_times(t_end)
    sample_times = np.unique(np.clip(sample_times, 0.0, t_end))
    states = np.empty((sample_times.size, G.n))
    arr = np.asarray(step_states)
    for i, t in enumerate(sample_times):
        k = 0 if t <= 0 else min(int(math.ceil(t / lam)) - 1, n_steps)
        states[i] = arr[k]
    field_norm = G.dinv_norm(laplacian_apply(G, G.mu(s)))
    traj = Trajectory(
        solver="implicit",
        hypergraph=G,
        initial=s,
        t_end=t_end,
        params={
            "lam": lam,
            "residual_tol": residual_tol,
            "initial_field_norm": field_norm,
            "residual_sum": float(sum(r.residual for r in reports)),
        },
        events=[0.0],
        intervals=[],
        sample_times=sample_times,
        sample_states=states,
        step_times=step_times,
        step_states=arr,
        prox_reports=reports,
    )
    return traj


# -- RK4 reference ---------------------------------------------------------------


def solve_rk4(
    G: Hypergraph,
    s: np.ndarray,
    t_end: float,
    h: float,
    grid: np.ndarray | None = None,
    *,
    allow_signed: bool = False,
) -> Trajectory:
    """Classical RK4 on the canonical selection; reference and diagnostics only.

    The field is discontinuous at ordering ties, so accuracy across events is
    empirical rather than certified.
    """
    s = _validate_initial(G, s, allow_signed)
    if h <= 0:
        raise ValueError("step size must be positive")
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    sample_times = np.asarray(grid, dtype=np.float64) if grid is not None else default_sample_times(t_end)
    sample_times = np.unique(np.clip(sample_times, 0.0, t_end))
    positive = sample_times[sample_times > 0]
    states = _kernels.rk4_integrate(
        s,
        G.degree,
        G.edge_weights,
        G.incidence_starts,
        G.incidence_vertices,
        EPS_TIE,
        float(h),
        positive,
    )
    if sample_times.size and sample_times[0] == 0.0:
        states = np.vstack([s[None, :], states])
    return Trajectory(
        solver="rk4",
        hypergraph=G,
        initial=s,
        t_end=t_end,
        params={"h": float(h)},
        events=[0.0],
        intervals=[],
        sample_times=sample_times,
        sample_states=states,
    )
