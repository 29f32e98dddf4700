"""Multi-valued hypergraph Laplacian machinery.

Evaluates the canonical Laplacian element through an explicit support graph
(edge weight distributed uniformly over argmax/argmin pairs), builds the
ordered vertex partition that groups trajectories agreeing in value and in
all examined derivatives, and collapses the hypergraph onto that partition
as an ordinary weighted graph with self-loops whose linear heat dynamics
reproduce the hypergraph diffusion on an interval.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hypercore import Hypergraph

__all__ = [
    "EPS_TIE",
    "WeightedGraph",
    "OrderedPartition",
    "SupportSelection",
    "tie_tolerance",
    "lovasz_cut_extension",
    "support_selection",
    "support_graph",
    "selection_apply",
    "laplacian_apply",
    "normalized_laplacian_apply",
    "value_partition",
    "ordered_partition",
    "collapsed_graph",
    "dump_weighted_graph",
    "parse_weighted_graph",
]

# Relative tie tolerance for argmax/argmin sets and partition refinement.
# Diffusion makes exact ties generic; strict float equality would miss them.
EPS_TIE = 1e-9


class WeightedGraph:
    """Ordinary weighted undirected graph with self-loops, dense weights.

    ``weights[i, j]`` is symmetric; the diagonal holds self-loop weights,
    which count once in node degrees.  ``node_degree`` may be supplied when
    the construction knows degrees exactly (e.g. class volumes); otherwise it
    is the row sum.
    """

    def __init__(self, weights: np.ndarray, node_degree: np.ndarray | None = None):
        W = np.asarray(weights, dtype=np.float64)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise ValueError("weight matrix must be square")
        self.weights = W
        if node_degree is None:
            node_degree = W.sum(axis=1)
        self.node_degree = np.asarray(node_degree, dtype=np.float64)
        if self.node_degree.shape != (W.shape[0],):
            raise ValueError("node_degree has wrong shape")
        self.m = W.shape[0]
        self.volume = float(self.node_degree.sum())

    def pi(self) -> np.ndarray:
        return self.node_degree / self.volume

    def dinv_inner(self, x: np.ndarray, y: np.ndarray) -> float:
        return float(np.sum(x * y / self.node_degree))

    def dinv_norm(self, x: np.ndarray) -> float:
        return float(np.sqrt(np.sum(x * x / self.node_degree)))

    def normalized_laplacian_matrix(self) -> np.ndarray:
        """Random-walk normalized Laplacian ``I - A D^{-1}``."""
        return np.eye(self.m) - self.weights / self.node_degree[None, :]

    def sym_normalized_laplacian(self) -> np.ndarray:
        """Symmetric form ``D^{-1/2} (D - A) D^{-1/2}``."""
        s = 1.0 / np.sqrt(self.node_degree)
        L = np.diag(self.node_degree) - self.weights
        return s[:, None] * L * s[None, :]

    def cut_weight(self, subset) -> float:
        """Total weight of edges leaving ``subset``; self-loops never cut."""
        mask = np.zeros(self.m, dtype=bool)
        mask[np.asarray(list(subset), dtype=np.int64)] = True
        return float(self.weights[np.ix_(mask, ~mask)].sum())

    def conductance(self, subset) -> float:
        idx = np.asarray(sorted(int(v) for v in subset), dtype=np.int64)
        if idx.size == 0 or idx.size == self.m:
            raise ValueError("conductance needs a proper nonempty subset")
        vol = float(self.node_degree[idx].sum())
        return self.cut_weight(idx) / min(vol, self.volume - vol)

    def __repr__(self):
        return f"WeightedGraph(m={self.m}, vol={self.volume:g})"


@dataclass(frozen=True)
class OrderedPartition:
    """Totally ordered partition of the vertex set, highest class first.

    ``classes[0]`` collects the vertices with the lexicographically largest
    (value, derivative, ...) key.  ``converged`` is False when the refinement
    hit its round cap before reaching a fixed point; callers must treat such
    partitions as valid but report the flag.
    """

    classes: tuple[tuple[int, ...], ...]
    representatives: tuple[int, ...]
    refinement_depth: int
    converged: bool

    @property
    def size(self) -> int:
        return len(self.classes)

    def class_of(self, n: int) -> np.ndarray:
        out = np.empty(n, dtype=np.int64)
        for k, cls in enumerate(self.classes):
            out[np.asarray(cls, dtype=np.int64)] = k
        return out

    def sums(self, x: np.ndarray) -> np.ndarray:
        """Per-class sums of a vertex vector."""
        return np.array([float(np.sum(x[np.asarray(c, dtype=np.int64)])) for c in self.classes])

    def spread(self, class_values: np.ndarray, n: int) -> np.ndarray:
        """Copy per-class values back onto vertices."""
        out = np.empty(n, dtype=np.float64)
        for k, cls in enumerate(self.classes):
            out[np.asarray(cls, dtype=np.int64)] = class_values[k]
        return out


@dataclass(frozen=True)
class SupportSelection:
    """Per-edge argmax/argmin vertex sets, optionally refined by a partition.

    ``S[e]`` / ``I[e]`` are the tolerance-tied argmax/argmin sets of the
    driving vector on edge ``e``; ``S_ref[e]`` / ``I_ref[e]`` keep only the
    members of the highest (resp. lowest) partition class present, which is
    what the collapsed dynamics flow through.
    """

    S: tuple[tuple[int, ...], ...]
    I: tuple[tuple[int, ...], ...]
    S_ref: tuple[tuple[int, ...], ...]
    I_ref: tuple[tuple[int, ...], ...]


def tie_tolerance(x: np.ndarray) -> float:
    """Absolute tie threshold: ``EPS_TIE`` relative to max magnitude."""
    return EPS_TIE * float(np.max(np.abs(x))) if x.size else 0.0


def lovasz_cut_extension(members, xbar: np.ndarray) -> float:
    """Cut-function Lovasz extension on one edge: max minus min of the values."""
    vals = np.asarray(xbar, dtype=np.float64)[np.asarray(list(members), dtype=np.int64)]
    return float(vals.max() - vals.min())


def support_selection(
    G: Hypergraph,
    xbar: np.ndarray,
    partition: OrderedPartition | None = None,
    tol: float | None = None,
) -> SupportSelection:
    """Argmax/argmin sets of ``xbar`` per edge, refined by ``partition``.

    An edge whose values all lie within the tie tolerance is constant: its
    argmax and argmin sets are the whole edge.
    """
    xbar = np.asarray(xbar, dtype=np.float64)
    if tol is None:
        tol = tie_tolerance(xbar)
    class_of = partition.class_of(G.n) if partition is not None else None
    S_list, I_list, S_ref, I_ref = [], [], [], []
    for e in range(G.m):
        mem = G.edge_members[e]
        vals = xbar[mem]
        mx = vals.max()
        mn = vals.min()
        if mx - mn <= tol:
            S = I = tuple(int(v) for v in mem)
        else:
            S = tuple(int(v) for v in mem[vals >= mx - tol])
            I = tuple(int(v) for v in mem[vals <= mn + tol])
        S_list.append(S)
        I_list.append(I)
        if class_of is None:
            S_ref.append(S)
            I_ref.append(I)
        else:
            ks = class_of[np.asarray(S, dtype=np.int64)]
            ki = class_of[np.asarray(I, dtype=np.int64)]
            S_ref.append(tuple(int(v) for v, k in zip(S, ks) if k == ks.min()))
            I_ref.append(tuple(int(v) for v, k in zip(I, ki) if k == ki.max()))
    return SupportSelection(tuple(S_list), tuple(I_list), tuple(S_ref), tuple(I_ref))


def support_graph(G: Hypergraph, xbar: np.ndarray) -> WeightedGraph:
    """Explicit support graph realizing the canonical Laplacian element.

    Each edge's weight is split uniformly over its argmax x argmin pairs;
    self-loops absorb the slack so every node degree equals the hypergraph
    degree exactly.  Edges constant on ``xbar`` contribute self-loop mass
    only.
    """
    sel = support_selection(G, xbar)
    W = np.zeros((G.n, G.n))
    for e in range(G.m):
        S, I = sel.S[e], sel.I[e]
        if set(S) == set(I):  # constant on the edge: all mass to self-loops
            continue
        share = G.edge_weights[e] / (len(S) * len(I))
        for u in S:
            for v in I:
                if u != v:  # tolerance overlap carries no cross weight
                    W[u, v] += share
                    W[v, u] += share
    np.fill_diagonal(W, 0.0)
    np.fill_diagonal(W, G.degree - W.sum(axis=1))
    return WeightedGraph(W, node_degree=G.degree.copy())


def selection_apply(
    G: Hypergraph,
    vec: np.ndarray,
    S_list,
    I_list,
) -> np.ndarray:
    """Apply the frozen linear operator of a support selection to ``vec``.

    This is ``L' vec`` for the graph that splits each edge uniformly over
    ``S_list[e] x I_list[e]``; self-loop contributions cancel identically.
    """
    vec = np.asarray(vec, dtype=np.float64)
    out = np.zeros_like(vec)
    for e in range(G.m):
        S = np.asarray(S_list[e], dtype=np.int64)
        I = np.asarray(I_list[e], dtype=np.int64)
        w = G.edge_weights[e]
        mean_s = float(vec[S].mean())
        mean_i = float(vec[I].mean())
        np.add.at(out, S, (w / S.size) * (vec[S] - mean_i))
        np.add.at(out, I, (w / I.size) * (vec[I] - mean_s))
    return out


def laplacian_apply(G: Hypergraph, x: np.ndarray) -> np.ndarray:
    """Canonical element of the multi-valued Laplacian at ``x``.

    Equals ``L_{G'} x`` for the support graph ``G' = support_graph(G, x)``;
    entries always sum to zero.
    """
    sel = support_selection(G, x)
    return selection_apply(G, x, sel.S, sel.I)


def normalized_laplacian_apply(G: Hypergraph, rho: np.ndarray) -> np.ndarray:
    """Canonical element of the normalized Laplacian: apply at ``D^{-1} rho``."""
    return laplacian_apply(G, G.mu(rho))


# -- minimal-norm selection -----------------------------------------------------


def min_norm_transport(degree: np.ndarray, blocks, offset: np.ndarray | None = None, max_iter: int = 800):
    """Minimal-norm combination of simplex-distributed transport blocks.

    Each block is ``(sign, indices, radius)``: a mass ``radius`` distributed
    over ``indices`` with the given sign.  Minimizes the degree-inverse
    weighted norm of ``offset + sum of blocks`` by projected gradient over
    the scaled simplices and returns the optimal combination.

    With one +1 block on each edge's argmax set and one -1 block on its
    argmin set (radius ``w_e * spread_e``), this computes the element of the
    multi-valued Laplacian with minimal degree-inverse norm, i.e. the right
    derivative of the unique heat trajectory.
    """
    n = degree.size
    y = np.zeros(n) if offset is None else np.asarray(offset, dtype=np.float64).copy()
    dists = []
    for sign, idx, radius in blocks:
        idx = np.asarray(idx, dtype=np.int64)
        if idx.size == 1:
            y[idx[0]] += sign * radius
            dists.append(None)
            continue
        dist = np.full(idx.size, radius / idx.size)
        np.add.at(y, idx, sign * dist)
        dists.append(dist)
    free = [i for i, d in enumerate(dists) if d is not None]
    if free:
        dinv = 1.0 / degree
        slots = np.zeros(n)
        for i in free:
            slots[np.asarray(blocks[i][1], dtype=np.int64)] += 1.0
        step = 1.0 / (2.0 * float(np.max(slots * dinv)))
        scale = float(np.max(np.abs(y))) + 1e-300
        for _ in range(max_iter):
            g = 2.0 * y * dinv
            moved = 0.0
            for i in free:
                sign, idx, radius = blocks[i]
                idx = np.asarray(idx, dtype=np.int64)
                new = _project_scaled_simplex(dists[i] - sign * step * g[idx], radius)
                np.add.at(y, idx, sign * (new - dists[i]))
                moved = max(moved, float(np.max(np.abs(new - dists[i]))))
                dists[i] = new
            if moved <= 1e-15 * scale:
                break
    return y, dists


def _project_scaled_simplex(v: np.ndarray, radius: float) -> np.ndarray:
    """Euclidean projection onto ``{a >= 0, sum a = radius}``."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - radius
    ks = np.arange(1, v.size + 1)
    cond = u - css / ks > 0
    k = int(np.nonzero(cond)[0][-1]) + 1
    theta = css[k - 1] / k
    return np.maximum(v - theta, 0.0)


def minimal_norm_rates(G: Hypergraph, xbar: np.ndarray, tol: float | None = None) -> np.ndarray:
    """True instantaneous rates ``d mu / dt`` at a state.

    The heat trajectory's right derivative is the minimal-norm element of
    the (multi-valued) Laplacian in the degree-inverse metric; ties receive
    balanced flow, so exactly tied symmetric vertices get equal rates.
    """
    xbar = np.asarray(xbar, dtype=np.float64)
    if tol is None:
        tol = tie_tolerance(xbar)
    sel = support_selection(G, xbar, tol=tol)
    blocks = []
    for e in range(G.m):
        spread = lovasz_cut_extension(G.edge_members[e], xbar)
        if spread <= tol:
            continue
        radius = G.edge_weights[e] * spread
        blocks.append((+1, sel.S[e], radius))
        blocks.append((-1, sel.I[e], radius))
    y, _ = min_norm_transport(G.degree, blocks)
    return -y / G.degree


# -- ordered partition --------------------------------------------------------


def _group_rows(columns: list[np.ndarray], tols: list[float], n: int):
    """Group indices by lexicographic (descending) keys with per-column gaps."""
    groups = [list(range(n))]
    for col, tol in zip(columns, tols):
        refined = []
        for g in groups:
            ordered = sorted(g, key=lambda v: (-col[v], v))
            sub = [ordered[0]]
            for v in ordered[1:]:
                if col[sub[-1]] - col[v] > tol:
                    refined.append(sub)
                    sub = [v]
                else:
                    sub.append(v)
            refined.append(sub)
        groups = refined
    return [tuple(sorted(g)) for g in groups]


def _partition_from_groups(groups, depth: int, converged: bool) -> OrderedPartition:
    return OrderedPartition(
        classes=tuple(groups),
        representatives=tuple(g[0] for g in groups),
        refinement_depth=depth,
        converged=converged,
    )


def value_partition(G: Hypergraph, xbar: np.ndarray, tol: float | None = None) -> OrderedPartition:
    """Partition of V by value of ``xbar`` alone, ordered descending."""
    xbar = np.asarray(xbar, dtype=np.float64)
    if tol is None:
        tol = tie_tolerance(xbar)
    groups = _group_rows([xbar], [tol], G.n)
    return _partition_from_groups(groups, 0, True)


def ordered_partition(G: Hypergraph, rho: np.ndarray, max_depth: int | None = None) -> OrderedPartition:
    """Ordered partition of V by heat value and its trajectory derivatives.

    Starts from the partition of ``mu = D^{-1} rho`` by value, splits and
    orders value classes by the true instantaneous rates (minimal-norm
    selection: tied vertices stay together exactly when balanced flow can
    keep them together), then peels still-frozen classes by onset order:
    at round ``k`` the flow onsets driven by round ``k-1`` activity are
    distributed minimal-norm over each frozen class and the class splits
    and orders by the resulting coefficients.  Stops when every class is
    active or permanently frozen, or after ``max_depth`` rounds (default
    ``n``), in which case the partition carries ``converged=False``.
    """
    mu = G.mu(rho)
    vtol = tie_tolerance(mu)
    groups = _group_rows([mu], [vtol], G.n)
    if max_depth is None:
        max_depth = G.n
    max_depth = max(1, int(max_depth))
    if all(len(g) == 1 for g in groups):
        return _partition_from_groups(groups, 0, True)

    rate = minimal_norm_rates(G, mu, tol=vtol)
    rtol = EPS_TIE * float(np.max(np.abs(rate))) if np.any(rate) else 0.0
    columns = [mu, rate]
    tols = [vtol, rtol]
    groups = _group_rows(columns, tols, G.n)
    coeff = rate.copy()  # latest nonzero derivative coefficient per vertex
    onset = np.where(np.abs(rate) > rtol, 1, 0)

    depth = 1
    converged = True
    while onset.min() == 0 and depth < max_depth:
        depth += 1
        part = _partition_from_groups(groups, depth, True)
        class_of = part.class_of(G.n)
        sel = support_selection(G, mu, part, tol=vtol)
        onset_class = onset[[c[0] for c in part.classes]]
        coeff_class = coeff[[c[0] for c in part.classes]]
        blocks = []
        targets = []
        for e in range(G.m):
            kS = int(class_of[sel.S_ref[e][0]])
            kI = int(class_of[sel.I_ref[e][0]])
            if kS == kI:
                continue
            # Onset drive: growth rate of the edge spread, sourced from the
            # side that activated last round; zero until one side moves.
            cS = coeff_class[kS] if onset_class[kS] == depth - 1 else 0.0
            cI = coeff_class[kI] if onset_class[kI] == depth - 1 else 0.0
            drive = G.edge_weights[e] * (cS - cI)
            if drive <= 0.0:
                continue
            if onset_class[kS] == 0:
                blocks.append((+1, sel.S_ref[e], drive))
                targets.append(kS)
            if onset_class[kI] == 0:
                blocks.append((-1, sel.I_ref[e], drive))
                targets.append(kI)
        if not blocks:
            break  # remaining frozen classes receive no flow at any order
        y, _ = min_norm_transport(G.degree, blocks)
        accel = -y / G.degree
        ctol = EPS_TIE * float(np.max(np.abs(accel))) if np.any(accel) else 0.0
        col = np.where(onset == 0, accel, 0.0)
        columns.append(col)
        tols.append(ctol)
        groups = _group_rows(columns, tols, G.n)
        newly = (onset == 0) & (np.abs(accel) > ctol)
        coeff[newly] = accel[newly]
        onset[newly] = depth
        if not newly.any():
            break
    else:
        if onset.min() == 0 and depth >= max_depth:
            converged = False
    return _partition_from_groups(groups, depth, converged)


def collapsed_graph(G: Hypergraph, partition: OrderedPartition, sel: SupportSelection) -> WeightedGraph:
    """Collapse the hypergraph onto partition classes as a weighted graph.

    Cross weight between classes k and l sums the weights of edges whose
    refined argmax set meets one class and refined argmin set meets the
    other; self-loops make each node degree equal its class volume exactly.
    """
    class_of = partition.class_of(G.n)
    mc = partition.size
    W = np.zeros((mc, mc))
    for e in range(G.m):
        # Refined sets each live inside a single class by construction.
        k = int(class_of[sel.S_ref[e][0]])
        l = int(class_of[sel.I_ref[e][0]])
        if k != l:
            W[k, l] += G.edge_weights[e]
            W[l, k] += G.edge_weights[e]
    class_vol = np.array(
        [float(G.degree[np.asarray(c, dtype=np.int64)].sum()) for c in partition.classes]
    )
    np.fill_diagonal(W, 0.0)
    np.fill_diagonal(W, class_vol - W.sum(axis=1))
    return WeightedGraph(W, node_degree=class_vol)


# -- serialization -------------------------------------------------------------


def dump_weighted_graph(Gw: WeightedGraph) -> str:
    """Text form: hypergraph format with k=2 edges plus ``L v w`` self-loops."""
    cross = [
        (i, j, Gw.weights[i, j])
        for i in range(Gw.m)
        for j in range(i + 1, Gw.m)
        if Gw.weights[i, j] != 0.0
    ]
    lines = [f"{Gw.m} {len(cross)}"]
    for i, j, w in cross:
        lines.append(f"{float(w)!r} {i} {j}")
    for v in range(Gw.m):
        if Gw.weights[v, v] != 0.0:
            lines.append(f"L {v} {float(Gw.weights[v, v])!r}")
    return "\n".join(lines) + "\n"


def parse_weighted_graph(text: str) -> WeightedGraph:
    rows = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            rows.append(line)
    if not rows:
        raise ValueError("empty graph text")
    n, m = (int(p) for p in rows[0].split())
    W = np.zeros((n, n))
    for line in rows[1:]:
        fields = line.split()
        if fields[0] == "L":
            v = int(fields[1])
            W[v, v] = float(fields[2])
        else:
            w = float(fields[0])
            i, j = int(fields[1]), int(fields[2])
            W[i, j] += w
            W[j, i] += w
    if len([r for r in rows[1:] if not r.startswith("L")]) != m:
        raise ValueError("edge count mismatch")
    return WeightedGraph(W)
