"""Weighted hypergraph data model, conductance, sweep cuts, and a brute-force oracle.

Vertices are dense integer indices ``0..n-1``; optional names live in a side
table and never enter the numerics.  Vertex vectors are plain float arrays of
length ``n``; the degree-weighted inner products they need are provided by the
owning :class:`Hypergraph`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

__all__ = [
    "Cut",
    "Hypergraph",
    "HypergraphFormatError",
    "DisconnectedHypergraphError",
    "CapacityError",
    "conductance",
    "min_conductance_bruteforce",
    "sweep_sets",
    "best_sweep_cut",
    "parse_hypergraph",
    "load_hypergraph",
    "dump_hypergraph",
]

# Conductance ties are broken by subset order once values agree to this.
PHI_TIE_TOL = 1e-12

# Exhaustive enumeration guard for the oracle.
ORACLE_MAX_VERTICES = 24


class HypergraphFormatError(ValueError):
    """Raised when hypergraph text input cannot be parsed or validated."""


class DisconnectedHypergraphError(ValueError):
    """Raised when an input hypergraph is not connected."""


class CapacityError(ValueError):
    """Raised when an exact routine is asked to exceed its size guard."""


@dataclass(frozen=True)
class Cut:
    """A proper vertex subset with its boundary weight and conductance."""

    subset: tuple[int, ...]
    cut_weight: float
    conductance: float


class Hypergraph:
    """Immutable weighted hypergraph with cached degrees and volume.

    Parameters
    ----------
    n : int
        Number of vertices; must be at least 2.
    edges : iterable of (members, weight)
        Each ``members`` is an iterable of at least two distinct vertex ids in
        ``range(n)``; ``weight`` must be positive.
    names : sequence of str, optional
        Display names, kept out of all numerics.
    require_connected : bool
        Reject disconnected inputs (the diffusion theory assumes
        connectivity).  Default True.
    """

    def __init__(self, n, edges, names=None, require_connected=True):
        if n < 2:
            raise ValueError(f"hypergraph needs at least 2 vertices, got n={n}")
        self.n = int(n)
        members_list = []
        weights = []
        for members, weight in edges:
            arr = np.asarray(sorted(int(v) for v in members), dtype=np.int64)
            if arr.size < 2:
                raise ValueError(f"hyperedge {arr.tolist()} has fewer than 2 vertices")
            if np.unique(arr).size != arr.size:
                raise ValueError(f"hyperedge {arr.tolist()} has repeated vertices")
            if arr[0] < 0 or arr[-1] >= self.n:
                raise ValueError(f"hyperedge {arr.tolist()} out of range for n={n}")
            w = float(weight)
            if not w > 0.0:
                raise ValueError(f"hyperedge weight must be positive, got {w}")
            members_list.append(arr)
            weights.append(w)
        self.edge_members: tuple[np.ndarray, ...] = tuple(members_list)
        self.edge_weights = np.asarray(weights, dtype=np.float64)
        self.m = len(members_list)
        if names is not None:
            names = tuple(str(s) for s in names)
            if len(names) != self.n:
                raise ValueError("names table length does not match n")
        self.names: tuple[str, ...] | None = names

        # Flat incidence (CSR-style) for vectorized kernels.
        sizes = np.array([a.size for a in members_list], dtype=np.int64)
        self.edge_sizes = sizes
        self.incidence_starts = np.concatenate(
            [np.zeros(1, dtype=np.int64), np.cumsum(sizes)]
        )
        self.incidence_vertices = (
            np.concatenate(members_list) if members_list else np.zeros(0, dtype=np.int64)
        )

        degree = np.zeros(self.n, dtype=np.float64)
        for arr, w in zip(members_list, weights):
            degree[arr] += w
        self.degree = degree
        self.degree.flags.writeable = False
        self.total_volume = float(degree.sum())
        self._edge_bitmasks = tuple(int(np.sum(1 << arr.astype(object))) for arr in members_list)

        if require_connected and not self.is_connected():
            raise DisconnectedHypergraphError(
                "hypergraph is not connected; diffusion requires a connected input"
            )

    # -- basic structure ---------------------------------------------------

    def is_connected(self) -> bool:
        """True when every vertex is reachable through shared hyperedges."""
        parent = list(range(self.n))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for arr in self.edge_members:
            r = find(int(arr[0]))
            for v in arr[1:]:
                rv = find(int(v))
                if rv != r:
                    parent[rv] = r
        roots = {find(v) for v in range(self.n)}
        return len(roots) == 1

    def edge_bitmask(self, e: int) -> int:
        return self._edge_bitmasks[e]

    def volume(self, subset: Iterable[int]) -> float:
        idx = np.fromiter((int(v) for v in subset), dtype=np.int64)
        return float(self.degree[idx].sum())

    # -- canonical vectors -------------------------------------------------

    def pi(self) -> np.ndarray:
        """Stationary distribution ``d(v) / vol(V)``."""
        return self.degree / self.total_volume

    def pi_subset(self, subset: Iterable[int]) -> np.ndarray:
        """Degree-proportional distribution restricted to ``subset``."""
        idx = np.fromiter((int(v) for v in subset), dtype=np.int64)
        if idx.size == 0:
            raise ValueError("pi_subset needs a nonempty subset")
        out = np.zeros(self.n)
        out[idx] = self.degree[idx] / self.degree[idx].sum()
        return out

    def pi_vertex(self, v: int) -> np.ndarray:
        """Point distribution at ``v`` (all heat on one vertex)."""
        return self.pi_subset([v])

    def mu(self, rho: np.ndarray) -> np.ndarray:
        """Degree-normalized state ``D^{-1} rho``."""
        return np.asarray(rho, dtype=np.float64) / self.degree

    # -- degree-weighted geometry -------------------------------------------

    def dinv_inner(self, x: np.ndarray, y: np.ndarray) -> float:
        return float(np.sum(x * y / self.degree))

    def dinv_norm(self, x: np.ndarray) -> float:
        return float(np.sqrt(np.sum(x * x / self.degree)))

    def d_norm(self, x: np.ndarray) -> float:
        return float(np.sqrt(np.sum(x * x * self.degree)))

    def __repr__(self):
        return f"Hypergraph(n={self.n}, m={self.m}, vol={self.total_volume:g})"


# -- conductance ------------------------------------------------------------


def _subset_mask(G: Hypergraph, subset: Iterable[int]) -> int:
    mask = 0
    for v in subset:
        v = int(v)
        if v < 0 or v >= G.n:
            raise ValueError(f"vertex {v} out of range")
        bit = 1 << v
        if mask & bit:
            raise ValueError(f"repeated vertex {v} in subset")
        mask |= bit
    return mask


def conductance(G: Hypergraph, subset: Iterable[int]) -> Cut:
    """Conductance of a proper nonempty subset.

    The boundary consists of hyperedges with members on both sides; the
    denominator is the smaller of the two volumes.
    """
    mask = _subset_mask(G, subset)
    full = (1 << G.n) - 1
    if mask == 0 or mask == full:
        raise ValueError("conductance needs a proper nonempty subset")
    cut_weight = 0.0
    for e in range(G.m):
        em = G.edge_bitmask(e)
        inter = em & mask
        if inter != 0 and inter != em:
            cut_weight += float(G.edge_weights[e])
    vol_s = float(sum(G.degree[v] for v in range(G.n) if (mask >> v) & 1))
    denom = min(vol_s, G.total_volume - vol_s)
    members = tuple(v for v in range(G.n) if (mask >> v) & 1)
    return Cut(subset=members, cut_weight=cut_weight, conductance=cut_weight / denom)


def _mask_to_subset(mask: int, n: int) -> tuple[int, ...]:
    return tuple(v for v in range(n) if (mask >> v) & 1)


def min_conductance_bruteforce(G: Hypergraph, chunk: int = 1 << 18) -> Cut:
    """Exact minimum-conductance cut by exhaustive subset enumeration.

    Complement symmetry halves the work: only subsets containing vertex 0 are
    enumerated, which also makes the lexicographically-smallest tie-break
    exact (any tied subset avoiding vertex 0 has a lexicographically smaller
    complement that is also tied).

    Raises
    ------
    CapacityError
        If ``G.n`` exceeds ``ORACLE_MAX_VERTICES``.
    """
    if G.n > ORACLE_MAX_VERTICES:
        raise CapacityError(
            f"brute-force oracle limited to n <= {ORACLE_MAX_VERTICES}, got n={G.n}"
        )
    full = (1 << G.n) - 1
    edge_masks = np.array([G.edge_bitmask(e) for e in range(G.m)], dtype=np.uint32)
    weights = G.edge_weights
    degree = G.degree

    def chunk_stats(masks: np.ndarray):
        vols = np.zeros(masks.shape, dtype=np.float64)
        for v in range(G.n):
            vols += degree[v] * ((masks >> np.uint32(v)) & np.uint32(1))
        cut = np.zeros(masks.shape, dtype=np.float64)
        for e in range(G.m):
            em = edge_masks[e]
            inter = masks & em
            cut += weights[e] * ((inter != 0) & (inter != em))
        return cut, cut / np.minimum(vols, G.total_volume - vols)

    # Pass 1: global minimum conductance.
    best_phi = np.inf
    for lo in range(1, full, chunk):
        masks = np.arange(lo, min(lo + chunk, full), 2, dtype=np.uint32)
        if masks.size == 0:
            continue
        _, phis = chunk_stats(masks)
        best_phi = min(best_phi, float(phis.min()))

    # Pass 2: lexicographic reduction over ties.
    best: tuple[tuple[int, ...], float, float] | None = None
    for lo in range(1, full, chunk):
        masks = np.arange(lo, min(lo + chunk, full), 2, dtype=np.uint32)
        if masks.size == 0:
            continue
        cut, phis = chunk_stats(masks)
        for i in np.nonzero(phis <= best_phi + PHI_TIE_TOL)[0]:
            subset = _mask_to_subset(int(masks[i]), G.n)
            if best is None or subset < best[0]:
                best = (subset, float(cut[i]), float(phis[i]))
    assert best is not None
    return Cut(subset=best[0], cut_weight=best[1], conductance=best[2])


# -- sweep machinery ---------------------------------------------------------


def sweep_sets(x: np.ndarray) -> list[tuple[int, ...]]:
    """All distinct proper sweep sets of a vertex vector.

    Returns superlevel sets ``{v : x(v) >= tau}`` for descending thresholds
    followed by sublevel sets ``{v : x(v) <= tau}`` for ascending thresholds,
    one per distinct value, excluding the full vertex set.  Exactly tied
    entries always stay together, so a constant vector yields no proper sweep
    set and the result is empty.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    values = np.unique(x)  # ascending
    out: list[tuple[int, ...]] = []
    for tau in values[::-1][:-1]:  # skip smallest: that superlevel set is V
        out.append(tuple(np.nonzero(x >= tau)[0].tolist()))
    for tau in values[:-1]:  # skip largest: that sublevel set is V
        out.append(tuple(np.nonzero(x <= tau)[0].tolist()))
    assert len(out) <= 2 * (n - 1)
    return out


def _ordered_prefix_cuts(G: Hypergraph, x: np.ndarray):
    """Cut weight and volume of every sweep prefix of the descending order of x.

    Returns ``(order, boundaries, cut_weights, volumes)`` where ``order`` sorts
    ``x`` descending (stable) and ``boundaries`` are the prefix lengths ``b``
    at which a proper sweep set ends (value changes at rank ``b``).  Cut
    weights are accumulated in O(total incidence) with a difference array:
    an edge crosses prefix ``b`` exactly when ``min rank < b <= max rank``.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    order = np.argsort(-x, kind="stable")
    xs = x[order]
    boundaries = np.nonzero(xs[:-1] != xs[1:])[0] + 1  # proper prefixes only
    rank = np.empty(n, dtype=np.int64)
    rank[order] = np.arange(n)
    diff = np.zeros(n + 1, dtype=np.float64)
    for e in range(G.m):
        r = rank[G.edge_members[e]]
        lo = int(r.min())
        hi = int(r.max())
        if lo != hi:
            diff[lo + 1] += G.edge_weights[e]
            diff[hi + 1] -= G.edge_weights[e]
    cut_at = np.cumsum(diff)[1 : n + 1]  # cut weight of prefix of length b, b=1..n
    vols = np.cumsum(G.degree[order])
    return order, boundaries, cut_at, vols


def best_sweep_cut(G: Hypergraph, x: np.ndarray) -> Cut:
    """Minimum-conductance sweep set of ``x``.

    Ties within ``PHI_TIE_TOL`` are broken by smaller cardinality, then by
    lexicographic subset order.  Upper and lower sweeps at the same threshold
    are complements with equal conductance, so scanning prefixes of the
    descending order covers every candidate value.
    """
    x = np.asarray(x, dtype=np.float64)
    if np.ptp(x) == 0.0:
        raise ValueError("best_sweep_cut needs a non-constant vector")
    order, boundaries, cut_at, vols = _ordered_prefix_cuts(G, x)
    total = G.total_volume
    best: tuple[float, int, tuple[int, ...], float] | None = None
    for b in boundaries:
        cw = float(cut_at[b - 1])
        phi = cw / min(float(vols[b - 1]), total - float(vols[b - 1]))
        # The prefix and its complement tie in phi; keep both as candidates.
        for side in (order[:b], order[b:]):
            subset = tuple(sorted(int(v) for v in side))
            key = (len(subset), subset)
            if (
                best is None
                or phi < best[0] - PHI_TIE_TOL
                or (phi <= best[0] + PHI_TIE_TOL and key < (best[1], best[2]))
            ):
                best = (phi, key[0], subset, cw)
    assert best is not None
    return Cut(subset=best[2], cut_weight=best[3], conductance=best[0])


# -- text format --------------------------------------------------------------


def parse_hypergraph(text: str, require_connected: bool = True) -> Hypergraph:
    """Parse the hypergraph text format.

    First data line is ``n m``; each of the following ``m`` lines is
    ``w v1 v2 ... vk`` with 0-based vertex ids.  ``#`` starts a comment.
    """
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            rows.append((lineno, line))
    if not rows:
        raise HypergraphFormatError("empty hypergraph file")
    lineno, header = rows[0]
    parts = header.split()
    if len(parts) != 2:
        raise HypergraphFormatError(f"line {lineno}: expected header 'n m'")
    try:
        n, m = int(parts[0]), int(parts[1])
    except ValueError as exc:
        raise HypergraphFormatError(f"line {lineno}: bad header {header!r}") from exc
    if len(rows) - 1 != m:
        raise HypergraphFormatError(
            f"expected {m} edge lines, found {len(rows) - 1}"
        )
    edges = []
    for lineno, line in rows[1:]:
        fields = line.split()
        if len(fields) < 3:
            raise HypergraphFormatError(
                f"line {lineno}: edge needs a weight and at least 2 vertices"
            )
        try:
            w = float(fields[0])
            members = [int(f) for f in fields[1:]]
        except ValueError as exc:
            raise HypergraphFormatError(f"line {lineno}: bad edge {line!r}") from exc
        edges.append((members, w))
    try:
        return Hypergraph(n, edges, require_connected=require_connected)
    except DisconnectedHypergraphError:
        raise
    except ValueError as exc:
        raise HypergraphFormatError(str(exc)) from exc


def load_hypergraph(path, require_connected: bool = True) -> Hypergraph:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_hypergraph(fh.read(), require_connected=require_connected)


def dump_hypergraph(G: Hypergraph) -> str:
    lines = [f"{G.n} {G.m}"]
    for e in range(G.m):
        members = " ".join(str(int(v)) for v in G.edge_members[e])
        lines.append(f"{float(G.edge_weights[e])!r} {members}")
    return "\n".join(lines) + "\n"
