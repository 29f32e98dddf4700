"""End-to-end driver: Cheeger cuts from heat trajectories, plus verification suites.

The single-run mode loads a hypergraph, diffuses heat from a source vertex,
and reports the best sweep cut found in a time window together with the full
diagnostic bundle.  The suite mode generates random planted instances and
runs every verifier, emitting one JSON-lines record per instance.  Output is
deterministic for a fixed configuration and seed.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass

import numpy as np

from .hypercore import (
    Cut,
    DisconnectedHypergraphError,
    Hypergraph,
    HypergraphFormatError,
    best_sweep_cut,
    load_hypergraph,
    min_conductance_bruteforce,
)
from .laplacian import support_graph, tie_tolerance
from .spectral import decompose
from .diffusion import (
    EventCapError,
    ProxStallError,
    solve_exact,
    solve_implicit,
    solve_rk4,
)
from .analysis import g_v, h_v, kappa, verify_corollary_1_2, verify_theorem_1_1

__all__ = [
    "RunConfig",
    "initial_lambda2",
    "default_window",
    "planted_hypergraph",
    "run_cheeger_cut",
    "run_verification_suite",
    "main",
]

OUTPUT_SCHEMA_VERSION = 1
ORACLE_MAX_N = 12
LAMBDA2_FLOOR = 1e-8


@dataclass
class RunConfig:
    """Configuration for one CLI invocation."""

    input_path: str | None = None
    solver: str = "exact"
    source: str = "auto"
    T: float | None = None
    t: float | None = None
    lam: float = 0.01
    step: float = 1e-3
    seed: int = 0
    output: str | None = None
    suite: bool = False
    suite_n: int = 200
    suite_n_min: int = 4
    suite_n_max: int = 8
    suite_bridges: int = 1

    def validate(self):
        if self.solver not in ("exact", "implicit", "rk4"):
            raise ValueError(f"unknown solver {self.solver!r}")
        if self.T is not None and self.t is not None and not 0 <= self.T < self.t:
            raise ValueError("window must satisfy 0 <= T < t")
        if self.solver == "implicit" and not 0 < self.lam < 1:
            raise ValueError("implicit solver needs lambda in (0, 1)")
        if self.solver == "rk4" and not self.step > 0:
            raise ValueError("rk4 solver needs a positive step")


def initial_lambda2(G: Hypergraph, v: int) -> float:
    """Second eigenvalue of the support graph at the point-mass start.

    Often near zero: edges away from the source are constant at the start,
    so the support graph is usually disconnected.  Callers floor the value
    before dividing.
    """
    mu0 = G.mu(G.pi_vertex(v))
    dec = decompose(support_graph(G, mu0))
    return float(dec.eigenvalues[1])


def default_window(G: Hypergraph, v: int) -> tuple[float, float]:
    """Default sweep window: fixed early start, end scaled by the mixing rate."""
    lam2 = max(initial_lambda2(G, v), LAMBDA2_FLOOR)
    T = 0.25
    return T, max(8.0 / lam2, 2.0 * T)


def _select_source(G: Hypergraph, source: str) -> int:
    if source == "auto":
        return int(np.argmax(G.degree))
    v = int(source)
    if not 0 <= v < G.n:
        raise ValueError(f"source vertex {v} out of range")
    return v


def _json_dumps(doc) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def _cut_dict(cut: Cut) -> dict:
    return {
        "subset": list(cut.subset),
        "cut_weight": cut.cut_weight,
        "conductance": cut.conductance,
    }


def run_cheeger_cut(cfg: RunConfig) -> dict:
    """Diffuse from the source and return the best sweep cut in the window."""
    cfg.validate()
    G = load_hypergraph(cfg.input_path)
    v = _select_source(G, cfg.source)
    T, t = cfg.T, cfg.t
    if T is None or t is None:
        dT, dt = default_window(G, v)
        # Time-stepped solvers pay per unit time; cap their default horizon
        # (an explicit --t always wins).
        if cfg.solver == "implicit":
            dt = min(dt, 16.0)
        elif cfg.solver == "rk4":
            dt = min(dt, 64.0)
        T = dT if T is None else T
        t = dt if t is None else t
    if not 0 <= T < t:
        raise ValueError("window must satisfy 0 <= T < t")

    s = G.pi_vertex(v)
    if cfg.solver == "exact":
        traj = solve_exact(G, s, t_end=t)
        kap, cut, xi = kappa(G, traj, T, t)
    else:
        if cfg.solver == "implicit":
            traj = solve_implicit(G, s, t_end=t, lam=cfg.lam)
        else:
            traj = solve_rk4(G, s, t_end=t, h=cfg.step)
        cut = None
        xi = None
        for tau in traj.sample_times[(traj.sample_times >= T) & (traj.sample_times <= t)]:
            mu = G.mu(traj.sample_states[np.searchsorted(traj.sample_times, tau)])
            if float(np.ptp(mu)) <= tie_tolerance(mu):
                continue
            cand = best_sweep_cut(G, mu)
            if cut is None or cand.conductance < cut.conductance - 1e-12:
                cut = cand
                xi = float(tau)
        if cut is None:
            raise ValueError("no non-constant state sampled in the window")
        kap = cut.conductance

    doc = {
        "hyperheat": OUTPUT_SCHEMA_VERSION,
        "config": {
            "input": cfg.input_path,
            "solver": cfg.solver,
            "source": v,
            "T": T,
            "t": t,
            "lambda": cfg.lam if cfg.solver == "implicit" else None,
            "step": cfg.step if cfg.solver == "rk4" else None,
            "seed": cfg.seed,
        },
        "S_out": list(cut.subset),
        "phi_out": cut.conductance,
        "cut_weight": cut.cut_weight,
        "witness_time": xi,
    }

    if G.n <= ORACLE_MAX_N:
        oracle = min_conductance_bruteforce(G)
        doc["oracle"] = _cut_dict(oracle)
    else:
        doc["oracle"] = None

    diagnostics = {"kappa": kap}
    try:
        rho_T = traj.state_at(T)
    except ValueError:
        rho_T = None
    if rho_T is not None and cfg.solver == "exact":
        diagnostics["g"] = g_v(G, traj, T)
        try:
            h, j0, overlap = h_v(G, traj, T)
            diagnostics.update({"h": h, "j0": j0, "overlap": overlap})
        except ValueError:
            diagnostics.update({"h": None, "j0": None, "overlap": None})
    doc["diagnostics"] = _finite(diagnostics)

    doc["trajectory"] = {
        "solver": traj.solver,
        "events": len(traj.events),
        "samples": int(traj.sample_times.size),
        "path": (cfg.output + ".traj.json") if cfg.output else None,
    }
    if cfg.output:
        with open(cfg.output + ".traj.json", "w", encoding="utf-8") as fh:
            fh.write(_json_dumps(traj.to_json_dict()))
    return doc


def _finite(obj):
    """Replace non-finite floats so the JSON stays standard."""
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_finite(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


# -- random instances ----------------------------------------------------------


def planted_hypergraph(
    rng: np.random.Generator,
    n: int,
    intra_per_cluster: int | None = None,
    bridges: int = 1,
    size_range: tuple[int, int] = (2, 4),
    weight_range: tuple[float, float] = (0.5, 2.0),
    max_tries: int = 200,
) -> Hypergraph:
    """Two-cluster planted model with small hyperedges and bridge edges.

    Intra-cluster edges of size 2..4 are sampled inside each half; bridge
    edges take members from both sides.  Connectivity is guaranteed by
    retrying the draw.
    """
    if n < 4:
        raise ValueError("planted model needs n >= 4")
    half = n // 2
    clusters = (np.arange(half), np.arange(half, n))
    if intra_per_cluster is None:
        intra_per_cluster = max(2, half)
    for _ in range(max_tries):
        edges = []
        for cluster in clusters:
            for _ in range(intra_per_cluster):
                k = int(rng.integers(size_range[0], min(size_range[1], cluster.size) + 1))
                members = rng.choice(cluster, size=k, replace=False)
                edges.append((members.tolist(), float(rng.uniform(*weight_range))))
        for _ in range(bridges):
            k = int(rng.integers(2, size_range[1] + 1))
            ka = int(rng.integers(1, k))
            a = rng.choice(clusters[0], size=min(ka, clusters[0].size), replace=False)
            b = rng.choice(clusters[1], size=min(k - ka, clusters[1].size), replace=False)
            edges.append((np.concatenate([a, b]).tolist(), float(rng.uniform(*weight_range))))
        try:
            return Hypergraph(n, edges)
        except DisconnectedHypergraphError:
            continue
    raise RuntimeError("could not draw a connected instance")


# -- verification suite ----------------------------------------------------------


def run_verification_suite(cfg: RunConfig, stream=None) -> dict:
    """Random-instance verification run; one JSON line per instance.

    Generates connected planted hypergraphs, solves exact diffusion from the
    max-degree vertex, and checks mass conservation, convergence, norm
    monotonicity, and both main inequalities.  Failures are recorded in the
    records and the aggregate, never raised.
    """
    cfg.validate()
    records = []
    seed_seq = np.random.SeedSequence(cfg.seed)
    children = seed_seq.spawn(max(cfg.suite_n, 0))
    for idx in range(cfg.suite_n):
        rng = np.random.default_rng(children[idx])
        n = int(rng.integers(cfg.suite_n_min, cfg.suite_n_max + 1))
        G = planted_hypergraph(rng, n, bridges=cfg.suite_bridges)
        v = int(np.argmax(G.degree))
        lam2 = max(initial_lambda2(G, v), LAMBDA2_FLOOR)
        T = 0.25
        t = 8.0 / lam2
        t_conv = 40.0 / lam2
        traj = solve_exact(G, G.pi_vertex(v), t_end=t_conv)
        pi = G.pi()

        mass_err = float(np.max(traj.mass_errors()))
        norms = np.array([G.dinv_norm(st - pi) for st in traj.sample_states])
        converged = bool(norms[-1] <= 1e-6)
        monotone = bool(np.all(np.diff(norms) <= 1e-9))
        oracle = min_conductance_bruteforce(G)
        thm = verify_theorem_1_1(G, v, T, min(t, t_conv), traj=traj)
        cor = verify_corollary_1_2(
            G, v, T, min(t, t_conv), traj=traj, phi_oracle=oracle.conductance
        )
        record = {
            "index": idx,
            "n": G.n,
            "m": G.m,
            "source": v,
            "lambda2_hat": lam2,
            "phi_oracle": oracle.conductance,
            "mass_error": mass_err,
            "converged": converged,
            "monotone_norm": monotone,
            "theorem_1_1": _finite(thm.to_json_dict()),
            "corollary_1_2": _finite(cor.to_json_dict()),
            "pass": bool(
                mass_err <= 1e-10
                and converged
                and monotone
                and thm.all_passed()
                and cor.all_passed()
            ),
        }
        records.append(record)
        if stream is not None:
            stream.write(_json_dumps(record) + "\n")
    summary = {
        "hyperheat": OUTPUT_SCHEMA_VERSION,
        "suite_n": cfg.suite_n,
        "seed": cfg.seed,
        "passes": sum(1 for r in records if r["pass"]),
        "failures": sum(1 for r in records if not r["pass"]),
        "corollary_na": sum(
            1 for r in records if r["corollary_1_2"]["applicable"] is False
        ),
    }
    if stream is not None:
        stream.write(_json_dumps(summary) + "\n")
    return summary


# -- entry point ------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="hyperheat",
        description="Find low-conductance hypergraph cuts by sweeping heat trajectories.",
    )
    p.add_argument("--input", dest="input_path", help="hypergraph text file")
    p.add_argument("--solver", default="exact", choices=["exact", "implicit", "rk4"])
    p.add_argument("--source", default="auto", help="source vertex id or 'auto' (max degree)")
    p.add_argument("--T", dest="T", type=float, default=None, help="window start")
    p.add_argument("--t", dest="t", type=float, default=None, help="window end")
    p.add_argument("--lambda", dest="lam", type=float, default=0.01, help="implicit step")
    p.add_argument("--step", dest="step", type=float, default=1e-3, help="rk4 step")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", default=None, help="write JSON here instead of stdout")
    p.add_argument("--suite", action="store_true", help="run the verification suite")
    p.add_argument("--suite-n", dest="suite_n", type=int, default=200)
    return p


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    cfg = RunConfig(
        input_path=args.input_path,
        solver=args.solver,
        source=args.source,
        T=args.T,
        t=args.t,
        lam=args.lam,
        step=args.step,
        seed=args.seed,
        output=args.output,
        suite=args.suite,
        suite_n=args.suite_n,
    )
    try:
        if cfg.suite:
            if cfg.output:
                with open(cfg.output, "w", encoding="utf-8") as fh:
                    run_verification_suite(cfg, stream=fh)
            else:
                run_verification_suite(cfg, stream=sys.stdout)
            return 0
        if not cfg.input_path:
            print("error: --input is required unless --suite is given", file=sys.stderr)
            return 2
        doc = run_cheeger_cut(cfg)
    except (HypergraphFormatError, DisconnectedHypergraphError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except EventCapError as exc:
        partial = {"hyperheat": OUTPUT_SCHEMA_VERSION, "error": str(exc), "partial": True}
        _emit(partial, cfg.output)
        return 3
    except ProxStallError as exc:
        partial = {
            "hyperheat": OUTPUT_SCHEMA_VERSION,
            "error": str(exc),
            "partial": True,
            "residual": exc.report.residual,
        }
        _emit(partial, cfg.output)
        return 3
    _emit(doc, cfg.output)
    return 0


def _emit(doc: dict, output: str | None):
    text = _json_dumps(doc)
    if output:
        with open(output, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


if __name__ == "__main__":
    sys.exit(main())
