"""Run orchestration: seeded sweeps, CSV outputs, manifests, verification.

Every command takes an ExperimentConfig and writes CSV files plus a JSON
manifest into the configured output directory.  Work is distributed over a
worker pool keyed by (N, seed index); each run derives its own seeds, so
results are byte-identical regardless of worker count, and the manifest is
written once by the coordinator after a deterministic sort.

CSV schemas (1-based state labels in headers):

* trajectory  t,event_index,Y_1..Y_K,Ybar_1..Ybar_K
* fluid       t,y_1..y_K
* compare     N,seed,sup_distance          (+ median table N,seeds,median_sup_distance)
* concentration  N,epsilon,trials,exceedances,p_hat,ci_low,ci_high
* aux tail    N,epsilon,trials,exceedances,p_hat,ci_low,ci_high,ceiling
* martingale  N,k,seeds,mean_square,ceiling (+ finals N,seed,Mbar_1..Mbar_K)
* modulus     N,delta,omega
* poisson     N,alpha,trials,hits,p_hat,ci_low,ci_high,analytic,within_ci
* gap         t,R_1_1,...,R_K_K (row-major pairs)
"""

from __future__ import annotations

import itertools
import json
import math
import os
import time
from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2

from . import __version__, diagnostics, fluid, microsim, model, network
from .config import ExperimentConfig, config_hash
from .errors import ConfigError
from .rng import derive_seed, make_stream
from .util import fmt, parallel_map

MANIFEST_NAME = "manifest.json"


# ---------------------------------------------------------------------------
# CSV and manifest plumbing
# ---------------------------------------------------------------------------

def _ensure_outdir(cfg: ExperimentConfig) -> str:
    outdir = cfg.output_dir()
    try:
        os.makedirs(outdir, exist_ok=True)
        probe = os.path.join(outdir, ".write_probe")
        with open(probe, "w") as fh:
            fh.write("ok")
        os.remove(probe)
    except OSError as exc:
        raise ConfigError(f"output directory {outdir!r} is not writable: {exc}")
    return outdir


def write_csv(path: str, header: list[str], rows) -> int:
    count = 0
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")
            count += 1
    return count


def trajectory_header(K: int) -> list[str]:
    return (["t", "event_index"]
            + [f"Y_{k + 1}" for k in range(K)]
            + [f"Ybar_{k + 1}" for k in range(K)])


def fluid_header(K: int) -> list[str]:
    return ["t"] + [f"y_{k + 1}" for k in range(K)]


def gap_header(K: int) -> list[str]:
    return ["t"] + [f"R_{m + 1}_{l + 1}"
                    for m in range(K) for l in range(K)]


def write_manifest(outdir: str, cfg: ExperimentConfig, command: str,
                   runs: list[dict], outputs: list[dict]) -> dict:
    manifest = {
        "tool_version": __version__,
        "command": command,
        "config_hash": config_hash(cfg),
        "runs": sorted(runs, key=lambda r: (r["N"], r["seed_index"])),
        "outputs": sorted(outputs, key=lambda o: o["path"]),
        "status": "complete",
    }
    with open(os.path.join(outdir, MANIFEST_NAME), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def validate_manifest(outdir: str) -> list[str]:
    """Check that every manifest entry exists with the declared header/rows."""
    problems = []
    path = os.path.join(outdir, MANIFEST_NAME)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
    except OSError as exc:
        return [f"manifest unreadable: {exc}"]
    for entry in itertools.chain(manifest.get("runs", []),
                                 manifest.get("outputs", [])):
        fpath = os.path.join(outdir, entry["path"])
        if not os.path.exists(fpath):
            problems.append(f"{entry['path']}: missing")
            continue
        with open(fpath, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
        if "header" in entry and (not lines or lines[0] != entry["header"]):
            problems.append(f"{entry['path']}: header mismatch")
        if "rows" in entry and len(lines) - 1 != entry["rows"]:
            problems.append(
                f"{entry['path']}: {len(lines) - 1} rows, expected {entry['rows']}")
    return problems


# ---------------------------------------------------------------------------
# shared run helpers
# ---------------------------------------------------------------------------

def _run_seeds(cfg: ExperimentConfig, N: int, idx: int) -> tuple[int, int]:
    base = cfg.run.base_seed
    return (derive_seed(base, N, idx, "run"), derive_seed(base, N, idx, "init"))


def _simulator(cfg: ExperimentConfig):
    return (microsim.simulate if cfg.run.simulator == "naive"
            else microsim.simulate_optimized)


def _build_initial(spec, N, y0, init_seed):
    counts = microsim.counts_from_fractions(y0, N)
    return microsim.initial_state_from_counts(counts, make_stream(init_seed))


def _trajectory_rows(result: microsim.SimResult):
    traj = result.trajectory
    frac = traj.fractions
    for e in range(len(traj.times)):
        yield (traj.times[e], e, *traj.counts[e], *frac[e])


def _simulate_worker(payload) -> dict:
    (spec, N, d, graph_seed, T, run_seed, init_seed, y0, shuffle_on,
     naive, idx, path) = payload
    start = time.perf_counter()
    graph = network.generate_regular_bipartite(N, d, graph_seed)
    initial = _build_initial(spec, N, y0, init_seed)
    sim = microsim.simulate if naive else microsim.simulate_optimized
    result = sim(spec, graph, initial, T, run_seed, shuffle_on=shuffle_on)
    rows = write_csv(path, trajectory_header(spec.K), _trajectory_rows(result))
    return {
        "N": N, "seed_index": idx, "seed": run_seed,
        "events": result.event_count, "rows": rows,
        "wall_time": round(time.perf_counter() - start, 6),
        "path": os.path.basename(path),
        "header": ",".join(trajectory_header(spec.K)),
    }


def run_simulate(cfg: ExperimentConfig, quiet: bool = True) -> dict:
    """One trajectory CSV per (N, seed); returns the manifest."""
    spec = cfg.build_model()
    outdir = _ensure_outdir(cfg)
    payloads = []
    for N in cfg.n_list():
        for idx in cfg.seed_indices():
            run_seed, init_seed = _run_seeds(cfg, N, idx)
            path = os.path.join(outdir, f"traj_N{N}_s{idx}.csv")
            payloads.append((spec, N, cfg.graph.d, cfg.graph.graph_seed,
                             cfg.run.T, run_seed, init_seed,
                             tuple(cfg.run.y0), cfg.run.shuffle_on,
                             cfg.run.simulator == "naive", idx, path))
    runs = parallel_map(_simulate_worker, payloads, cfg.worker_count())
    if not quiet:
        for r in runs:
            print(f"N={r['N']} seed={r['seed_index']}: {r['events']} events "
                  f"({r['wall_time']:.2f}s)")
    return write_manifest(outdir, cfg, "simulate", runs, [])


def run_fluid(cfg: ExperimentConfig) -> dict:
    """Integrate the limiting ODE and write fluid.csv."""
    spec = cfg.build_model()
    outdir = _ensure_outdir(cfg)
    path = fluid.integrate(spec, cfg.fluid_degree(), cfg.run.y0,
                           cfg.run.T, cfg.fluid_step())
    rows = write_csv(os.path.join(outdir, "fluid.csv"), fluid_header(spec.K),
                     ((t, *y) for t, y in zip(path.times, path.states)))
    outputs = [{"path": "fluid.csv", "rows": rows,
                "header": ",".join(fluid_header(spec.K))}]
    return write_manifest(outdir, cfg, "fluid", [], outputs)


def _compare_worker(payload) -> dict:
    (spec, N, d, graph_seed, T, run_seed, init_seed, y0, shuffle_on,
     naive, idx, fluid_times, fluid_states) = payload
    graph = network.generate_regular_bipartite(N, d, graph_seed)
    initial = _build_initial(spec, N, y0, init_seed)
    sim = microsim.simulate if naive else microsim.simulate_optimized
    result = sim(spec, graph, initial, T, run_seed, shuffle_on=shuffle_on)
    path = fluid.FluidPath(times=fluid_times, states=fluid_states)
    dist = diagnostics.compare_to_fluid(result.trajectory, path)
    return {"N": N, "seed_index": idx, "sup_distance": dist,
            "events": result.event_count}


def run_compare(cfg: ExperimentConfig, quiet: bool = True) -> list[dict]:
    """Empirical-vs-fluid sup distances per (N, seed) plus a median table."""
    spec = cfg.build_model()
    outdir = _ensure_outdir(cfg)
    fpath = fluid.integrate(spec, cfg.fluid_degree(), cfg.run.y0,
                            cfg.run.T, cfg.fluid_step())
    payloads = []
    for N in cfg.n_list():
        for idx in cfg.seed_indices():
            run_seed, init_seed = _run_seeds(cfg, N, idx)
            payloads.append((spec, N, cfg.graph.d, cfg.graph.graph_seed,
                             cfg.run.T, run_seed, init_seed,
                             tuple(cfg.run.y0), cfg.run.shuffle_on,
                             cfg.run.simulator == "naive", idx,
                             fpath.times, fpath.states))
    results = parallel_map(_compare_worker, payloads, cfg.worker_count())
    rows = write_csv(os.path.join(outdir, "compare_summary.csv"),
                     ["N", "seed", "sup_distance"],
                     ((r["N"], r["seed_index"], r["sup_distance"])
                      for r in results))
    medians = []
    for N in cfg.n_list():
        dists = [r["sup_distance"] for r in results if r["N"] == N]
        medians.append({"N": N, "seeds": len(dists),
                        "median_sup_distance": float(np.median(dists))})
    mrows = write_csv(os.path.join(outdir, "compare_medians.csv"),
                      ["N", "seeds", "median_sup_distance"],
                      ((m["N"], m["seeds"], m["median_sup_distance"])
                       for m in medians))
    frows = write_csv(os.path.join(outdir, "fluid.csv"), fluid_header(spec.K),
                      ((t, *y) for t, y in zip(fpath.times, fpath.states)))
    outputs = [
        {"path": "compare_summary.csv", "rows": rows,
         "header": "N,seed,sup_distance"},
        {"path": "compare_medians.csv", "rows": mrows,
         "header": "N,seeds,median_sup_distance"},
        {"path": "fluid.csv", "rows": frows,
         "header": ",".join(fluid_header(spec.K))},
    ]
    write_manifest(outdir, cfg, "compare", [], outputs)
    if not quiet:
        for m in medians:
            print(f"N={m['N']}: median sup distance "
                  f"{m['median_sup_distance']:.5f} over {m['seeds']} seeds")
    return medians


def run_gap(cfg: ExperimentConfig) -> dict:
    """Gap series CSV for the first (N, seed) pair of the config."""
    spec = cfg.build_model()
    outdir = _ensure_outdir(cfg)
    N = cfg.n_list()[0]
    idx = cfg.seed_indices()[0]
    run_seed, init_seed = _run_seeds(cfg, N, idx)
    graph = network.generate_regular_bipartite(N, cfg.graph.d,
                                               cfg.graph.graph_seed)
    initial = _build_initial(spec, N, cfg.run.y0, init_seed)
    result = _simulator(cfg)(spec, graph, initial, cfg.run.T, run_seed,
                             record="snapshots",
                             snapshot_stride=cfg.snapshot_stride_for(N),
                             shuffle_on=cfg.run.shuffle_on)
    series = diagnostics.gap_from_result(result, graph, cfg.fluid_degree())
    name = f"gap_N{N}_s{idx}.csv"
    rows = write_csv(os.path.join(outdir, name), gap_header(spec.K),
                     ((t, *vals.ravel())
                      for t, vals in zip(series.times, series.values)))
    outputs = [{"path": name, "rows": rows,
                "header": ",".join(gap_header(spec.K))}]
    return write_manifest(outdir, cfg, "gap", [], outputs)


def run_concentration(cfg: ExperimentConfig) -> list[diagnostics.TailEstimate]:
    """Sup-gap tail estimates over the N grid for each configured epsilon."""
    spec = cfg.build_model()
    outdir = _ensure_outdir(cfg)
    all_rows = []
    estimates = []
    for eps in cfg.diagnostics.epsilons:
        ests = diagnostics.sup_gap_concentration(
            spec, cfg.graph.d, cfg.n_list(), eps, cfg.run.T,
            cfg.diagnostics.gap_seeds, cfg.run.base_seed, cfg.run.y0,
            cfg.graph.graph_seed, cfg.run.shuffle_on,
            cfg.diagnostics.confidence, cfg.worker_count())
        estimates.extend(ests)
        for e in ests:
            all_rows.append((e.N, e.epsilon, e.trials, e.exceedances,
                             e.p_hat, e.ci_low, e.ci_high))
    rows = write_csv(os.path.join(outdir, "concentration.csv"),
                     ["N", "epsilon", "trials", "exceedances", "p_hat",
                      "ci_low", "ci_high"], all_rows)
    outputs = [{"path": "concentration.csv", "rows": rows,
                "header": "N,epsilon,trials,exceedances,p_hat,ci_low,ci_high"}]
    write_manifest(outdir, cfg, "concentration", [], outputs)
    return estimates


def run_martingale(cfg: ExperimentConfig) -> list[diagnostics.MartingaleL2Summary]:
    """Residual second moments vs the analytic ceiling, per configured N."""
    spec = cfg.build_model()
    outdir = _ensure_outdir(cfg)
    summaries = []
    for N in cfg.diagnostics.martingale_N:
        summaries.append(diagnostics.martingale_l2(
            spec, cfg.graph.d, N, cfg.run.T, cfg.diagnostics.martingale_seeds,
            cfg.run.base_seed, cfg.run.y0, cfg.graph.graph_seed,
            cfg.worker_count()))
    rows = write_csv(os.path.join(outdir, "martingale_l2.csv"),
                     ["N", "k", "seeds", "mean_square", "ceiling"],
                     ((s.N, k + 1, s.seeds, s.mean_square[k], s.ceiling)
                      for s in summaries for k in range(spec.K)))
    finals_header = ["N", "seed"] + [f"Mbar_{k + 1}" for k in range(spec.K)]
    finals_rows = write_csv(
        os.path.join(outdir, "martingale_finals.csv"), finals_header,
        ((s.N, i, *s.finals[i]) for s in summaries for i in range(s.seeds)))
    outputs = [
        {"path": "martingale_l2.csv", "rows": rows,
         "header": "N,k,seeds,mean_square,ceiling"},
        {"path": "martingale_finals.csv", "rows": finals_rows,
         "header": ",".join(finals_header)},
    ]
    write_manifest(outdir, cfg, "martingale", [], outputs)
    return summaries


def run_poisson_check(cfg: ExperimentConfig
                      ) -> tuple[bool, list[diagnostics.PoissonTailCheck]]:
    """Simulated vs closed-form counting tails for every configured case."""
    outdir = _ensure_outdir(cfg)
    checks = []
    for i, (N, alpha) in enumerate(cfg.diagnostics.poisson_cases):
        checks.append(diagnostics.poisson_bernoulli_tail(
            int(N), float(alpha), cfg.diagnostics.poisson_trials,
            derive_seed(cfg.run.base_seed, int(N), "poisson", i),
            cfg.diagnostics.confidence))
    rows = write_csv(os.path.join(outdir, "poisson.csv"),
                     ["N", "alpha", "trials", "hits", "p_hat", "ci_low",
                      "ci_high", "analytic", "within_ci"],
                     ((c.N, c.alpha, c.trials, c.hits, c.p_hat, c.ci_low,
                       c.ci_high, c.analytic, int(c.within_ci))
                      for c in checks))
    outputs = [{"path": "poisson.csv", "rows": rows}]
    write_manifest(outdir, cfg, "poisson-check", [], outputs)
    return all(c.within_ci for c in checks), checks


def run_aux_tail(cfg: ExperimentConfig) -> diagnostics.AuxTailCurve:
    """Auxiliary-process tail curve over the configured N grid."""
    outdir = _ensure_outdir(cfg)
    dg = cfg.diagnostics
    pair = (dg.aux_pair[0] - 1, dg.aux_pair[1] - 1)
    curve = diagnostics.auxiliary_tail_curve(
        dg.aux_alpha, cfg.graph.d, dg.aux_N, dg.aux_epsilon, dg.trials,
        cfg.run.base_seed, pair, cfg.graph.graph_seed, dg.confidence)
    rows = write_csv(os.path.join(outdir, "aux_tail.csv"),
                     ["N", "epsilon", "trials", "exceedances", "p_hat",
                      "ci_low", "ci_high", "ceiling"],
                     ((e.N, e.epsilon, e.trials, e.exceedances, e.p_hat,
                       e.ci_low, e.ci_high, c)
                      for e, c in zip(curve.estimates, curve.ceilings)))
    fit_rows = write_csv(os.path.join(outdir, "aux_fit.csv"),
                         ["slope", "intercept", "r_squared"],
                         [(curve.slope, curve.intercept, curve.r_squared)])
    outputs = [{"path": "aux_tail.csv", "rows": rows},
               {"path": "aux_fit.csv", "rows": fit_rows}]
    write_manifest(outdir, cfg, "aux-tail", [], outputs)
    return curve


def run_modulus(cfg: ExperimentConfig) -> list[tuple[int, float, float]]:
    """Modulus-of-continuity curve of the first state's fraction, per N."""
    spec = cfg.build_model()
    outdir = _ensure_outdir(cfg)
    T = cfg.run.T
    deltas = [T * f for f in (0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0)]
    triples = []
    for N in cfg.n_list():
        idx = cfg.seed_indices()[0]
        run_seed, init_seed = _run_seeds(cfg, N, idx)
        graph = network.generate_regular_bipartite(N, cfg.graph.d,
                                                   cfg.graph.graph_seed)
        initial = _build_initial(spec, N, cfg.run.y0, init_seed)
        result = _simulator(cfg)(spec, graph, initial, T, run_seed,
                                 shuffle_on=cfg.run.shuffle_on)
        series = result.trajectory.fractions[:, 0]
        for delta in deltas:
            omega = diagnostics.modulus_of_continuity(
                result.trajectory.times, series, delta, T)
            triples.append((N, delta, omega))
    rows = write_csv(os.path.join(outdir, "modulus.csv"),
                     ["N", "delta", "omega"], triples)
    outputs = [{"path": "modulus.csv", "rows": rows}]
    write_manifest(outdir, cfg, "modulus", [], outputs)
    return triples


def run_sweep(cfg: ExperimentConfig, quiet: bool = True) -> dict:
    """Full multi-N study: everything the plotting component consumes.

    Writes one trajectory per N (first seed), the fluid path, the
    compare/median tables, sup-gap concentration, the auxiliary tail curve,
    martingale second moments, and the modulus curve, then one manifest
    covering all of it.
    """
    spec = cfg.build_model()
    outdir = _ensure_outdir(cfg)
    runs = []
    for N in cfg.n_list():
        idx = cfg.seed_indices()[0]
        run_seed, init_seed = _run_seeds(cfg, N, idx)
        path = os.path.join(outdir, f"traj_N{N}_s{idx}.csv")
        runs.append(_simulate_worker(
            (spec, N, cfg.graph.d, cfg.graph.graph_seed, cfg.run.T, run_seed,
             init_seed, tuple(cfg.run.y0), cfg.run.shuffle_on,
             cfg.run.simulator == "naive", idx, path)))
    medians = run_compare(cfg, quiet=quiet)
    run_concentration(cfg)
    run_aux_tail(cfg)
    run_martingale(cfg)
    run_modulus(cfg)
    outputs = [{"path": name} for name in
               ("fluid.csv", "compare_summary.csv", "compare_medians.csv",
                "concentration.csv", "aux_tail.csv", "aux_fit.csv",
                "martingale_l2.csv", "martingale_finals.csv", "modulus.csv")]
    manifest = write_manifest(outdir, cfg, "sweep", runs, outputs)
    if not quiet:
        for m in medians:
            print(f"N={m['N']}: median sup distance {m['median_sup_distance']:.5f}")
    return manifest


# ---------------------------------------------------------------------------
# verify: desk-scale invariant suite
# ---------------------------------------------------------------------------

@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def _check(name, fn, results):
    try:
        detail = fn()
        results.append(CheckResult(name, True, detail or "ok"))
    except AssertionError as exc:
        results.append(CheckResult(name, False, str(exc) or "assertion failed"))
    except Exception as exc:  # surfaced, not swallowed: verify must report
        results.append(CheckResult(name, False, f"{type(exc).__name__}: {exc}"))


def run_verify(cfg: ExperimentConfig, model_override: model.ModelSpec | None = None,
               quiet: bool = True) -> tuple[bool, list[CheckResult]]:
    """Execute the invariant suite of every module at desk scale."""
    spec = model_override if model_override is not None else cfg.build_model()
    results: list[CheckResult] = []

    def model_invariants():
        report = model.validate_model(spec)
        assert report.ok, "; ".join(report.violations)
        gen = make_stream(101)
        for _ in range(200):
            K = int(gen.integers(1, 5))
            table = gen.integers(0, K, size=(K, K, 2))
            inc = model.derive_increment_tensor(table, K)
            assert inc.min() >= -2 and inc.max() <= 2, "tensor range"
            assert not inc.sum(axis=2).any(), "conservation"
            assert all(inc[k, k, k] <= 0 for k in range(K)), "c_kk(k) <= 0"
            assert np.array_equal(inc, model.derive_increment_tensor(table, K))
        return "config model valid; 200 random rules satisfy all invariants"

    def network_roundtrip():
        for N in range(4, 13, 2):
            for d in range(1, N // 2 + 1):
                graph = network.generate_regular_bipartite(N, d, N + d)
                parts = network.decompose_matchings(graph)
                union = {(min(u, v), max(u, v)) for p in parts for u, v in p}
                edges = {(int(u), int(v))
                         for u, v in network.undirected_edges(graph)}
                assert union == edges and len(union) == N * d // 2
        return "generate/decompose/reassemble exact for all N <= 12"

    def shuffle_uniformity():
        gen = make_stream(55)
        perms = {p: i for i, p in enumerate(itertools.permutations(range(4)))}
        obs = np.zeros(24, dtype=np.int64)
        trials = 12000
        for _ in range(trials):
            states = np.arange(4)
            network.shuffle_states(states, gen)
            obs[perms[tuple(states)]] += 1
        expected = trials / 24
        stat = float(((obs - expected) ** 2 / expected).sum())
        p = float(chi2.sf(stat, df=23))
        assert p > 0.001, f"chi-square p={p:.2e}"
        return f"24-permutation chi-square p={p:.3f}"

    def simulator_equivalence():
        gen = make_stream(7)
        for trial in range(15):
            K = int(gen.integers(2, 4))
            rnd = model.make_model(K, gen.random((K, K)),
                                   update=gen.integers(0, K, size=(K, K, 2)))
            N = int(gen.integers(2, 15)) * 2
            d = int(gen.integers(1, min(3, N // 2) + 1))
            graph = network.generate_regular_bipartite(N, d, trial)
            initial = gen.integers(0, K, size=N)
            seed = derive_seed(5, trial)
            a = microsim.simulate(rnd, graph, initial, 1.0, seed, record="events")
            b = microsim.simulate_optimized(rnd, graph, initial, 1.0, seed,
                                            record="events")
            assert np.array_equal(a.trajectory.times, b.trajectory.times)
            assert np.array_equal(a.trajectory.counts, b.trajectory.counts)
        return "15 random instances bit-identical"

    def event_increments():
        gen = make_stream(11)
        for trial in range(10):
            K = int(gen.integers(2, 4))
            rnd = model.make_model(K, gen.random((K, K)),
                                   update=gen.integers(0, K, size=(K, K, 2)))
            N = int(gen.integers(3, 10)) * 2
            graph = network.generate_regular_bipartite(N, 2, trial)
            initial = gen.integers(0, K, size=N)
            res = microsim.simulate_optimized(rnd, graph, initial, 0.5,
                                              derive_seed(6, trial),
                                              record="events")
            assert (res.trajectory.counts.sum(axis=1) == N).all()
            deltas = np.diff(res.trajectory.counts, axis=0)
            for e in range(res.event_count):
                m, l = res.events.pre[e]
                assert np.array_equal(deltas[e], rnd.increments[m, l])
        return "count conservation and per-event increments verified"

    def coupling_exactness():
        gen = make_stream(13)
        for _ in range(300):
            n = int(gen.integers(2, 12))
            col = (gen.random(n) < gen.random()).astype(np.uint8)
            target = int(gen.integers(0, n + 1))
            out = microsim.couple_to_counts(col, target, gen)
            assert int(out.sum()) == target
        return "300 couplings all hit their target count exactly"

    def fluid_oracle():
        path = fluid.integrate(model.sis_model(), 2.0, [0.1, 0.9], 10.0, 1e-3)
        closed = np.array([fluid.logistic_oracle(0.1, 2.0, 1.0, t)
                           for t in path.times])
        err = float(np.abs(path.states[:, 0] - closed).max())
        assert err <= 1e-8, f"max error {err:.2e}"
        return f"integrator matches closed form, max error {err:.1e}"

    def fluid_invariance():
        gen = make_stream(19)
        for trial in range(30):
            K = int(gen.integers(2, 5))
            rnd = model.make_model(K, gen.random((K, K)),
                                   update=gen.integers(0, K, size=(K, K, 2)))
            y0 = gen.random(K)
            y0 /= y0.sum()
            path = fluid.integrate(rnd, 2.0, y0, 10.0, 5e-2)
            assert np.abs(path.states.sum(axis=1) - 1).max() <= 1e-9
            assert path.states.min() >= 0 and path.states.max() <= 1
        return "simplex and hypercube preserved for 30 random models"

    def gap_and_identity():
        gen = make_stream(23)
        for trial in range(10):
            K = int(gen.integers(2, 4))
            rnd = model.make_model(K, gen.random((K, K)),
                                   update=gen.integers(0, K, size=(K, K, 2)))
            N = int(gen.integers(3, 10)) * 2
            d = int(gen.integers(1, N // 2 + 1))
            graph = network.generate_regular_bipartite(N, d, trial)
            initial = gen.integers(0, K, size=N)
            res = microsim.simulate_optimized(rnd, graph, initial, 0.5,
                                              derive_seed(8, trial),
                                              record="snapshots")
            series = diagnostics.gap_from_result(res, graph)
            assert series.sup_abs() <= d + 1e-12
            resid = diagnostics.martingale_residual(res, rnd, graph)
            frac = res.trajectory.fractions
            recon = frac[0] + resid.values[:-1] + resid.drift[:-1]
            assert np.abs(recon - frac).max() <= 1e-12, "pathwise identity"
        return "gap bound and pathwise identity hold on 10 random instances"

    def poisson_counting():
        check = diagnostics.poisson_bernoulli_tail(100, 2.0, 20000, 77)
        assert check.within_ci, (
            f"MC {check.p_hat:.5f} outside CI of {check.analytic:.5f}")
        return (f"closed form {check.analytic:.5f} inside "
                f"[{check.ci_low:.5f}, {check.ci_high:.5f}]")

    def modulus_sanity():
        assert diagnostics.modulus_of_continuity([0.0], [0.3], 0.5, 1.0) == 0.0
        assert diagnostics.modulus_of_continuity(
            [0.0, 0.4], [0.0, 0.8], 0.1, 1.0) == 0.8
        return "constant and single-jump moduli exact"

    _check("model.invariants", model_invariants, results)
    _check("network.matching_roundtrip", network_roundtrip, results)
    _check("network.shuffle_uniform", shuffle_uniformity, results)
    _check("microsim.simulator_equivalence", simulator_equivalence, results)
    _check("microsim.event_increments", event_increments, results)
    _check("microsim.coupling_exact", coupling_exactness, results)
    _check("fluid.logistic_oracle", fluid_oracle, results)
    _check("fluid.invariance", fluid_invariance, results)
    _check("diagnostics.gap_and_pathwise_identity", gap_and_identity, results)
    _check("diagnostics.poisson_counting", poisson_counting, results)
    _check("diagnostics.modulus", modulus_sanity, results)

    ok = all(r.passed for r in results)
    if not quiet:
        for r in results:
            print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}")
    return ok, results
