"""Experiment driver: config ingestion, runs, attacks, reports, figure data."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .. import adversary as adv
from .. import indistinguishability as ind
from ..errors import PreconditionError
from ..graph import WeightedDigraph, demo_graph, graph_from_dict, load_graph
from ..protocols import (
    Algorithm,
    ExecutionTrace,
    M1Noise,
    Perturbation,
    ProtocolSpec,
    convergence_rate,
    default_delta,
    default_horizon,
    run,
)
from . import io
from .presets import OPDPreset, opd_dispatch

CONSERVATION_TOL = 1e-9
CONVERGENCE_TOL = 1e-6
HORIZON_TARGET = 1e-10
DEFAULT_E_GRID = (-1500.0, -10.0, -1.0, 1.0, 10.0, 1500.0)


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# config

@dataclass
class RunConfig:
    name: str
    algorithm: Algorithm
    reference: list[float]
    delta: float | None = None
    horizon: int | None = None
    x0: list[float] | None = None
    v0: list[float] | None = None
    perturbation: list[dict] | None = None
    noise: dict | None = None

    def to_spec(self, g: WeightedDigraph) -> ProtocolSpec:
        delta = self.delta if self.delta is not None else default_delta(g)
        phi = self.noise.get("phi", 0.9) if self.noise else None
        horizon = self.horizon
        if horizon is None:
            horizon = default_horizon(convergence_rate(g, self.algorithm, delta, phi), HORIZON_TARGET)
        pert = None
        if self.perturbation is not None:
            pert = tuple(Perturbation(**p) for p in self.perturbation)
        noise = M1Noise(**self.noise) if self.noise is not None else None
        return ProtocolSpec(self.algorithm, delta, horizon, self.reference, self.x0, self.v0, pert, noise)


@dataclass
class ExperimentConfig:
    graph: WeightedDigraph
    runs: list[RunConfig]
    adversary: int | None = None
    targets: list[int] | None = None
    attacks: list[str] = field(default_factory=lambda: ["recover", "observer"])
    e_grid: list[float] = field(default_factory=lambda: list(DEFAULT_E_GRID))
    monte_carlo: dict | None = None
    output_dir: str = "out"

    @classmethod
    def from_dict(cls, doc: dict, base_dir: Path | None = None) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config must be an object")
        base_dir = base_dir or Path(".")
        graph_entry = doc.get("graph", "demo")
        if graph_entry == "demo":
            g = demo_graph()
        elif isinstance(graph_entry, str):
            path = base_dir / graph_entry
            if not path.exists():
                raise ConfigError(f"graph file not found: {path}")
            g = load_graph(path)
        else:
            g = graph_from_dict(graph_entry, source="config.graph")
        raw_runs = doc.get("runs")
        if not isinstance(raw_runs, list) or not raw_runs:
            raise ConfigError("config.runs must be a non-empty list")
        runs = []
        for pos, r in enumerate(raw_runs):
            if "algorithm" not in r or "reference" not in r:
                raise ConfigError(f"config.runs[{pos}]: 'algorithm' and 'reference' are required")
            try:
                alg = Algorithm(r["algorithm"])
            except ValueError:
                raise ConfigError(f"config.runs[{pos}].algorithm: unknown value {r['algorithm']!r}") from None
            unknown = set(r) - {"name", "algorithm", "reference", "delta", "horizon", "x0", "v0", "perturbation", "noise"}
            if unknown:
                raise ConfigError(f"config.runs[{pos}]: unknown fields {sorted(unknown)}")
            runs.append(RunConfig(
                name=r.get("name", f"run{pos}_{alg.value}"),
                algorithm=alg,
                reference=[float(v) for v in r["reference"]],
                delta=r.get("delta"),
                horizon=r.get("horizon"),
                x0=r.get("x0"),
                v0=r.get("v0"),
                perturbation=r.get("perturbation"),
                noise=r.get("noise"),
            ))
        indist = doc.get("indistinguishability", {}) or {}
        return cls(
            graph=g,
            runs=runs,
            adversary=doc.get("adversary"),
            targets=doc.get("targets"),
            attacks=list(doc.get("attacks", ["recover", "observer"])),
            e_grid=[float(e) for e in indist.get("e_grid", DEFAULT_E_GRID)],
            monte_carlo=doc.get("monte_carlo"),
            output_dir=doc.get("output_dir", "out"),
        )

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: line {exc.lineno} col {exc.colno}: {exc.msg}") from None
        return cls.from_dict(doc, path.parent)


# ---------------------------------------------------------------------------
# invariants

def check_trace(trace: ExecutionTrace) -> list[str]:
    """Module-level invariants that every harness run re-validates."""
    bad = []
    spec, g = trace.spec, trace.graph
    alg = spec.algorithm
    if trace.x.shape[0] != spec.horizon + 1:
        bad.append(f"trace length {trace.x.shape[0]} != K+1 = {spec.horizon + 1}")
    senders = [j - 1 for _, j in trace.edges]
    if trace.edges and not np.array_equal(trace.transmitted, trace.sent[:, senders]):
        bad.append("recorded messages differ from the senders' states")
    scale = g.n * max(1.0, float(np.abs(spec.x0).max()))
    if alg is Algorithm.ALG1:
        drift = np.abs(trace.x.sum(axis=1) - trace.x[0].sum())
        if drift.max() > CONSERVATION_TOL * scale:
            k = int(drift.argmax())
            bad.append(f"sum of x drifts at step {k} by {drift[k]:.3e}")
    if alg in (Algorithm.ALG2, Algorithm.ALG2_PERTURBED):
        vs = np.abs(trace.v.sum(axis=1))
        if vs.max() > CONSERVATION_TOL * scale:
            k = int(vs.argmax())
            bad.append(f"sum of v nonzero at step {k}: {vs[k]:.3e}")
    if alg is Algorithm.M1:
        # sum x(k) - sum r equals the accumulated noise, which telescopes
        cum = np.concatenate([[0.0], np.cumsum(trace.w.sum(axis=1))[:-1]])
        gap = np.abs(trace.x.sum(axis=1) - spec.reference.sum() - cum)
        tol = CONSERVATION_TOL * max(scale, g.n * max(1.0, spec.noise.sigma))
        if gap.max() > tol:
            bad.append(f"M1 telescoping identity fails (max {gap.max():.3e})")
    phi = spec.noise.phi if spec.noise else None
    rate = convergence_rate(g, alg, spec.delta, phi)
    if alg is not Algorithm.ALG2_PERTURBED and rate ** spec.horizon < 1e-8:
        r_avg = spec.reference.mean()
        spread = max(1.0, float(np.ptp(spec.reference)), float(np.ptp(spec.x0)),
                     float(np.abs(spec.v0).max()), spec.noise.sigma if spec.noise else 0.0)
        err = np.abs(trace.x[-1] - r_avg).max()
        if err > CONVERGENCE_TOL * spread:
            bad.append(f"no consensus at K={spec.horizon}: max |x - r_avg| = {err:.3e}")
    return bad


# ---------------------------------------------------------------------------
# driver

@dataclass
class ExperimentResult:
    summary: dict
    violations: list[str]
    files: list[Path]

    @property
    def exit_code(self) -> int:
        return 1 if self.violations else 0


def _targets(cfg: ExperimentConfig) -> list[int]:
    if cfg.targets is not None:
        return list(cfg.targets)
    return [i for i in range(1, cfg.graph.n + 1) if i != cfg.adversary]


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> ExperimentResult:
    out = io.output_dir(out_dir or cfg.output_dir)
    g = cfg.graph
    violations: list[str] = []
    files: list[Path] = []
    summary: dict[str, Any] = {"graph_sha256": g.digest(), "runs": {}}
    for rc in cfg.runs:
        spec = rc.to_spec(g)
        try:
            trace = run(g, spec)
        except PreconditionError as exc:
            raise PreconditionError(f"run '{rc.name}': {exc}") from None
        files.append(io.write_trace_csv(trace, out / f"trace_{rc.name}.csv"))
        files.append(io.write_json(io.manifest(trace, name=rc.name), out / f"manifest_{rc.name}.json"))
        bad = [f"run '{rc.name}': {b}" for b in check_trace(trace)]
        violations += bad
        entry: dict[str, Any] = {
            "algorithm": spec.algorithm.value,
            "delta": spec.delta,
            "horizon": spec.horizon,
            "r_avg": float(spec.reference.mean()),
            "final_x": trace.x[-1].tolist(),
            "consensus_value": float(trace.x[-1].mean()),
            "max_abs_error": float(np.abs(trace.x[-1] - spec.reference.mean()).max()),
            "invariants_ok": not bad,
        }
        if cfg.adversary is not None:
            entry.update(_adversary_section(cfg, rc, spec, trace, out, files, violations))
        summary["runs"][rc.name] = entry
    if cfg.monte_carlo and cfg.adversary is not None:
        for rc in cfg.runs:
            if rc.algorithm is Algorithm.M1:
                spec = rc.to_spec(g)
                summary["runs"][rc.name]["monte_carlo"] = first_message_spread(
                    g, spec, cfg.adversary, int(cfg.monte_carlo.get("runs", 100)),
                    int(cfg.monte_carlo.get("seed", spec.noise.seed)),
                )
    summary["violations"] = violations
    files.append(io.write_json(summary, out / "summary.json"))
    return ExperimentResult(summary, violations, files)


def _adversary_section(cfg, rc, spec, trace, out, files, violations) -> dict:
    g, a = cfg.graph, cfg.adversary
    section: dict[str, Any] = {"privacy": {}, "attacks": [], "indistinguishability": []}
    view = adv.extract_view(trace, a)
    for t in _targets(cfg):
        private = adv.privacy_classifier(g, a, t)
        section["privacy"][str(t)] = private
        alg = spec.algorithm
        if not private and alg in (Algorithm.ALG2, Algorithm.ALG2_PERTURBED):
            for method in cfg.attacks:
                if method == "recover" and alg is not Algorithm.ALG2:
                    continue
                rep = adv.attack_report(view, t, method, float(spec.reference[t - 1]))
                section["attacks"].append(rep.to_dict())
        if private and alg is Algorithm.ALG2 and not np.any(spec.v0):
            for e in cfg.e_grid:
                rep, alt, _, t2 = ind.certify(g, a, t, e, spec, trace)
                section["indistinguishability"].append(rep.to_dict())
                if rep.max_deviation > ind.indistinguishability_tol(e):
                    violations.append(
                        f"run '{rc.name}': target {t}, e={e}: adversary view deviates by {rep.max_deviation:.3e}"
                    )
    if section["attacks"]:
        files.append(io.write_json(section["attacks"], out / f"attacks_{rc.name}.json"))
    if section["indistinguishability"]:
        files.append(io.write_json(section["indistinguishability"], out / f"indistinguishability_{rc.name}.json"))
    return section


# ---------------------------------------------------------------------------
# metrics and comparisons

def total_variation(x: np.ndarray) -> float:
    """Sum over agents and steps of ``|x_i(k+1) - x_i(k)|``."""
    return float(np.abs(np.diff(x, axis=0)).sum())


def _m1_batch(g, spec: ProtocolSpec, runs: int, base_seed: int, workers: int = 4) -> list[ExecutionTrace]:
    # per-run streams: seed = base_seed + run_index; results are collected in order
    def one(i):
        noise = M1Noise(spec.noise.phi, spec.noise.sigma, base_seed + i)
        return run(g, spec.replace(noise=noise))

    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, range(runs)))


def first_message_spread(g, spec: ProtocolSpec, adversary: int, runs: int, base_seed: int,
                         traces: list[ExecutionTrace] | None = None) -> dict:
    """Empirical spread of the naive estimate ``r_hat_j = message_j(0)`` across seeded M1 runs."""
    if runs < 2:
        raise PreconditionError("need at least two Monte-Carlo runs")
    if traces is None:
        traces = _m1_batch(g, spec.replace(horizon=1), runs, base_seed)
    observed = sorted(g.out_neighbors(adversary))
    est = np.array([[adv.extract_view(t, adversary).signal(j)[0] for j in observed] for t in traces])
    return {
        "runs": runs,
        "observed": observed,
        "mean_estimate": est.mean(axis=0).tolist(),
        "std_estimate": est.std(axis=0, ddof=1).tolist(),
        "true_reference": [float(spec.reference[j - 1]) for j in observed],
    }


def compare_privacy(
    g: WeightedDigraph,
    reference,
    adversary: int,
    sigma: float = 100.0,
    phi: float = 0.9,
    runs: int = 400,
    base_seed: int = 0,
    delta: float | None = None,
    horizon: int | None = None,
    e_grid=DEFAULT_E_GRID,
) -> dict:
    """ALG2 versus M1 on one reference vector.

    (a) total variation of the state trajectories (M1 averaged over runs);
    (b) Monte-Carlo spread of the adversary's first-message estimate under M1;
    (c) ALG2 indistinguishability certificate over ``e_grid``.
    """
    if runs < 2:
        raise PreconditionError("need at least two Monte-Carlo runs")
    if not g.is_undirected():
        raise PreconditionError("the comparison needs an undirected graph")
    reference = np.asarray(reference, dtype=float)
    delta = default_delta(g) if delta is None else delta
    if horizon is None:
        horizon = default_horizon(convergence_rate(g, Algorithm.M1, delta, phi), HORIZON_TARGET)
    alg2 = run(g, ProtocolSpec(Algorithm.ALG2, delta, horizon, reference))
    m1_spec = ProtocolSpec(Algorithm.M1, delta, horizon, reference, noise=M1Noise(phi, sigma, base_seed))
    m1_traces = _m1_batch(g, m1_spec, runs, base_seed)
    tv_m1 = np.array([total_variation(t.x) for t in m1_traces])
    tv_alg2 = total_variation(alg2.x)
    cert = []
    for t in range(1, g.n + 1):
        if t == adversary or not adv.privacy_classifier(g, adversary, t):
            continue
        devs, shifts = [], []
        for e in e_grid:
            rep, alt, _, _ = ind.certify(g, adversary, t, e, alg2.spec, alg2)
            devs.append(rep.max_deviation)
            shifts.append(alt.alt_reference[t - 1])
        cert.append({
            "target": t,
            "witness": ind.find_witness(g, adversary, t),
            "max_deviation": float(max(devs)),
            "r_alt_min": float(min(shifts)),
            "r_alt_max": float(max(shifts)),
            "e_grid": list(map(float, e_grid)),
        })
    return {
        "delta": delta,
        "horizon": horizon,
        "sigma": sigma,
        "phi": phi,
        "total_variation": {
            "alg2": tv_alg2,
            "m1_mean": float(tv_m1.mean()),
            "m1_min": float(tv_m1.min()),
            "ratio_mean": float(tv_m1.mean() / tv_alg2) if tv_alg2 > 0 else float("inf"),
        },
        "m1_first_message": first_message_spread(g, m1_spec, adversary, runs, base_seed, m1_traces),
        "m1_final_error": float(max(np.abs(t.x[-1] - reference.mean()).max() for t in m1_traces)),
        "alg2_certificate": cert,
        "note": (
            "Analytical maximum-likelihood covariance figures from the M1 reference "
            "depend on its exact topology and are not reproduced; the Monte-Carlo "
            "spread of the first-message estimate is reported instead."
        ),
    }


# ---------------------------------------------------------------------------
# figure data

def emit_figures_data(out_dir: str | Path, m1_traces=(), alg2_trace=None, alt_traces=(), prefix: str = "") -> list[Path]:
    """Write CSV data behind the trajectory figures.

    ``fig2``: state trajectories of the M1 runs and the ALG2 run.
    ``fig4``: the ALG2 run plus alternatives, and ``e_x`` of each alternative
    against the first execution.
    """
    out = Path(out_dir)
    paths = []
    series = [(f"m1_{s}", t) for s, t in enumerate(m1_traces)]
    if alg2_trace is not None:
        series.append(("alg2", alg2_trace))
    if series:
        K = min(t.x.shape[0] for _, t in series)
        n = series[0][1].x.shape[1]
        header = ["k"] + [f"{name}_x{i + 1}" for name, _ in series for i in range(n)]
        rows = ([k] + [float(t.x[k, i]) for _, t in series for i in range(n)] for k in range(K))
        paths.append(io.write_table(out / f"{prefix}fig2.csv", header, rows))
    if alg2_trace is not None and alt_traces:
        execs = [alg2_trace, *alt_traces]
        K = alg2_trace.x.shape[0]
        n = alg2_trace.x.shape[1]
        header = ["k"] + [f"exec{j + 1}_x{i + 1}" for j in range(len(execs)) for i in range(n)]
        header += [f"e1{j + 2}_x{i + 1}" for j in range(len(alt_traces)) for i in range(n)]

        def row(k):
            vals = [float(t.x[k, i]) for t in execs for i in range(n)]
            vals += [float(alg2_trace.x[k, i] - t.x[k, i]) for t in alt_traces for i in range(n)]
            return [k] + vals

        paths.append(io.write_table(out / f"{prefix}fig4.csv", header, (row(k) for k in range(K))))
    return paths


# ---------------------------------------------------------------------------
# optimal power dispatch

def run_opd(
    preset: OPDPreset | None = None,
    delta: float | None = None,
    steps: int | None = None,
    out_dir: str | Path | None = None,
    seeds: tuple[int, int] = (1, 2),
    sigma: float = 100.0,
    phi: float = 0.9,
) -> dict:
    """Two ALG2 consensus runs (alpha, beta), local dispatch, plus M1 and alternative runs for figures."""
    preset = preset or OPDPreset()
    g, n = preset.graph, preset.n
    delta = default_delta(g) if delta is None else delta
    if steps is None:
        rate = max(convergence_rate(g, Algorithm.ALG2, delta), convergence_rate(g, Algorithm.M1, delta, phi))
        steps = default_horizon(rate, HORIZON_TARGET)
    result: dict[str, Any] = {"delta": delta, "horizon": steps, "graph_sha256": g.digest(), "violations": []}
    traces = {}
    for name, ref in (("alpha", preset.alpha), ("beta", preset.beta)):
        t = run(g, ProtocolSpec(Algorithm.ALG2, delta, steps, ref))
        traces[name] = t
        result["violations"] += [f"{name}: {b}" for b in check_trace(t)]
        result[f"{name}_bar_true"] = float(np.mean(ref))
        result[f"{name}_bar_estimates"] = t.x[-1].tolist()
    p = opd_dispatch(preset.alpha, preset.beta, preset.demand, traces["alpha"].x[-1], traces["beta"].x[-1], n)
    p_exact = opd_dispatch(preset.alpha, preset.beta, preset.demand, np.mean(preset.alpha), np.mean(preset.beta), n)
    result["dispatch"] = p.tolist()
    result["dispatch_exact"] = p_exact.tolist()
    result["total_generation"] = float(p.sum())
    result["demand"] = preset.demand
    result["privacy"] = {str(t): adv.privacy_classifier(g, preset.adversary, t) for t in range(1, n)}
    if out_dir is not None:
        out = Path(out_dir)
        for name, t in traces.items():
            io.write_trace_csv(t, out / f"opd_{name}_alg2.csv")
            io.write_json(io.manifest(t, name=f"opd_{name}_alg2"), out / f"manifest_opd_{name}_alg2.json")
        for name, ref in (("alpha", preset.alpha), ("beta", preset.beta)):
            m1 = [run(g, ProtocolSpec(Algorithm.M1, delta, steps, ref, noise=M1Noise(phi, sigma, s))) for s in seeds]
            alts = []
            if name == "alpha":
                base = traces["alpha"].spec
                alts = [run(g, base.replace(reference=r2, x0=x2)) for r2, x2 in preset.alternatives()]
                dev = [ind.verify_indistinguishable(traces["alpha"], t, preset.adversary) for t in alts]
                result["alternative_alphas"] = [t.spec.reference.tolist() for t in alts]
                result["alternative_max_deviation"] = float(max(dev))
            emit_figures_data(out, m1, traces[name], alts, prefix=f"opd_{name}_")
        io.write_json(result, out / "opd_summary.json")
    return result


# ---------------------------------------------------------------------------
# invariant suite used by the CLI

def verify_suite() -> list[tuple[str, bool, str]]:
    from ..graph import directed_cycle, stepsize_bound, two_node

    checks = []

    def record(name, ok, detail=""):
        checks.append((name, bool(ok), detail))

    for label, g in (("two_node", two_node()), ("cycle3", directed_cycle(3)), ("demo", demo_graph())):
        sb = stepsize_bound(g)
        record(f"{label}: stepsize bound positive", sb.delta_bar > 0, f"delta_bar={sb.delta_bar:.6g}")
        d = default_delta(g)
        rng = np.random.default_rng(7)
        ref = rng.normal(size=g.n)
        algs = [Algorithm.ALG1, Algorithm.ALG2]
        if g.is_undirected():
            algs += [Algorithm.ALG3, Algorithm.M1]
        for alg in algs:
            noise = M1Noise(0.9, 1.0, 3) if alg is Algorithm.M1 else None
            rate = convergence_rate(g, alg, d, 0.9 if noise else None)
            spec = ProtocolSpec(alg, d, default_horizon(rate, HORIZON_TARGET), ref, noise=noise)
            bad = check_trace(run(g, spec))
            record(f"{label}: {alg.value} invariants", not bad, "; ".join(bad))
    g = demo_graph()
    d = default_delta(g)
    ref = np.array(OPDPreset().alpha)
    base = ProtocolSpec(Algorithm.ALG2, d, 200, ref)
    t1 = run(g, base)
    view = adv.extract_view(t1, 5)
    rec = adv.recover_reference(view, 4, 1)
    record("demo: recovery of agent 4", abs(rec - ref[3]) < 1e-9, f"error={abs(rec - ref[3]):.3e}")
    for target in (1, 2, 3):
        rep, alt, _, t2 = ind.certify(g, 5, target, 1500.0, base, t1)
        ok = rep.max_deviation <= ind.indistinguishability_tol(1500.0)
        dyn = ind.error_dynamics_check(t1, t2, rep.witness)
        record(f"demo: indistinguishable pair for target {target}", ok and dyn.ok,
               "; ".join([f"deviation={rep.max_deviation:.3e}", *dyn.violations]))
    return checks

