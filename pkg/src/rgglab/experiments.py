"""Batch experiments behind the command line runner.

Each runner takes a validated :class:`ExperimentConfig`, a root
:class:`RngStream` and a worker count, and returns an :class:`ExperimentResult`
holding CSV rows plus a JSON-ready summary.  Random work is always keyed by
index into substreams of the root stream, so the worker count never changes
the output.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import __version__
from .concentration import (
    ParticleDistribution,
    bootstrap_slope_ci,
    cap_convolution_push,
    exact_ratio_std,
    loglog_slope,
    martingale_traces,
    noise_corrected_std,
    relative_deviations,
    summarize_ratios,
)
from .config import ExperimentConfig
from .distinguishers import (
    conditional_triangle_prob,
    detection_power,
    signed_triangle_batch,
    tv_curve,
)
from .graphs import (
    GraphSample,
    coupled_triple_sample,
    coupling_epsilon,
    pair_count,
    sample_er_batch,
    sample_geo_batch,
)
from .rng import RngStream, map_indexed
from .sphere import sample_uniform_sphere, tau_of_p

BOOTSTRAP_DRAWS = 1000


@dataclass
class ExperimentResult:
    columns: list[str]
    rows: list[list]
    summary: dict = field(default_factory=dict)
    headline: str = ""


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def to_csv(result: ExperimentResult) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(result.columns)
    for row in result.rows:
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def _plain(v):
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(v)
    return v


def to_json(config: ExperimentConfig, result: ExperimentResult) -> str:
    doc = {
        "experiment": config.experiment,
        "seed": config.seed,
        "parameters": config.parameters,
        "version": __version__,
        "summary": result.summary,
    }
    return json.dumps(_plain(doc), sort_keys=True, indent=2) + "\n"


def _binomial_se(x: float, n: int) -> float:
    return math.sqrt(x * (1 - x) / n)


def _slope_block(ds, values, replicate_sets, stat, stream):
    if len(ds) < 2 or any(v <= 0 for v in values):
        return None
    lo, hi = bootstrap_slope_ci(ds, replicate_sets, stat, BOOTSTRAP_DRAWS, rng=stream)
    return {"slope": loglog_slope(ds, values), "ci95": [lo, hi]}


# --- graph experiments ----------------------------------------------------------

def run_sample(cfg: ExperimentConfig, stream: RngStream, workers: int) -> ExperimentResult:
    prm = cfg.parameters
    n, p, trials = prm["n"], prm["p"], prm["trials"]
    geo = prm["model"] == "geo"
    gen = stream.generator()
    edges = sample_geo_batch(n, p, prm["d"], trials, gen) if geo else sample_er_batch(n, p, trials, gen)
    stats = signed_triangle_batch(edges, n, p)
    d = prm["d"] if geo else ""
    rows = []
    for i in range(trials):
        g = GraphSample(n, edges[i])
        rows.append([i, prm["model"], n, p, d, g.edge_count, stats[i], g.serialize().split("\n")[1]])
    density = edges.mean() if pair_count(n) else 0.0
    se = _binomial_se(density, trials * max(pair_count(n), 1))
    summary = {"edge_density": density, "edge_density_se": se,
               "statistic_mean": float(stats.mean()),
               "statistic_se": float(stats.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0}
    return ExperimentResult(["index", "model", "n", "p", "d", "edges", "statistic", "graph"], rows, summary,
                            f"sampled {trials} graphs, edge density {density:.4f} (p={p})")


def run_power(cfg: ExperimentConfig, stream: RngStream, workers: int) -> ExperimentResult:
    prm = cfg.parameters
    n, p, z, trials = prm["n"], prm["p"], prm["z"], prm["trials"]
    rows, points = [], []
    for k, d in enumerate(cfg.d_grid):
        power, fp = detection_power(n, p, d, trials, z, stream.substream(k), workers)
        rows.append([n, p, d, z, trials, power, fp])
        points.append({"d": d, "power": power, "power_se": _binomial_se(power, trials),
                       "fp": fp, "fp_se": _binomial_se(fp, trials)})
    last = points[-1]
    return ExperimentResult(["n", "p", "d", "z", "trials", "power", "fp"], rows, {"points": points},
                            f"power {last['power']:.3f}, false positives {last['fp']:.3f} at d={last['d']}")


def run_tv_curve(cfg: ExperimentConfig, stream: RngStream, workers: int) -> ExperimentResult:
    prm = cfg.parameters
    n, p, trials = prm["n"], prm["p"], prm["trials"]
    pts = tv_curve(n, p, cfg.d_grid, trials, stream, workers)
    rows = [[n, p, pt.d, trials, pt.tv, pt.bound] for pt in pts]
    points = [{"d": pt.d, "tv": pt.tv, "bound": pt.bound, "kl": pt.kl,
               "pinsker_ok": bool(not math.isfinite(pt.kl) or 2 * pt.tv**2 <= pt.kl)} for pt in pts]
    return ExperimentResult(["n", "p", "d", "trials", "tv", "bound"], rows, {"points": points},
                            "tv " + ", ".join(f"{pt.tv:.4f}@d={pt.d}" for pt in pts))


def _coupling_task(task):
    n, p, d, eps, budget, sub = task
    t = coupled_triple_sample(n, p, d, eps, budget, sub.generator())
    return t.sandwich_ok, t.g_minus.edges.copy(), t.g.edges.copy(), t.g_plus.edges.copy()


def run_coupling(cfg: ExperimentConfig, stream: RngStream, workers: int) -> ExperimentResult:
    prm = cfg.parameters
    n, p, d, budget, trials = prm["n"], prm["p"], prm["d"], prm["mc_budget"], prm["trials"]
    eps = prm.get("eps")
    if eps is None:
        eps = coupling_epsilon(n, p, d)
    tasks = [(n, p, d, eps, budget, stream.substream(i)) for i in range(trials)]
    out = map_indexed(_coupling_task, tasks, workers)
    ok = np.array([o[0] for o in out])
    minus, g, plus = (np.array([o[k] for o in out]) for k in (1, 2, 3))
    rows = [[i, ok[i], minus[i].sum(), g[i].sum(), plus[i].sum()] for i in range(trials)]

    def pair_check(edges, target):
        freq = edges.mean(axis=0)
        se = math.sqrt(target * (1 - target) / trials)
        return {"target": target, "mean_frequency": float(freq.mean()),
                "max_abs_z": float(np.max(np.abs(freq - target)) / se) if se > 0 else 0.0}

    rate = float(ok.mean())
    summary = {"eps": eps, "sandwich_rate": rate, "sandwich_rate_se": _binomial_se(rate, trials),
               "g_minus": pair_check(minus, min(max((1 - eps) * p, 0.0), 1.0)),
               "g": pair_check(g, p),
               "g_plus": pair_check(plus, min((1 + eps) * p, 1.0))}
    return ExperimentResult(["trial", "sandwich_ok", "edges_minus", "edges_g", "edges_plus"], rows, summary,
                            f"sandwich rate {rate:.3f} over {trials} trials (eps={eps:.4f})")


def run_qprobe(cfg: ExperimentConfig, stream: RngStream, workers: int) -> ExperimentResult:
    prm = cfg.parameters
    p, trials = prm["p"], prm["trials"]
    rows, excess = [], []
    for k, d in enumerate(cfg.d_grid):
        q, se = conditional_triangle_prob(d, p, trials, stream.substream(k))
        rows.append([d, p, trials, q, se, q / p**2 - 1, se / p**2])
        excess.append(q / p**2 - 1)
    summary = {"points": [{"d": r[0], "q": r[3], "q_se": r[4], "excess": r[5], "excess_se": r[6]} for r in rows]}
    ds = cfg.d_grid
    if len(ds) > 1 and all(e > 0 for e in excess):
        summary["excess_slope"] = loglog_slope(ds, excess)
    return ExperimentResult(["d", "p", "trials", "q", "q_se", "excess", "excess_se"], rows, summary,
                            f"conditional triangle probability {rows[-1][3]:.5f} at d={rows[-1][0]} (p={p})")


# --- concentration experiments --------------------------------------------------

def _trace_block(ds, traces_by_d, k, j, p, stream):
    per_d, rows = [], []
    finals = []
    for d, traces in zip(ds, traces_by_d):
        reps = np.array([t.replicate_ratios[:, -1] for t in traces])
        finals.append(reps)
        s = summarize_ratios(reps)
        per_d.append({"d": d, "mean": s.mean, "stderr": s.stderr, "std": s.std, "std_corrected": s.std_corrected,
                      "exact_std": exact_ratio_std(k, j, d, p),
                      "quantiles": s.quantiles, "truncated": sum(t.truncated for t in traces)})
    stat = (lambda r: noise_corrected_std(r[:, 0], r[:, 1])) if finals[0].shape[1] > 1 else \
        (lambda r: float(r[:, 0].std(ddof=1)))
    block = _slope_block(ds, [x["std_corrected"] for x in per_d], finals, stat, stream)
    return {"points": per_d, "std_slope": block}


def run_martingale(cfg: ExperimentConfig, stream: RngStream, workers: int) -> ExperimentResult:
    prm = cfg.parameters
    k, j, p, trials = prm["k"], prm["j"], prm["p"], prm["trials"]
    method = prm["method"]
    replicates = 2 if method == "splitting" else 1
    ds = cfg.d_grid
    traces_by_d = [martingale_traces(k, j, d, p, trials, prm["mc_samples"], stream.substream(i), method,
                                     replicates, prm["sweeps"], workers) for i, d in enumerate(ds)]
    rows = []
    for d, traces in zip(ds, traces_by_d):
        for t_idx, tr in enumerate(traces):
            for step in range(k + 1):
                rows.append([d, t_idx, step, tr.ratios[step], tr.per_step_stderr[step]])
    summary = _trace_block(ds, traces_by_d, k, j, p, stream.substream(len(ds)))
    last = summary["points"][-1]
    return ExperimentResult(["d", "trace", "step", "ratio", "stderr"], rows, summary,
                            f"E[R_{k}] = {last['mean']:.4f} +/- {last['stderr']:.4f}, "
                            f"std {last['std_corrected']:.4f} at d={last['d']}")


def run_anticap(cfg: ExperimentConfig, stream: RngStream, workers: int) -> ExperimentResult:
    prm = cfg.parameters
    m, p, trials = prm["m"], prm["p"], prm["trials"]
    ds = cfg.d_grid
    rows = []
    if m == 0:
        points = [{"d": d, "mean": 1.0, "stderr": 0.0, "std": 0.0, "std_corrected": 0.0, "exact_std": 0.0}
                  for d in ds]
        rows = [[d, t, 1.0, 0.0] for d in ds for t in range(trials)]
        return ExperimentResult(["d", "trial", "ratio", "stderr"], rows, {"points": points},
                                "no anti-caps: ratio identically 1")
    traces_by_d = [martingale_traces(m, 0, d, p, trials, prm["mc_samples"], stream.substream(i), "splitting", 2,
                                     prm["sweeps"], workers) for i, d in enumerate(ds)]
    for d, traces in zip(ds, traces_by_d):
        for t_idx, tr in enumerate(traces):
            r = tr.replicate_ratios[:, -1]
            rows.append([d, t_idx, tr.ratios[-1], abs(r[0] - r[1]) / 2])
    summary = _trace_block(ds, traces_by_d, m, 0, p, stream.substream(len(ds)))
    last = summary["points"][-1]
    return ExperimentResult(["d", "trial", "ratio", "stderr"], rows, summary,
                            f"anti-cap ratio mean {last['mean']:.4f}, std {last['std_corrected']:.4f} at d={last['d']}")


def _quantile_with_se(values, level, gen, draws=200):
    q = float(np.quantile(values, level))
    boots = [np.quantile(values[gen.integers(0, values.size, values.size)], level) for _ in range(draws)]
    return q, float(np.std(boots, ddof=1))


def run_diffusion(cfg: ExperimentConfig, stream: RngStream, workers: int) -> ExperimentResult:
    prm = cfg.parameters
    d, p, pushes, n, zs_count = prm["d"], prm["p"], prm["pushes"], prm["particles"], prm["z_samples"]
    tau = tau_of_p(d, p)
    if prm["start"] == "point":
        nu = ParticleDistribution.point_mass(np.eye(d)[0], n)
    else:
        nu = ParticleDistribution.uniform(d, n, stream.substream(0))
    rows = []
    for step in range(pushes + 1):
        sub = stream.substream(1).substream(step)
        zs = sample_uniform_sphere(d, sub.substream(0), size=zs_count)
        dev = relative_deviations(nu, tau, zs, p)
        disc, se = _quantile_with_se(dev, 0.99, sub.substream(1).generator())
        rows.append([step, disc, se, math.fsum(nu.weights)])
        if step < pushes:
            nu = cap_convolution_push(nu, tau, sub.substream(2))
    seq = [r[1] for r in rows]
    ratios = [b / a if a > 0 else math.nan for a, b in zip(seq, seq[1:])]
    summary = {"discrepancy": seq, "successive_ratios": ratios,
               "strictly_decreasing": all(b < a for a, b in zip(seq, seq[1:]))}
    return ExperimentResult(["step", "discrepancy", "discrepancy_se", "total_weight"], rows, summary,
                            "discrepancy " + " -> ".join(f"{x:.4g}" for x in seq))


RUNNERS: dict[str, Callable[[ExperimentConfig, RngStream, int], ExperimentResult]] = {
    "sample": run_sample,
    "power": run_power,
    "tv_curve": run_tv_curve,
    "coupling": run_coupling,
    "martingale": run_martingale,
    "diffusion": run_diffusion,
    "anticap": run_anticap,
    "qprobe": run_qprobe,
}


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    return RUNNERS[cfg.experiment](cfg, RngStream(cfg.seed), workers)
