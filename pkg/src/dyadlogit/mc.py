"""Monte Carlo studies validating coverage, rates, and normality.

Replication r of grid cell k draws its RNG from
SeedSequence(master_seed, spawn_key=(k, r)), so every replication owns an
independent stream, results do not depend on scheduling order, and the
whole study is reproducible from the master seed alone.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps
from scipy.stats import norm

from .effects import aggregate_effect, average_partial_effect
from .errors import DyadLogitError, McRunError
from .estimator import FitOptions, fit
from .simulator import GraphonConfig, simulate_graph
from .variance import MODES, sandwich, variance_components

_MAX_FAILURE_RATE = 0.02


@dataclass
class McReport:
    """Per-cell estimator and inference summaries plus cross-size rate slopes."""

    master_seed: int
    replications: int
    level: float
    n_grid: list[int]
    modes: list[str]
    aggregate_x: dict | None
    aggregate_reference: float | None
    cells: list[dict]
    slopes: dict

    def to_dict(self) -> dict:
        return {
            "master_seed": self.master_seed,
            "replications": self.replications,
            "level": self.level,
            "n_grid": list(self.n_grid),
            "modes": list(self.modes),
            "aggregate_x": self.aggregate_x,
            "aggregate_reference": self.aggregate_reference,
            "cells": self.cells,
            "slopes": self.slopes,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def _run_batch(config: GraphonConfig, n: int, n_idx: int, reps: range, master_seed: int,
               level: float, aggregate_x: dict | None, compute_effects: bool) -> list[dict]:
    out = []
    opts = FitOptions()
    for r in reps:
        seed = np.random.SeedSequence(master_seed, spawn_key=(n_idx, r))
        design, _ = simulate_graph(config, n, seed)
        rec: dict = {"rep": r, "edges": design.n_edges}
        try:
            res = fit(design, opts)
            if not res.converged:
                raise DyadLogitError("did not reach gradient tolerance")
            comp = variance_components(res, design)
            rec["ok"] = True
            rec["theta"] = res.theta_hat.stacked()
            se = {}
            robust_vcov = None
            for mode in MODES:
                rep = sandwich(res, comp, mode, level)
                se[mode] = rep.std_errors
                if mode == "dyadic_robust":
                    robust_vcov = rep.vcov
            rec["se"] = se
            if compute_effects:
                ape = average_partial_effect(res, design, level, vcov=robust_vcov)
                rec["ape"] = ape.gamma_hat
                rec["ape_se"] = ape.se
                if aggregate_x is not None:
                    agg = aggregate_effect(res, design, aggregate_x, level, vcov=robust_vcov)
                    rec["agg"] = agg.gamma_hat
                    rec["agg_se"] = agg.se
        except DyadLogitError as exc:
            rec["ok"] = False
            rec["reason"] = f"{type(exc).__name__}: {exc}"
        out.append(rec)
    return out


def _loglog_slope(n_grid, values) -> float | None:
    pts = [(n, v) for n, v in zip(n_grid, values) if v is not None and v > 0]
    if len(pts) < 2:
        return None
    x = np.log([p[0] for p in pts])
    y = np.log([p[1] for p in pts])
    return float(np.polyfit(x, y, 1)[0])


def _summarize_cell(config: GraphonConfig, n: int, records: list[dict], level: float,
                    aggregate_reference: float | None, max_failure_rate: float) -> dict:
    failures = [r for r in records if not r["ok"]]
    good = [r for r in records if r["ok"]]
    if len(failures) > max_failure_rate * len(records):
        reasons = sorted({r["reason"] for r in failures})
        raise McRunError(f"{len(failures)}/{len(records)} replications failed at n={n} "
                         f"(limit {max_failure_rate:.0%}): {'; '.join(reasons[:3])}")
    N, M = config.sizes(n)
    theta0 = config.theta0(n).stacked()
    p = theta0.size
    est = np.array([r["theta"] for r in good])
    err = est - theta0
    emp_sd = est.std(axis=0, ddof=1)
    std_err = err / emp_sd
    z = norm.ppf(0.5 + level / 2)

    cell = {
        "n": n, "N": N, "M": M,
        "n_replications": len(records),
        "n_failed": len(failures),
        "failure_reasons": sorted({r["reason"] for r in failures}),
        "edges_mean": float(np.mean([r["edges"] for r in records])),
        "theta0_n": theta0.tolist(),
        "estimates": {
            "bias": err.mean(axis=0).tolist(),
            "empirical_sd": emp_sd.tolist(),
            "rmse": np.sqrt((err**2).mean(axis=0)).tolist(),
            "skewness": sps.skew(std_err, axis=0).tolist(),
            "kurtosis_excess": sps.kurtosis(std_err, axis=0).tolist(),
        },
        "modes": {},
    }
    t_coord = 1 if p > 1 else 0
    for mode in MODES:
        se = np.array([r["se"][mode] for r in good])
        cover = (np.abs(err) <= z * se).mean(axis=0)
        t = err[:, t_coord] / se[:, t_coord]
        cell["modes"][mode] = {
            "mean_se": se.mean(axis=0).tolist(),
            "coverage": cover.tolist(),
            "ks_beta1": float(sps.kstest(t, "norm").statistic),
        }
    if good and "ape" in good[0]:
        ape = np.array([r["ape"] for r in good])
        ape_se = np.array([r["ape_se"] for r in good])
        cell["ape"] = {
            "mean": ape.mean(axis=0).tolist(),
            "empirical_var": ape.var(axis=0, ddof=1).tolist(),
            "mean_estimated_var": (ape_se**2).mean(axis=0).tolist(),
        }
    if good and "agg" in good[0]:
        agg = np.array([r["agg"] for r in good])
        agg_se = np.array([r["agg_se"] for r in good])
        block = {
            "mean": float(agg.mean()),
            "empirical_sd": float(agg.std(ddof=1)),
            "mean_se": float(agg_se.mean()),
        }
        if aggregate_reference is not None:
            dev = agg - aggregate_reference
            block["bias"] = float(dev.mean())
            block["median_abs_error"] = float(np.median(np.abs(dev)))
            block["coverage"] = float((np.abs(dev) <= z * agg_se).mean())
        cell["aggregate"] = block
    return cell


def run_mc(config: GraphonConfig, n_grid: list[int], replications: int, master_seed: int,
           level: float = 0.95, threads: int = 1, aggregate_x: dict | None = None,
           aggregate_reference: float | None = None, compute_effects: bool = True,
           max_failure_rate: float = _MAX_FAILURE_RATE) -> McReport:
    """Simulate/fit/infer over every (n, replication) cell and aggregate.

    Failing replications (no convergence, separation, singular information)
    are excluded and counted; more than max_failure_rate of a cell aborts
    the study.
    """
    if replications < 2:
        raise McRunError("need at least 2 replications")
    all_records: dict[int, list[dict]] = {}
    for n_idx, n in enumerate(n_grid):
        if threads > 1:
            batch = max(1, math.ceil(replications / (threads * 4)))
            ranges = [range(s, min(s + batch, replications))
                      for s in range(0, replications, batch)]
            with ProcessPoolExecutor(max_workers=threads) as pool:
                futures = [pool.submit(_run_batch, config, n, n_idx, rg, master_seed,
                                       level, aggregate_x, compute_effects)
                           for rg in ranges]
                records = [rec for f in futures for rec in f.result()]
        else:
            records = _run_batch(config, n, n_idx, range(replications), master_seed,
                                 level, aggregate_x, compute_effects)
        records.sort(key=lambda r: r["rep"])
        all_records[n] = records

    cells = [_summarize_cell(config, n, all_records[n], level,
                             aggregate_reference, max_failure_rate)
             for n in n_grid]

    slopes: dict = {}
    if len(n_grid) >= 2:
        rmse_beta = [math.sqrt(float(np.mean(np.array(c["estimates"]["rmse"])[1:] ** 2)))
                     if len(c["estimates"]["rmse"]) > 1 else None for c in cells]
        var_theta = [float(np.mean(np.array(c["estimates"]["empirical_sd"]) ** 2))
                     for c in cells]
        slopes["rmse_beta"] = _loglog_slope(n_grid, rmse_beta)
        slopes["var_theta"] = _loglog_slope(n_grid, var_theta)
        if all("ape" in c for c in cells):
            var_ape = [float(np.mean(c["ape"]["empirical_var"])) for c in cells]
            slopes["var_ape"] = _loglog_slope(n_grid, var_ape)

    return McReport(master_seed=master_seed, replications=replications, level=level,
                    n_grid=list(n_grid), modes=list(MODES),
                    aggregate_x=aggregate_x, aggregate_reference=aggregate_reference,
                    cells=cells, slopes=slopes)
