"""Command-line surface: fit, effects, simulate, mc.

Every subcommand writes machine-readable JSON under --out and prints a
human-readable summary to stdout.  Exit codes: 0 success, 1 runtime or
statistical error (message prefixed with the error class), 2 usage error.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .dataio import (RESULT_SCHEMA_VERSION, StudyConfig, config_digest, dump_json,
                     load_design, load_study_config, mc_coefficient_rows,
                     mc_effect_rows, write_attribute_table, write_csv_rows,
                     write_edges, write_feature_map)
from .design import DyadDesign
from .effects import aggregate_effect, average_partial_effect
from .errors import ConfigError, DyadLogitError
from .estimator import FitOptions, fit
from .mc import run_mc
from .simulator import aggregate_limit, simulate_graph
from .variance import MODES, sandwich, variance_components, vcov_alpha_scale


def _add_data_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--edges", required=True, help="edge list CSV (consumer_id, product_id)")
    p.add_argument("--consumers", required=True, help="consumer attribute CSV")
    p.add_argument("--products", required=True, help="product attribute CSV")
    p.add_argument("--features", required=True, help="feature map TOML")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dyadlogit",
        description="Sparse bipartite dyadic logistic regression")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit the composite-likelihood logit")
    _add_data_flags(p_fit)
    p_fit.add_argument("--out", required=True, help="output directory")
    p_fit.add_argument("--level", type=float, default=0.95)
    p_fit.add_argument("--modes", default=",".join(MODES),
                       help="comma-separated variance modes to report")
    p_fit.add_argument("--max-iter", type=int, default=100)
    p_fit.add_argument("--grad-tol", type=float, default=1e-8)
    p_fit.add_argument("--seed", type=int, default=None, help="recorded in provenance")
    p_fit.add_argument("--threads", type=int, default=1, help="accepted for interface parity")

    p_eff = sub.add_parser("effects", help="aggregate effect and/or APE from a fresh fit")
    _add_data_flags(p_eff)
    p_eff.add_argument("--out", required=True)
    p_eff.add_argument("--level", type=float, default=0.95)
    p_eff.add_argument("--x", default=None,
                       help="product attributes as key=value[,key=value...]")
    p_eff.add_argument("--x-row", default=None, help="existing product id to use as x")
    p_eff.add_argument("--ape", action="store_true", help="report average partial effects")

    p_sim = sub.add_parser("simulate", help="draw one network from a graphon config")
    p_sim.add_argument("--config", required=True, help="study TOML with a [graphon] block")
    p_sim.add_argument("--n", type=int, default=None, help="override [simulate].n")
    p_sim.add_argument("--seed", type=int, default=None, help="override [study].seed")
    p_sim.add_argument("--out", required=True)

    p_mc = sub.add_parser("mc", help="run a Monte Carlo study from a config file")
    p_mc.add_argument("--config", required=True)
    p_mc.add_argument("--out", required=True)
    p_mc.add_argument("--threads", type=int, default=None, help="override [mc].threads")
    return parser


def _parse_x(arg: str) -> dict:
    out = {}
    for part in arg.split(","):
        if "=" not in part:
            raise ConfigError(f"--x expects key=value pairs, got {part!r}")
        key, val = part.split("=", 1)
        try:
            out[key.strip()] = float(val)
        except ValueError:
            out[key.strip()] = val.strip()
    return out


def _fit_bundle(design: DyadDesign, args, modes: list[str]):
    res = fit(design, FitOptions(max_iter=getattr(args, "max_iter", 100),
                                 grad_tol=getattr(args, "grad_tol", 1e-8)))
    summary = design.summary()
    bundle = {
        "version": __version__,
        "schema": RESULT_SCHEMA_VERSION,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "level": args.level,
        "provenance": {
            "seed": getattr(args, "seed", None),
            "config_hash": config_digest({
                "edges": str(args.edges), "consumers": str(args.consumers),
                "products": str(args.products), "features": str(args.features)}),
            "command": args.command,
        },
        "summary": {
            "n_consumers": design.n_consumers, "n_products": design.n_products,
            "n_edges": design.n_edges, "rho_hat": summary.rho_hat,
            "lambda_c_hat": summary.lambda_c_hat, "lambda_p_hat": summary.lambda_p_hat,
            "phi_n": summary.phi_n,
        },
        "fit": {
            "converged": res.converged,
            "iterations": res.iterations,
            "final_grad_norm": res.final_grad_norm,
            "loglik": res.loglik,
            "coefficients": {
                "names": ["alpha_n"] + list(design.feature_map.names),
                "alpha_n": res.theta_hat.alpha_n,
                "alpha": res.theta_hat.alpha,
                "beta": res.theta_hat.beta,
            },
            "gamma_hat": res.gamma_hat,
            "gamma_hat_pd": res.gamma_hat_pd,
        },
        "variance": {},
    }
    if not res.converged:
        print("warning: fit did not converge "
              f"(grad norm {res.final_grad_norm:.3g})", file=sys.stderr)
        return bundle, res, None

    comp = variance_components(res, design)
    robust_vcov = None
    for mode in modes:
        rep = sandwich(res, comp, mode, args.level)
        if mode == "dyadic_robust":
            robust_vcov = rep.vcov
        bundle["variance"][mode] = {
            "vcov_theta_n": rep.vcov,
            "std_errors": rep.std_errors,
            "intervals": rep.intervals,
            "meat_psd": rep.meat_psd,
            "vcov_psd": rep.vcov_psd,
            "vcov_alpha_scale": vcov_alpha_scale(res, rep),
        }
    return bundle, res, robust_vcov


def _print_fit_table(bundle: dict) -> None:
    coeff = bundle["fit"]["coefficients"]
    names = coeff["names"]
    est = [coeff["alpha_n"], *np.asarray(coeff["beta"]).tolist()]
    mode = "dyadic_robust" if "dyadic_robust" in bundle["variance"] else None
    print(f"converged={bundle['fit']['converged']} iterations={bundle['fit']['iterations']} "
          f"loglik={bundle['fit']['loglik']:.6f}")
    print(f"{'coef':<16}{'estimate':>14}{'se':>12}{'ci_lo':>12}{'ci_hi':>12}   [{mode or 'no se'}]")
    for k, name in enumerate(names):
        if mode:
            block = bundle["variance"][mode]
            se = block["std_errors"][k]
            lo, hi = block["intervals"][k]
            print(f"{name:<16}{est[k]:>14.6f}{se:>12.6f}{lo:>12.6f}{hi:>12.6f}")
        else:
            print(f"{name:<16}{est[k]:>14.6f}")
    print(f"{'alpha':<16}{bundle['fit']['coefficients']['alpha']:>14.6f}   (= n * exp(alpha_n))")


def _cmd_fit(args) -> int:
    design = load_design(args.edges, args.consumers, args.products, args.features)
    modes = [m.strip() for m in args.modes.split(",") if m.strip()]
    for m in modes:
        if m not in MODES:
            raise ConfigError(f"unknown variance mode {m!r}")
    bundle, _, _ = _fit_bundle(design, args, modes)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dump_json(out / "result.json", bundle)
    _print_fit_table(bundle)
    print(f"wrote {out / 'result.json'}")
    return 0


def _cmd_effects(args) -> int:
    if args.x is not None and args.x_row is not None:
        raise ConfigError("--x and --x-row are mutually exclusive")
    if args.x is None and args.x_row is None and not args.ape:
        raise ConfigError("effects needs --x, --x-row, or --ape")
    design = load_design(args.edges, args.consumers, args.products, args.features)
    args.modes = ",".join(MODES)
    bundle, res, robust_vcov = _fit_bundle(design, args, list(MODES))
    if robust_vcov is None:
        raise DyadLogitError("fit did not converge; effects unavailable")

    block: dict = {}
    if args.x is not None or args.x_row is not None:
        x = _parse_x(args.x) if args.x is not None else design.product_attrs.index_of(args.x_row)
        agg = aggregate_effect(res, design, x, args.level, vcov=robust_vcov)
        block["aggregate"] = {
            "x": agg.x, "gamma_hat": agg.gamma_hat, "se": agg.se,
            "interval": list(agg.interval), "level": agg.level,
        }
        print(f"aggregate gamma_hat = {agg.gamma_hat:.6f}  se = {agg.se:.6f}  "
              f"ci = [{agg.interval[0]:.6f}, {agg.interval[1]:.6f}]")
    if args.ape:
        ape = average_partial_effect(res, design, args.level, vcov=robust_vcov)
        block["ape"] = {
            "names": list(design.feature_map.names),
            "gamma_hat": ape.gamma_hat, "se": ape.se, "intervals": ape.intervals,
            "gamma_density_scaled": ape.gamma_density_scaled,
            "se_density_scaled": ape.se_density_scaled, "level": ape.level,
        }
        for k, name in enumerate(design.feature_map.names):
            print(f"ape[{name}] = {ape.gamma_hat[k]:.3e}  se = {ape.se[k]:.3e}  "
                  f"density-scaled = {ape.gamma_density_scaled[k]:.6f}")
    bundle["effects"] = block
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dump_json(out / "effects.json", bundle)
    print(f"wrote {out / 'effects.json'}")
    return 0


def _require_graphon(cfg: StudyConfig, path: str):
    if cfg.graphon is None:
        raise ConfigError(f"{path}: this command needs a [graphon] block")
    return cfg.graphon


def _cmd_simulate(args) -> int:
    cfg = load_study_config(args.config)
    graphon = _require_graphon(cfg, args.config)
    n = args.n if args.n is not None else cfg.simulate_n
    if n is None:
        raise ConfigError("simulate needs --n or [simulate].n in the config")
    seed = args.seed if args.seed is not None else cfg.seed
    design, _ = simulate_graph(graphon, n, seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_attribute_table(out / "consumers.csv", design.consumer_attrs, "consumer_id")
    write_attribute_table(out / "products.csv", design.product_attrs, "product_id")
    write_edges(out / "edges.csv", design)
    write_feature_map(out / "features.toml", design.feature_map)
    s = design.summary()
    print(f"simulated n={n}: N={design.n_consumers} M={design.n_products} "
          f"edges={design.n_edges} density={s.rho_hat:.5f}")
    print(f"wrote consumers.csv products.csv edges.csv features.toml under {out}")
    return 0


def _cmd_mc(args) -> int:
    cfg = load_study_config(args.config)
    graphon = _require_graphon(cfg, args.config)
    if not cfg.n_grid or not cfg.replications:
        raise ConfigError(f"{args.config}: [mc] needs n_grid and replications")
    threads = args.threads if args.threads is not None else cfg.threads
    reference = (aggregate_limit(graphon, cfg.aggregate_x)
                 if cfg.aggregate_x is not None else None)
    report = run_mc(graphon, cfg.n_grid, cfg.replications, cfg.seed,
                    level=cfg.level, threads=threads, aggregate_x=cfg.aggregate_x,
                    aggregate_reference=reference)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "mc_report.json").write_text(report.to_json() + "\n")
    write_csv_rows(out / "mc_coefficients.csv", mc_coefficient_rows(report))
    write_csv_rows(out / "mc_effects.csv", mc_effect_rows(report))
    for cell in report.cells:
        cov = cell["modes"]["dyadic_robust"]["coverage"]
        print(f"n={cell['n']}: failed={cell['n_failed']} "
              f"dyadic_robust coverage={['%.3f' % c for c in cov]}")
    if report.slopes:
        print("slopes: " + ", ".join(f"{k}={v:.3f}" for k, v in report.slopes.items()
                                     if v is not None))
    print(f"wrote mc_report.json mc_coefficients.csv mc_effects.csv under {out}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"fit": _cmd_fit, "effects": _cmd_effects,
                "simulate": _cmd_simulate, "mc": _cmd_mc}
    try:
        return handlers[args.command](args)
    except DyadLogitError as exc:
        print(f"error[{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error[{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
