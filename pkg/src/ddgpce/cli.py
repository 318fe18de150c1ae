"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 model-evaluation error,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import archive
from .bifidelity import BudgetModel, check_budget, run_bifidelity
from .config import PipelineConfig, load_config, problems_error, resolve_model
from .distributions import SCHEMES, sample
from .errors import ConfigError, DdgpceError, ModelEvaluationError, NumericalError
from .models import CountingEvaluator
from .multiindex import cardinality_full, generate_reduced
from .orthopoly import build_basis
from .risk import ESTIMATORS, empirical_cdf, risk_inputs, tail_index_uniform, var_cvar
from .surrogate import fit_surrogate
from .trials import cdf_distance, crude_pool, run_bifi_trials, run_trials

log = logging.getLogger("ddgpce")

RISK_FIELDS = ("beta", "var", "cvar", "L", "k_beta", "estimator", "seed")


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def _write_csv(path: Path, fields, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(fields)
        for r in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in (r[f] for f in fields)])


def _risk_rows(estimates, seed):
    return [
        {"beta": e.beta, "var": e.var, "cvar": e.cvar, "L": e.sample_count,
         "k_beta": e.k_beta, "estimator": e.estimator, "seed": seed}
        for e in estimates
    ]


def _emit_risk(out: Path, stem: str, rows) -> None:
    _write_csv(out / f"{stem}.csv", RISK_FIELDS, rows)
    _write_json(out / f"{stem}.json", rows)
    for r in rows:
        print(f"beta={r['beta']:g}  VaR={r['var']:.10g}  CVaR={r['cvar']:.10g}  "
              f"L={r['L']}  k={r['k_beta']}  ({r['estimator']})")


def _emit_cdf(out: Path, y) -> None:
    values, probs = empirical_cdf(y)
    with open(out / "cdf.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["value", "probability"])
        w.writerows([repr(float(v)), repr(float(p))] for v, p in zip(values, probs))


def _config(args, command) -> PipelineConfig:
    if args.config is None:
        raise ConfigError(f"{command} needs --config")
    cfg = load_config(args.config, command)
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "estimator", None) is not None:
        cfg.estimator = args.estimator
    return cfg


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_validate(args) -> int:
    cfg = _config(args, args.for_command)
    N = cfg.input_model.dimension
    print("configuration OK")
    print(f"  inputs N = {N}, S = {cfg.S}, m = {cfg.m}, basis size = {cfg.n_terms}")
    print(f"  L' = {cfg.n_design}, L_bar = {cfg.L_bar}, L = {cfg.L}, beta = {cfg.betas}")
    if cfg.low_model_ref is not None:
        print(f"  m_bar = {cfg.m_bar}, L'' = {[cfg.n_high(mb) for mb in cfg.m_bar]}")
    return 0


def cmd_sample(args) -> int:
    cfg = _config(args, "sample")
    batch = sample(cfg.input_model, args.scheme, args.count or cfg.L, cfg.seed)
    path = _outdir(args) / "samples.csv"
    batch.to_csv(path)
    print(f"wrote {batch.count} {args.scheme} samples to {path}")
    return 0


def cmd_fit(args) -> int:
    cfg = _config(args, "fit")
    out = _outdir(args)
    evaluator = CountingEvaluator(resolve_model(cfg.model_ref, cfg.input_model, cfg.base_dir), "model")
    sur = fit_surrogate(
        cfg.input_model, evaluator, cfg.S, cfg.m, cfg.n_design, cfg.seed,
        n_moment=cfg.L_bar, qmc_seed=cfg.qmc_seed, ratio_min=cfg.ratio_min,
    )
    N = cfg.input_model.dimension
    report = {
        "N": N, "S": cfg.S, "m": cfg.m,
        "basis_size": sur.basis.size,
        "full_basis_size": cardinality_full(N, cfg.m),
        "L_prime": cfg.n_design, "L_bar": cfg.L_bar,
        "residual": sur.fit_report.residual,
        "design_condition": sur.fit_report.condition_estimate,
        "moment_condition": sur.basis.condition_estimate,
        "jitter": sur.basis.jitter,
        "model_evaluations": evaluator.calls,
        "mean": sur.mean, "variance": sur.variance,
        "seed": cfg.seed, "qmc_seed": cfg.qmc_seed,
    }
    provenance = {"seed": cfg.seed, "qmc_seed": cfg.qmc_seed, "S": cfg.S, "m": cfg.m,
                  "L_prime": cfg.n_design, "L_bar": cfg.L_bar, "model": cfg.model_ref}
    archive.save(out / "surrogate.json", sur, cfg.input_model, provenance)
    _write_json(out / "fit_report.json", report)
    print(f"basis size {sur.basis.size} (full basis {report['full_basis_size']}), "
          f"L' = {cfg.n_design}, model evaluations: {evaluator.calls}")
    print(f"residual {sur.fit_report.residual:.6g}, moment-matrix condition {sur.basis.condition_estimate:.3g}")
    print(f"wrote {out / 'surrogate.json'}")
    return 0


def cmd_estimate(args) -> int:
    if args.archive is None:
        raise ConfigError("estimate needs --archive")
    sur, model, _ = archive.load(args.archive)
    cfg = load_config(args.config, "estimate") if args.config else None
    if model is None:
        if cfg is None:
            raise ConfigError("archive stores no input model; pass --config")
        model = cfg.input_model
    L = args.L or (cfg.L if cfg else 10_000)
    betas = args.beta or (cfg.betas if cfg else [0.95])
    seed = args.seed if args.seed is not None else (cfg.seed if cfg else 0)
    estimator = args.estimator or (cfg.estimator if cfg else "rockafellar")
    problems = []
    for b in betas:
        try:
            if not 0 < b < 1:
                raise ConfigError(f"beta {b} is not in (0, 1)")
            tail_index_uniform(L, b)
        except ConfigError as exc:
            problems.append(f"beta {b}: {exc}")
    if problems:
        raise problems_error(problems)
    out = _outdir(args)
    y = sur(risk_inputs(model, L, seed))
    _emit_risk(out, "risk", _risk_rows([var_cvar(y, None, b, estimator) for b in betas], seed))
    if args.cdf:
        _emit_cdf(out, y)
    return 0


def cmd_bifit(args) -> int:
    cfg = _config(args, "bifit")
    out = _outdir(args)
    m_bar = cfg.m_bar[0]
    low = CountingEvaluator(resolve_model(cfg.low_model_ref, cfg.input_model, cfg.base_dir), "low")
    high = CountingEvaluator(resolve_model(cfg.model_ref, cfg.input_model, cfg.base_dir), "high")
    res = run_bifidelity(
        cfg.input_model, low, high, cfg.S, cfg.m, m_bar, cfg.L, cfg.n_design, cfg.n_high(m_bar),
        cfg.betas, cfg.seed, cfg.L_bar, cfg.qmc_seed, cfg.estimator, ratio_min=cfg.ratio_min,
    )
    report = {
        "low_fidelity_evaluations": low.calls,
        "high_fidelity_evaluations": high.calls,
        "basis_size": res.surrogate.low.basis.size,
        "low_residual": res.surrogate.low.fit_report.residual,
        "link_residual": res.surrogate.link.fit_report.residual,
        "link_coefficients": res.surrogate.link.coefficients.tolist(),
        **res.surrogate.provenance,
    }
    print(f"low-fidelity evaluations: {low.calls}")
    print(f"high-fidelity evaluations: {high.calls}")
    if cfg.budget is not None:
        b = check_budget(BudgetModel(cfg.budget["total"], cfg.budget["cost_high"], cfg.budget["cost_low"],
                                     cfg.n_design, cfg.n_high(m_bar)))
        report["budget"] = {"low_cost_bound": b.low_cost_bound, "feasible": b.feasible,
                            "low_cost_ok": b.low_cost_ok}
        status = "infeasible" if not b.feasible else ("satisfied" if b.low_cost_ok else "violated")
        print(f"budget check: low-fidelity cost bound {b.low_cost_bound:.6g}, {status}")
    provenance = {**res.surrogate.provenance, "model": cfg.model_ref, "low_model": cfg.low_model_ref}
    archive.save(out / "bifidelity.json", res.surrogate, cfg.input_model, provenance)
    _write_json(out / "bifit_report.json", report)
    _emit_risk(out, "risk", _risk_rows(res.estimates, cfg.seed))
    if args.cdf:
        _emit_cdf(out, res.surrogate(risk_inputs(cfg.input_model, cfg.L, cfg.seed)))
    return 0


def cmd_trials(args) -> int:
    cfg = _config(args, "trials")
    out = _outdir(args)
    model = cfg.input_model
    high = resolve_model(cfg.model_ref, model, cfg.base_dir)
    low = None if cfg.low_model_ref is None else resolve_model(cfg.low_model_ref, model, cfg.base_dir)
    pool = crude_pool(model, high, cfg.pool, cfg.seed, low)
    common = dict(trials=cfg.trials, L=cfg.L, seed=cfg.seed, n_moment=cfg.L_bar, qmc_seed=cfg.qmc_seed,
                  estimator=cfg.estimator, ratio_min=cfg.ratio_min, replace=cfg.replace, keep_surrogates=True)
    basis = build_basis(model, generate_reduced(model.dimension, cfg.S, cfg.m), cfg.L_bar, cfg.qmc_seed)
    rows = []
    for beta in cfg.betas:
        reports = [run_trials(model, pool, cfg.S, cfg.m, cfg.n_design, beta=beta, basis=basis, **common)]
        if low is not None:
            reports.append(run_trials(model, pool, cfg.S, cfg.m, cfg.n_design, beta=beta, basis=basis,
                                      fidelity="low", **common))
            for mb in cfg.m_bar:
                reports.append(run_bifi_trials(model, pool, cfg.S, cfg.m, mb, cfg.n_design, cfg.n_high(mb),
                                               beta=beta, basis=basis, **common))
        for r in reports:
            row = r.as_row()
            row["ks_distance"] = cdf_distance(r.surrogates[0], model, pool.outputs, cfg.L, cfg.seed)
            rows.append(row)
            print(f"beta={beta:g}  {row['label']:<28} mean CVaR {row['mean_cvar']:.6g}  "
                  f"benchmark {row['benchmark_cvar']:.6g}  MRD {100 * row['mrd']:.3f}%  "
                  f"KS {row['ks_distance']:.4f}")
    fields = ("label", "beta", "benchmark_cvar", "mean_cvar", "mrd", "ks_distance", "trials")
    _write_csv(out / "trials.csv", fields, rows)
    _write_json(out / "trials.json", rows)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ddgpce", description="DD-GPCE surrogates for VaR/CVaR estimation")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", help="pipeline configuration JSON")
        sp.add_argument("--seed", type=int, help="master seed (overrides the config)")
        sp.add_argument("--out", default=".", help="output directory")
        sp.set_defaults(func=func)
        return sp

    v = add("validate", cmd_validate, "check a configuration without running anything")
    v.add_argument("--for", dest="for_command", choices=("fit", "bifit", "trials"), default=None,
                   help="also apply the checks specific to this command")
    s = add("sample", cmd_sample, "write input samples as CSV")
    s.add_argument("--scheme", choices=SCHEMES, default="mcs")
    s.add_argument("--count", type=int)
    add("fit", cmd_fit, "fit a DD-GPCE surrogate and write an archive")
    e = add("estimate", cmd_estimate, "estimate VaR/CVaR from an archive")
    e.add_argument("--archive", help="surrogate archive JSON")
    e.add_argument("--beta", type=float, action="append", help="risk level (repeatable)")
    e.add_argument("--L", type=int, help="number of MCS samples")
    e.add_argument("--estimator", choices=ESTIMATORS)
    e.add_argument("--cdf", action="store_true", help="also write the empirical CDF")
    b = add("bifit", cmd_bifit, "bi-fidelity fit and risk estimate")
    b.add_argument("--estimator", choices=ESTIMATORS)
    b.add_argument("--cdf", action="store_true", help="also write the empirical CDF")
    t = add("trials", cmd_trials, "repeated fits scored against crude MCS")
    t.add_argument("--estimator", choices=ESTIMATORS)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        for prob in exc.problems:
            if prob not in str(exc):
                print(f"  - {prob}", file=sys.stderr)
        return 2
    except ModelEvaluationError as exc:
        print(f"model evaluation error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4
    except DdgpceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
