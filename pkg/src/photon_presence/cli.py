"""Command-line front end: simulate, estimate, ensemble, table1, oracle-verify, figures.

Exit status: 0 on success, 2 on a usage or config error, 3 when an internal
contract fires (probability clamping, unexpected flat likelihoods, oracle
slope failures), 1 on I/O failures.
"""

from __future__ import annotations

import argparse
import sys
import warnings
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

import numpy as np

from .estimator import convergence_step, ensemble_stats, estimation_trace, postselection_ratio
from .information import build_table1
from .models import ClampWarning, frequency_dependence
from .montecarlo import sample_counts
from .network import build_network
from .params import ConfigError, ModelKind, RunConfig
from .verification import oracle_report

EXIT_OK, EXIT_IO, EXIT_USAGE, EXIT_CONTRACT = 0, 1, 2, 3
TIME_MODELS = ("ba", "localized_l1", "localized_l4")
REFERENCE_RUNS = 500


class ContractFailure(RuntimeError):
    pass


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="photon-presence", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("simulate", "sample postselected counts per window"),
        ("estimate", "prefix maximum-likelihood estimates of one frequency"),
        ("ensemble", "mean deviation and counts over repeated runs"),
        ("table1", "two-window information and presence table"),
        ("oracle-verify", "check closed forms against the exact network"),
        ("figures", "run every reproduction artifact"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", type=Path, help="JSON config file")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", type=Path)
        p.add_argument("--plots", type=_bool, metavar="BOOL")
        p.add_argument("--runs", type=int)
        p.add_argument("--target", type=int, choices=range(1, 6), metavar="{1..5}")
        p.add_argument("--model", choices=TIME_MODELS)
        if name == "ensemble":
            p.add_argument("--versus", choices=TIME_MODELS, help="second model for the N_post ratio")
        if name in ("ensemble", "figures"):
            p.add_argument("--jobs", type=int, default=None, help="joblib workers for ensembles")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    changes = {}
    for key in ("seed", "runs", "target", "plots"):
        v = getattr(args, key)
        if v is not None:
            changes[key] = v
    if args.out is not None:
        changes["out"] = str(args.out)
    if args.model is not None:
        changes["model"] = ModelKind.from_value(args.model)
    return replace(cfg, **changes) if changes else cfg


def _outdir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _require_time_model(cfg: RunConfig, key: str = "model"):
    if cfg.model.kind not in TIME_MODELS:
        raise ConfigError(key, f"{cfg.model.label} has no time dependence; use one of {TIME_MODELS}")


def _check_flat(flags, cfg: RunConfig, model: ModelKind, target: int, what: str):
    if np.any(flags) and target in frequency_dependence(cfg.params, model):
        raise ContractFailure(f"{what}: flat likelihood for omega_{target}, which the model depends on")


def cmd_simulate(cfg: RunConfig) -> dict:
    from .report import plot_counts, write_json

    _require_time_model(cfg)
    out = _outdir(cfg)
    series = sample_counts(cfg.params, cfg.model, cfg.seed)
    series.to_csv(out / "counts.csv")
    write_json(out / "config.json", cfg.to_dict())
    if cfg.plots:
        plot_counts(series, out / "counts.svg")
    return {"total_counts": int(series.counts.sum())}


def cmd_estimate(cfg: RunConfig) -> dict:
    from .report import plot_traces, write_json

    _require_time_model(cfg)
    out = _outdir(cfg)
    series = sample_counts(cfg.params, cfg.model, cfg.seed)
    series.to_csv(out / "counts.csv")
    tr = estimation_trace(series, cfg.target)
    tr.to_csv(out / "trace.csv")
    summary = {
        "config": cfg.to_dict(),
        "target": cfg.target,
        "true_omega": tr.true_omega,
        "final_estimate": float(tr.estimates[-1]),
        "convergence_step": convergence_step(tr),
        "degenerate_prefixes": int(tr.degenerate.sum()),
        "tied_prefixes": int(tr.ties.sum()),
    }
    write_json(out / "trace.json", summary)
    write_json(out / "config.json", cfg.to_dict())
    if cfg.plots:
        plot_traces([(tr, f"omega_{cfg.target}", "tab:red")], out / "trace.svg", cfg.model.label)
    _check_flat(tr.degenerate, cfg, cfg.model, cfg.target, "estimate")
    return summary


def _ensemble_summary(st) -> dict:
    return {
        "model": st.model.label,
        "target": st.target,
        "runs": st.runs,
        "base_seed": st.base_seed,
        "convergence_m": st.convergence(),
        "n_post_at_convergence": st.n_post_at_convergence(),
        "median_convergence_step": st.median_convergence_step(),
        "degenerate_runs": st.degenerate_runs,
        "reduced_runs": st.runs < REFERENCE_RUNS,
    }


def cmd_ensemble(cfg: RunConfig, versus: Optional[str] = None, n_jobs=None) -> dict:
    from .report import plot_ensembles, write_json

    _require_time_model(cfg)
    out = _outdir(cfg)
    models = [cfg.model] + ([ModelKind.from_value(versus)] if versus else [])
    stats = []
    for model in models:
        st = ensemble_stats(cfg.params, model, cfg.target, cfg.runs, cfg.seed, n_jobs=n_jobs)
        st.to_csv(out / f"ensemble_{model.label}.csv")
        stats.append(st)
    summary = {"config": cfg.to_dict(), "ensembles": [_ensemble_summary(s) for s in stats]}
    if versus:
        ratio, ma, mb = postselection_ratio(stats[0], stats[1])
        summary["n_post_ratio"] = {"ratio": ratio, "m_first": ma, "m_second": mb}
    write_json(out / "ensemble.json", summary)
    write_json(out / "config.json", cfg.to_dict())
    if cfg.plots:
        colors = ("tab:red", "tab:blue")
        plot_ensembles(
            [(s, s.model.label, c) for s, c in zip(stats, colors)], out / "ensemble.svg", f"omega_{cfg.target}"
        )
    for st in stats:
        _check_flat([st.degenerate_runs], cfg, st.model, cfg.target, f"ensemble {st.model.label}")
    return summary


def cmd_table1(cfg: RunConfig) -> dict:
    from .report import write_json

    out = _outdir(cfg)
    table = build_table1(cfg.params.epsilon)
    (out / "table1.txt").write_text(table.render())
    table.to_csv(out / "table1.csv")
    write_json(out / "table1.json", {"config": cfg.to_dict(), **table.to_json()})
    write_json(out / "config.json", cfg.to_dict())
    sys.stdout.write(table.render())
    return table.to_json()


def cmd_oracle_verify(cfg: RunConfig) -> dict:
    from .report import write_json

    out = _outdir(cfg)
    report = oracle_report(cfg.params.with_(eta_present=True, third_order=False))
    build_network(cfg.params).write_json(out / "network.json")
    write_json(out / "oracle.json", {"config": cfg.to_dict(), **report})
    write_json(out / "config.json", cfg.to_dict())
    for r in report["expansions"]:
        mark = "ok  " if r["passed"] else "FAIL"
        slope = "exact" if r["slope"] is None else f"{r['slope']:.3f}"
        sys.stdout.write(f"{mark} {r['formula_id']}: slope {slope} (need {r['order'] - 0.2:g})\n")
    if not report["passed"]:
        raise ContractFailure("oracle verification failed")
    return report


def cmd_figures(cfg: RunConfig, n_jobs=None) -> dict:
    """Counts, traces, ensembles, table, and oracle report in one directory."""
    from .report import plot_counts, plot_ensembles, plot_traces, write_json
    out = _outdir(cfg)
    plots = cfg.plots
    summary = {"config": cfg.to_dict(), "reduced_runs": cfg.runs < REFERENCE_RUNS}
    data = {}
    for tag, model in (("fig2", ModelKind.ba()), ("fig3", ModelKind.localized_l1()), ("fig5", ModelKind.localized_l4())):
        series = sample_counts(cfg.params, model, cfg.seed)
        series.to_csv(out / f"{tag}a_counts.csv")
        data[model.kind] = series
        if plots:
            plot_counts(series, out / f"{tag}a_counts.svg")
    traces = {}
    for kind, target in (("ba", 1), ("ba", 4), ("localized_l1", 1), ("localized_l4", 4)):
        tr = estimation_trace(data[kind], target)
        traces[(kind, target)] = tr
        tr.to_csv(out / f"trace_{kind}_omega{target}.csv")
        _check_flat(tr.degenerate, cfg, data[kind].model, target, f"trace {kind}")
        summary[f"convergence_{kind}_omega{target}"] = convergence_step(tr)
    if plots:
        plot_traces(
            [(traces[("ba", 1)], "omega_1", "tab:red"), (traces[("ba", 4)], "omega_4", "tab:green")],
            out / "fig2b_trace.svg", "ba",
        )
        plot_traces([(traces[("localized_l1", 1)], "omega_1", "tab:red")], out / "fig3b_trace.svg", "localized_l1")
        plot_traces([(traces[("localized_l4", 4)], "omega_4", "tab:green")], out / "fig5b_trace.svg", "localized_l4")
    for tag, target, other in (("fig4", 1, ModelKind.localized_l1()), ("fig6", 4, ModelKind.localized_l4())):
        pair = [
            ensemble_stats(cfg.params, m, target, cfg.runs, cfg.seed, n_jobs=n_jobs)
            for m in (ModelKind.ba(), other)
        ]
        for st in pair:
            st.to_csv(out / f"{tag}_ensemble_{st.model.label}.csv")
            _check_flat([st.degenerate_runs], cfg, st.model, target, f"ensemble {st.model.label}")
        ratio, ma, mb = postselection_ratio(*pair)
        summary[tag] = {
            "ensembles": [_ensemble_summary(s) for s in pair],
            "n_post_ratio": {"ratio": ratio, "m_first": ma, "m_second": mb},
        }
        if plots:
            plot_ensembles(
                [(pair[0], "ba", "tab:red"), (pair[1], other.label, "tab:blue")], out / f"{tag}_ensemble.svg",
                f"omega_{target}",
            )
    table = build_table1(cfg.params.epsilon)
    (out / "table1.txt").write_text(table.render())
    table.to_csv(out / "table1.csv")
    write_json(out / "table1.json", table.to_json())
    report = oracle_report(cfg.params.with_(eta_present=True, third_order=False))
    write_json(out / "oracle.json", report)
    summary["oracle_passed"] = report["passed"]
    write_json(out / "summary.json", summary)
    write_json(out / "config.json", cfg.to_dict())
    if not report["passed"]:
        raise ContractFailure("oracle verification failed")
    return summary


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        parser.error(str(exc))
    except OSError as exc:
        sys.stderr.write(f"error: cannot read config {args.config}: {exc}\n")
        return EXIT_IO
    if args.command == "figures" and args.plots is None:
        cfg = replace(cfg, plots=True)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ClampWarning)
        try:
            if args.command == "simulate":
                cmd_simulate(cfg)
            elif args.command == "estimate":
                cmd_estimate(cfg)
            elif args.command == "ensemble":
                cmd_ensemble(cfg, args.versus, args.jobs)
            elif args.command == "table1":
                cmd_table1(cfg)
            elif args.command == "oracle-verify":
                cmd_oracle_verify(cfg)
            else:
                cmd_figures(cfg, args.jobs)
        except ConfigError as exc:
            parser.error(str(exc))
        except ContractFailure as exc:
            sys.stderr.write(f"contract failure: {exc}\n")
            return EXIT_CONTRACT
        except OSError as exc:
            name = getattr(exc, "filename", None) or cfg.out
            sys.stderr.write(f"error: I/O failure at {name}: {exc.strerror or exc}\n")
            return EXIT_IO
    clamps = [w for w in caught if issubclass(w.category, ClampWarning)]
    for w in caught:
        if not issubclass(w.category, ClampWarning):
            warnings.showwarning(w.message, w.category, w.filename, w.lineno)
    if clamps:
        sys.stderr.write(f"contract failure: {len(clamps)} probability clamp warning(s): {clamps[0].message}\n")
        return EXIT_CONTRACT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
