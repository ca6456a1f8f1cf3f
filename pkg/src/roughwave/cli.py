"""Command-line driver: validate a JSON config, run selected checks, and
emit deterministic JSON/CSV reports plus optional SVG plots.

Subcommands: run, describe, report.  Exit codes: 0 all selected checks
pass, 1 a check failed, 2 config/schema error, 3 compute failure.
Timestamps live in a separate metadata file so reports are byte-identical
across reruns of the same config and seed.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
import traceback
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .dyadic import standard_lattices
from .grid import Domain
from .kernel import RoughKernel
from .sparse import SparseBuildParams
from .verify import (
    CHECKS,
    FitReport,
    check_coifman_fefferman,
    check_commutator,
    check_domination,
    check_grand_maximal_endpoint,
    check_mollification_decay,
    check_refinement,
    check_sharp_weak_type,
    check_weak_type_tstar,
    make_corpus,
)
from .weights import parse_weight

SCHEMA_VERSION = 1

_CHECK_PARAM_KEYS = {
    "domination": {"r_list", "eta_target", "threshold_multiplier", "max_depth"},
    "weak_type_tstar": {"rel_alphas", "weights"},
    "grand_maximal_endpoint": {"lam_list", "rel_alphas"},
    "sharp_weak_type": {"p_list", "rel_alphas"},
    "coifman_fefferman": {"p_list", "weights"},
    "mollification_decay": {"l_list", "m_list", "bank_size"},
    "refinement": {"r_list"},
    "commutator": {"r", "rel_alphas", "weights"},
}

_NONEMPTY_LISTS = {
    "domination": "r_list",
    "refinement": "r_list",
    "sharp_weak_type": "p_list",
    "grand_maximal_endpoint": "lam_list",
    "mollification_decay": "l_list",
}


class ConfigError(ValueError):
    pass


def _expect_keys(obj: dict, allowed: set, required: set, path: str):
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) {sorted(unknown)}")
    missing = required - set(obj)
    if missing:
        raise ConfigError(f"{path}: missing required key(s) {sorted(missing)}")


def validate_config(cfg: dict) -> dict:
    if not isinstance(cfg, dict):
        raise ConfigError("top level: expected an object")
    _expect_keys(
        cfg,
        allowed={"schema_version", "domain", "kernel", "corpus", "checks", "plots"},
        required={"schema_version", "domain", "kernel", "corpus", "checks"},
        path="top level",
    )
    if cfg["schema_version"] != SCHEMA_VERSION:
        raise ConfigError(
            f"schema_version: expected {SCHEMA_VERSION}, got {cfg['schema_version']!r}"
        )
    _expect_keys(
        cfg["domain"],
        allowed={"half_width", "resolution"},
        required={"half_width", "resolution"},
        path="domain",
    )
    kernel = cfg["kernel"]
    if not isinstance(kernel, dict) or not (
        "preset" in kernel or "values" in kernel
    ):
        raise ConfigError("kernel: need 'preset' or 'values'")
    _expect_keys(kernel, allowed={"preset", "values", "angles"}, required=set(), path="kernel")
    _expect_keys(
        cfg["corpus"],
        allowed={"seed", "size", "with_b"},
        required={"seed", "size"},
        path="corpus",
    )
    checks = cfg["checks"]
    if not isinstance(checks, dict) or not checks:
        raise ConfigError("checks: select at least one check")
    for name, params in checks.items():
        if name not in CHECKS:
            raise ConfigError(f"checks.{name}: unknown check")
        if not isinstance(params, dict):
            raise ConfigError(f"checks.{name}: expected an object of parameters")
        allowed = _CHECK_PARAM_KEYS[name]
        unknown = set(params) - allowed
        if unknown:
            raise ConfigError(f"checks.{name}: unknown key(s) {sorted(unknown)}")
        key = _NONEMPTY_LISTS.get(name)
        if key and key in params and not params[key]:
            raise ConfigError(f"checks.{name}.{key}: must be a non-empty list")
    if "commutator" in checks and not cfg["corpus"].get("with_b", False):
        raise ConfigError("checks.commutator: corpus.with_b must be true")
    return cfg


def load_config(path: str | Path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    return validate_config(cfg)


def _canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _execute_check(name: str, params: dict, ctx: dict) -> FitReport:
    corpus = ctx["corpus"]
    kernel = ctx["kernel"]
    lattices = ctx["lattices"]
    if name == "domination":
        bp_kwargs = {}
        if "eta_target" in params:
            bp_kwargs["eta_target"] = params["eta_target"]
        if "threshold_multiplier" in params:
            bp_kwargs["threshold_multiplier"] = params["threshold_multiplier"]
        if "max_depth" in params:
            bp_kwargs["max_depth"] = params["max_depth"]
        return check_domination(
            corpus,
            kernel,
            params.get("r_list", CHECKS[name]["defaults"]["r_list"]),
            lattices,
            build_params=SparseBuildParams(**bp_kwargs) if bp_kwargs else None,
        )
    if name == "weak_type_tstar":
        specs = params.get("weights", ["const:1"])
        rel = tuple(
            params.get("rel_alphas", CHECKS[name]["defaults"]["rel_alphas"])
        )
        merged_items, notes = [], []
        passed = True
        sub_params = {}
        for spec in specs:
            w = parse_weight(spec, ctx["domain"])
            rep = check_weak_type_tstar(
                corpus, kernel, lattices, rel_alphas=rel, weight=w
            )
            for it in rep.items:
                merged_items.append({**it, "name": f"w={spec}:{it['name']}"})
            sub_params[spec] = rep.params
            passed = passed and rep.passed
        ratios = [it["ratio"] for it in merged_items]
        import numpy as _np

        mx = max(ratios) if ratios else 0.0
        med = float(_np.median(ratios)) if ratios else 0.0
        return FitReport(
            check=name,
            params={"weights": list(specs), "per_weight": sub_params},
            items=merged_items,
            max_ratio=mx,
            median_ratio=med,
            passed=passed,
            notes=notes,
        )
    if name == "grand_maximal_endpoint":
        kwargs = {}
        if "lam_list" in params:
            kwargs["lam_list"] = tuple(params["lam_list"])
        if "rel_alphas" in params:
            kwargs["rel_alphas"] = tuple(params["rel_alphas"])
        return check_grand_maximal_endpoint(corpus, kernel, lattices, **kwargs)
    if name == "sharp_weak_type":
        kwargs = {}
        if "p_list" in params:
            kwargs["p_list"] = tuple(params["p_list"])
        if "rel_alphas" in params:
            kwargs["rel_alphas"] = tuple(params["rel_alphas"])
        return check_sharp_weak_type(corpus, kernel, lattices, **kwargs)
    if name == "coifman_fefferman":
        kwargs = {}
        if "p_list" in params:
            kwargs["p_list"] = tuple(params["p_list"])
        if "weights" in params:
            kwargs["weight_specs"] = tuple(params["weights"])
        return check_coifman_fefferman(corpus, kernel, lattices, **kwargs)
    if name == "mollification_decay":
        kwargs = {"seed": ctx["seed"]}
        if "l_list" in params:
            kwargs["l_list"] = tuple(params["l_list"])
        if "m_list" in params:
            kwargs["m_list"] = tuple(params["m_list"])
        if "bank_size" in params:
            kwargs["bank_size"] = params["bank_size"]
        return check_mollification_decay(kernel, ctx["domain"], **kwargs)
    if name == "refinement":
        return check_refinement(
            corpus,
            tuple(params.get("r_list", CHECKS[name]["defaults"]["r_list"])),
            lattices,
        )
    if name == "commutator":
        kwargs = {}
        if "r" in params:
            kwargs["r"] = params["r"]
        if "rel_alphas" in params:
            kwargs["rel_alphas"] = tuple(params["rel_alphas"])
        if "weights" in params:
            kwargs["weight_specs"] = tuple(params["weights"])
        return check_commutator(corpus, kernel, lattices, **kwargs)
    raise ValueError(f"unknown check {name!r}")


def run(config_path: str, out_dir: str, jobs: int = 1, seed: int | None = None,
        plots: bool = True) -> int:
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t_start = time.time()
    try:
        domain = Domain(
            float(cfg["domain"]["half_width"]), int(cfg["domain"]["resolution"])
        )
        kernel = RoughKernel.from_json(cfg["kernel"])
        corpus_seed = int(seed if seed is not None else cfg["corpus"]["seed"])
        corpus = make_corpus(
            domain,
            corpus_seed,
            int(cfg["corpus"]["size"]),
            with_b=bool(cfg["corpus"].get("with_b", False)),
        )
        ctx = {
            "domain": domain,
            "kernel": kernel,
            "corpus": corpus,
            "lattices": standard_lattices(domain),
            "seed": corpus_seed,
        }
        names = sorted(cfg["checks"])
        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                futures = {
                    n: pool.submit(_execute_check, n, cfg["checks"][n], ctx)
                    for n in names
                }
                reports = {n: futures[n].result() for n in names}
        else:
            reports = {n: _execute_check(n, cfg["checks"][n], ctx) for n in names}
    except Exception:
        traceback.print_exc()
        return 3

    all_pass = True
    for n in names:
        rep = reports[n]
        (out / f"{n}.json").write_text(_canonical_json(rep.to_dict()))
        status = "PASS" if rep.passed else "FAIL"
        print(f"[{status}] {n}: max={rep.max_ratio:.4g} median={rep.median_ratio:.4g}"
              + (f" slope={rep.slope:.3f}" if rep.slope is not None else ""))
        all_pass = all_pass and rep.passed
    _write_csv(out / "reports.csv", [reports[n] for n in names])
    (out / "metadata.json").write_text(
        _canonical_json(
            {
                "config": str(config_path),
                "elapsed_seconds": round(time.time() - t_start, 3),
                "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
            }
        )
    )
    if plots and (cfg.get("plots", True)):
        for n in names:
            _plot_report(reports[n].to_dict(), out / f"{n}.svg")
    return 0 if all_pass else 1


def _write_csv(path: Path, reports: list[FitReport]):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["check", "item", "ratio"])
        for rep in reports:
            for it in rep.items:
                writer.writerow([rep.check, it["name"], it.get("ratio")])


def _plot_report(report: dict, path: Path):
    import matplotlib

    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "roughwave"
    import matplotlib.pyplot as plt

    ratios = [it["ratio"] for it in report["items"] if it.get("ratio") is not None]
    if not ratios:
        return
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(range(len(ratios)), ratios, "o", ms=4)
    med = report["median"]
    ax.axhline(med, color="green", lw=1, label="median")
    ax.axhline(3 * med, color="red", lw=1, ls="--", label="3x median")
    if all(r > 0 for r in ratios):
        ax.set_yscale("log")
    ax.set_xlabel("item index")
    ax.set_ylabel("ratio")
    ax.set_title(f"{report['check']} [{'PASS' if report['pass'] else 'FAIL'}]")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, metadata={"Date": None})
    plt.close(fig)


def describe() -> str:
    """Stable-order listing of every check, its anchor, and its defaults."""
    lines = ["roughwave verification checks", "=" * 30]
    for name in CHECKS:
        entry = CHECKS[name]
        lines.append(f"{name}")
        lines.append(f"    bound: {entry['anchor']}")
        lines.append(f"    defaults: {json.dumps(entry['defaults'], sort_keys=True)}")
    return "\n".join(lines)


def report_command(out_dir: str) -> int:
    out = Path(out_dir)
    found = sorted(p for p in out.glob("*.json") if p.stem in CHECKS)
    if not found:
        print(f"no check reports found in {out}", file=sys.stderr)
        return 2
    for path in found:
        with open(path) as fh:
            _plot_report(json.load(fh), path.with_suffix(".svg"))
        print(f"re-rendered {path.with_suffix('.svg')}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="roughwave",
        description="empirical verification harness for rough singular "
        "integral inequalities on a 2-D grid",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run the checks selected by a config")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", default="reports")
    p_run.add_argument("--jobs", type=int, default=None)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--no-plots", action="store_true")
    sub.add_parser("describe", help="list all checks and their default sweeps")
    p_rep = sub.add_parser("report", help="re-render plots from existing reports")
    p_rep.add_argument("--out", default="reports")
    args = parser.parse_args(argv)
    if args.command == "describe":
        print(describe())
        return 0
    if args.command == "report":
        return report_command(args.out)
    jobs = args.jobs
    if jobs is None:
        jobs = int(os.environ.get("ROUGHWAVE_JOBS", "1"))
    return run(args.config, args.out, jobs=jobs, seed=args.seed,
               plots=not args.no_plots)


if __name__ == "__main__":
    sys.exit(main())
