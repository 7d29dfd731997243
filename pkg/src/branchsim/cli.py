"""Reproducible experiment runner.

Subcommands: ``bootstrap`` (pool generation), ``naive`` (exact tree Monte
Carlo), ``compare`` (pool ECDFs and tail curves against a naive reference,
with distance table), ``estimate`` (replicated plug-in estimation) and
``check`` (convergence-condition report only).

Runs are described by flat ``key = value`` configs and/or named presets;
the seed is part of the configuration and every output file embeds the
model hash and run geometry, so re-running a configuration reproduces the
outputs byte for byte.  Elapsed time is printed but deliberately kept out
of the summary file.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import reporting, rng as rngmod
from .asymptotics import TailAsymptotic, g_k, tail_coefficient
from .bootstrap import run_bootstrap
from .config import (
    COMMANDS,
    ConfigError,
    ExperimentConfig,
    PRESETS,
    RawValue,
    build_experiment_config,
    load_config_file,
    preset_raw,
)
from .exact import (
    BudgetExceededError,
    expected_node_count,
    simulate_r_batch,
    simulate_w_batch,
)
from .metrics import EmpiricalDistribution, HFunction, d1_empirical, estimate_h, theorem_bound
from .model import (
    DRAW_COUNTER,
    MomentReport,
    UnsupportedMomentError,
    check_conditions,
    q_moment,
    rho,
)

_BUDGET_WARN_FRACTION = 0.5


@dataclass
class RunSummary:
    """What one command did: draw counters, outputs, condition report."""

    vector_draws: int = 0
    q_draws: int = 0
    elapsed: float = 0.0
    outputs: list[Path] = field(default_factory=list)
    condition_report: MomentReport | None = None
    warnings: list[str] = field(default_factory=list)
    entries: dict = field(default_factory=dict)


def _base_meta(cfg: ExperimentConfig, **extra) -> dict:
    meta = {
        "model": reporting.model_hash(cfg.model),
        "seed": cfg.seed,
        "k": cfg.k,
        "m": cfg.m,
    }
    meta.update(extra)
    return meta


def _condition_entries(report: MomentReport) -> dict:
    entries = {
        "condition_beta": report.beta,
        "condition_case": report.case,
        "rho_1": report.rho_1,
        "rho_beta": report.rho_beta,
        "q_mean": report.q_mean,
        "q_abs_moment": report.q_abs_moment,
    }
    if report.reason:
        entries["condition_reason"] = report.reason
    return entries


def _check_model(cfg: ExperimentConfig, summary: RunSummary) -> MomentReport:
    report = check_conditions(cfg.model, cfg.beta)
    summary.condition_report = report
    if report.case == "fail":
        summary.warnings.append(
            f"convergence not guaranteed (beta={cfg.beta:g}): "
            f"{report.reason or 'conditions not met'}"
        )
    return report


def _enforce_budget(cfg: ExperimentConfig, reps: int, summary: RunSummary) -> float:
    try:
        per_sample = expected_node_count(cfg.model, cfg.k)
    except UnsupportedMomentError as exc:
        raise BudgetExceededError(
            f"expected cost per exact sample is infinite ({exc}); "
            f"the naive method is not usable for this model"
        ) from exc
    expected = per_sample * reps
    if expected > cfg.budget:
        raise BudgetExceededError(
            f"expected exact-simulation cost {expected:.6g} vector draws "
            f"exceeds the budget of {cfg.budget:.6g}; raise 'budget' or "
            f"reduce k/reps"
        )
    if expected > _BUDGET_WARN_FRACTION * cfg.budget:
        summary.warnings.append(
            f"expected exact-simulation cost {expected:.6g} vector draws "
            f"is above {_BUDGET_WARN_FRACTION:.0%} of the budget "
            f"{cfg.budget:.6g}"
        )
    return expected


def _replicate_seeds(seed: int, reps: int) -> list[int]:
    # A single replicate keeps the experiment seed itself; replicate studies
    # derive one independent child seed per replicate.
    if reps == 1:
        return [seed]
    return [rngmod.derive_seed(seed, rep) for rep in range(reps)]


def _exact_values(cfg: ExperimentConfig, reps: int, seed: int):
    if cfg.model.variant == "homogeneous":
        return simulate_w_batch(cfg.model, cfg.k, reps, seed)
    return simulate_r_batch(cfg.model, cfg.k, reps, seed)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_bootstrap(cfg: ExperimentConfig) -> RunSummary:
    """Generate bootstrap pools and write the final pool + its ECDF."""
    summary = RunSummary()
    t0 = time.perf_counter()
    before_v, before_q = DRAW_COUNTER.snapshot()
    _check_model(cfg, summary)
    out = cfg.out
    first_pool = None
    for rep, rep_seed in enumerate(_replicate_seeds(cfg.seed, cfg.reps)):
        suffix = "" if cfg.reps == 1 else f"_rep{rep:03d}"
        pool = run_bootstrap(cfg.model, cfg.k, cfg.m, rep_seed, keep_levels=False)[-1]
        if first_pool is None:
            first_pool = pool
        meta = _base_meta(cfg, level=pool.level, rep_seed=rep_seed)
        summary.outputs.append(
            reporting.write_pool_csv(out / f"pool{suffix}.csv", pool.values, meta)
        )
        summary.outputs.append(
            reporting.write_ecdf_csv(
                out / f"ecdf{suffix}.csv", EmpiricalDistribution(pool.values), meta
            )
        )
    if cfg.figures:
        summary.outputs.append(
            reporting.ecdf_figure(
                out / "fig_ecdf.png",
                [(f"pool (m={cfg.m}, depth {cfg.k})",
                  EmpiricalDistribution(first_pool.values))],
            )
        )
    after_v, after_q = DRAW_COUNTER.snapshot()
    summary.vector_draws = after_v - before_v
    summary.q_draws = after_q - before_q
    summary.entries["pool_mean"] = first_pool.mean()
    _finish(cfg, "bootstrap", summary, t0)
    return summary


def cmd_naive(cfg: ExperimentConfig) -> RunSummary:
    """Draw exact tree samples (the reps-replicate naive method)."""
    summary = RunSummary()
    t0 = time.perf_counter()
    before_v, before_q = DRAW_COUNTER.snapshot()
    _check_model(cfg, summary)
    expected = _enforce_budget(cfg, cfg.reps, summary)
    batch = _exact_values(cfg, cfg.reps, cfg.seed)
    meta = _base_meta(cfg, reps=cfg.reps)
    summary.outputs.append(
        reporting.write_runs_csv(cfg.out / "runs.csv", batch.values, batch.nodes, meta)
    )
    emp = EmpiricalDistribution(batch.values)
    summary.outputs.append(reporting.write_ecdf_csv(cfg.out / "ecdf.csv", emp, meta))
    if cfg.figures:
        summary.outputs.append(
            reporting.ecdf_figure(
                cfg.out / "fig_ecdf.png",
                [(f"exact ({cfg.reps} samples, depth {cfg.k})", emp)],
            )
        )
    after_v, after_q = DRAW_COUNTER.snapshot()
    summary.vector_draws = after_v - before_v
    summary.q_draws = after_q - before_q
    summary.entries.update(
        {
            "expected_vector_draws": expected,
            "nodes_visited_total": batch.total_nodes,
            "sample_mean": float(batch.values.mean()),
        }
    )
    _finish(cfg, "naive", summary, t0)
    return summary


def _gk_overlays(cfg: ExperimentConfig, xs: np.ndarray, summary: RunSummary):
    """Tail-curve overlays: published constants verbatim plus recomputations.

    Returns ``[(label, filename-stem, coefficient)]``; the direct evaluation
    of the published inputs and the fully model-derived variant are both
    reported without asserting which is right.
    """
    gk = cfg.gk
    needed = {"alpha", "rho1", "rho_alpha", "ec", "eq"}
    if not needed.issubset(gk):
        return []
    overlays = []
    recomputed = tail_coefficient(
        gk["ec"], gk["eq"], gk["rho1"], gk["rho_alpha"], gk["alpha"], cfg.k
    )
    summary.entries["gk_coefficient_recomputed"] = recomputed
    overlays.append(("recomputed", recomputed))
    if "paper_coefficient" in gk:
        summary.entries["gk_coefficient_paper"] = gk["paper_coefficient"]
        overlays.append(("paper", gk["paper_coefficient"]))
    try:
        ec = cfg.model.c.mean()
        eq = q_moment(cfg.model, 1.0, absolute=False)
        r1 = rho(cfg.model, 1.0)
        ra = rho(cfg.model, gk["alpha"])
        derived = tail_coefficient(ec, eq, r1, ra, gk["alpha"], cfg.k)
        summary.entries["gk_coefficient_model_derived"] = derived
    except (UnsupportedMomentError, ValueError):
        pass
    return overlays


def cmd_compare(cfg: ExperimentConfig) -> RunSummary:
    """Pools at several sizes against an exact reference: ECDFs, distance
    table, and (for heavy-tail runs) tail curves with asymptotic overlays."""
    if not cfg.m_list:
        raise ConfigError("compare requires m_list", key="m_list")
    summary = RunSummary()
    t0 = time.perf_counter()
    before_v, before_q = DRAW_COUNTER.snapshot()
    _check_model(cfg, summary)
    _enforce_budget(cfg, cfg.reference_reps, summary)
    out = cfg.out

    ref = _exact_values(cfg, cfg.reference_reps, cfg.seed)
    ref_emp = EmpiricalDistribution(ref.values)
    ref_meta = _base_meta(cfg, m=cfg.reference_reps, method="naive")
    summary.outputs.append(
        reporting.write_ecdf_csv(out / "ecdf_naive.csv", ref_emp, ref_meta)
    )

    try:
        rho_1 = rho(cfg.model, 1.0)
    except UnsupportedMomentError:
        rho_1 = None
    curves = [(f"exact ({cfg.reference_reps})", ref_emp)]
    pool_emps: list[tuple[int, EmpiricalDistribution]] = []
    rows = []
    for m in cfg.m_list:
        pool = run_bootstrap(cfg.model, cfg.k, m, cfg.seed, keep_levels=False)[-1]
        emp = EmpiricalDistribution(pool.values)
        pool_emps.append((m, emp))
        meta = _base_meta(cfg, m=m, method="bootstrap")
        summary.outputs.append(
            reporting.write_ecdf_csv(out / f"ecdf_bootstrap_m{m}.csv", emp, meta)
        )
        curves.append((f"pool (m={m})", emp))
        d1 = d1_empirical(emp, ref_emp)
        bound = None
        if cfg.bound_alpha is not None and cfg.bound_const is not None and rho_1 is not None:
            bound = theorem_bound(cfg.k, m, cfg.bound_alpha, cfg.bound_const, rho_1)
        rows.append((m, d1, bound))
        summary.entries[f"d1_m{m}"] = d1
    summary.outputs.append(
        reporting.write_distance_csv(out / "distances.csv", rows, _base_meta(cfg))
    )
    if cfg.figures:
        summary.outputs.append(reporting.ecdf_figure(out / "fig_ecdf.png", curves))

    if cfg.tail_x_max is not None:
        xs = np.arange(0, cfg.tail_x_max + 1, dtype=float)
        tail_curves = []
        naive_tail = 1.0 - ref_emp.cdf(xs)
        summary.outputs.append(
            reporting.write_tail_csv(out / "tail_naive.csv", xs, naive_tail, ref_meta)
        )
        tail_curves.append((f"exact ({cfg.reference_reps})", xs, naive_tail))
        for m, emp in pool_emps:
            boot_tail = 1.0 - emp.cdf(xs)
            meta = _base_meta(cfg, m=m, method="bootstrap")
            summary.outputs.append(
                reporting.write_tail_csv(out / f"tail_bootstrap_m{m}.csv", xs, boot_tail, meta)
            )
            tail_curves.append((f"pool (m={m})", xs, boot_tail))
        overlay_curves = []
        for label, coefficient in _gk_overlays(cfg, xs, summary):
            tail = TailAsymptotic(cfg.gk["alpha"], coefficient, cfg.k)
            values = g_k(xs, tail, cfg.model.n)
            meta = _base_meta(cfg, coefficient=coefficient, variant=label)
            summary.outputs.append(
                reporting.write_tail_csv(
                    out / f"tail_gk_{label}.csv", xs, values, meta, column="g_k"
                )
            )
            overlay_curves.append((f"tail curve ({label})", xs, values))
        if cfg.figures:
            summary.outputs.append(
                reporting.tail_figure(out / "fig_tail.png", tail_curves, overlay_curves)
            )

    after_v, after_q = DRAW_COUNTER.snapshot()
    summary.vector_draws = after_v - before_v
    summary.q_draws = after_q - before_q
    summary.entries["reference_nodes_visited"] = ref.total_nodes
    _finish(cfg, "compare", summary, t0)
    return summary


def cmd_estimate(cfg: ExperimentConfig) -> RunSummary:
    """Replicated plug-in estimation of ``E[h(value)]`` from bootstrap pools."""
    try:
        h = HFunction.parse(cfg.h)
    except ValueError as exc:
        raise ConfigError(str(exc), key="h") from None
    summary = RunSummary()
    t0 = time.perf_counter()
    before_v, before_q = DRAW_COUNTER.snapshot()
    _check_model(cfg, summary)
    estimates = []
    for rep_seed in _replicate_seeds(cfg.seed, cfg.reps):
        pool = run_bootstrap(cfg.model, cfg.k, cfg.m, rep_seed, keep_levels=False)[-1]
        estimates.append(estimate_h(pool, h))
    estimates = np.asarray(estimates)
    mean = float(estimates.mean())
    stderr = (
        float(estimates.std(ddof=1) / np.sqrt(cfg.reps)) if cfg.reps > 1 else 0.0
    )
    oracle = None
    if cfg.reference is not None:
        ref_values = reporting.read_sample_csv(cfg.reference)
        oracle = float(h.apply(ref_values).mean())

    meta = _base_meta(cfg, reps=cfg.reps, h=h.label())
    lines = reporting.header_lines(meta)
    lines.append("rep,estimate")
    lines.extend(f"{i},{reporting.fmt(e)}" for i, e in enumerate(estimates))
    path = cfg.out / "estimates.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    summary.outputs.append(path)
    if cfg.figures:
        summary.outputs.append(
            reporting.estimate_figure(cfg.out / "fig_estimates.png", estimates, mean, oracle)
        )

    after_v, after_q = DRAW_COUNTER.snapshot()
    summary.vector_draws = after_v - before_v
    summary.q_draws = after_q - before_q
    summary.entries.update(
        {
            "h": h.label(),
            "h_within_guarantee": h.within_guarantee,
            "estimate_mean": mean,
            "estimate_stderr": stderr,
        }
    )
    if not h.within_guarantee:
        summary.warnings.append(
            f"h = {h.label()} is outside the consistency guarantee "
            f"(discontinuous or superlinear); reported for diagnostics only"
        )
    if oracle is not None:
        summary.entries["oracle"] = oracle
        summary.entries["abs_error"] = abs(mean - oracle)
    _finish(cfg, "estimate", summary, t0)
    return summary


def cmd_check(cfg: ExperimentConfig) -> RunSummary:
    """Run the convergence-condition check and report it."""
    summary = RunSummary()
    t0 = time.perf_counter()
    report = _check_model(cfg, summary)
    summary.entries.update(_condition_entries(report))
    _finish(cfg, "check", summary, t0, write_files=False)
    return summary


def _finish(
    cfg: ExperimentConfig,
    command: str,
    summary: RunSummary,
    t0: float,
    write_files: bool = True,
) -> None:
    summary.elapsed = time.perf_counter() - t0
    if write_files:
        entries = {
            "command": command,
            "model_spec": cfg.model.canonical(),
            "reps": cfg.reps,
            "vector_draws": summary.vector_draws,
            "q_draws": summary.q_draws,
        }
        if cfg.preset:
            entries["preset"] = cfg.preset
        if summary.condition_report is not None:
            entries.update(_condition_entries(summary.condition_report))
        entries.update(summary.entries)
        for i, w in enumerate(summary.warnings):
            entries[f"warning_{i}"] = w
        entries["outputs"] = ",".join(p.name for p in summary.outputs)
        summary.outputs.append(
            reporting.write_summary(cfg.out / "summary.txt", _base_meta(cfg), entries)
        )


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

_DISPATCH = {
    "bootstrap": cmd_bootstrap,
    "naive": cmd_naive,
    "compare": cmd_compare,
    "estimate": cmd_estimate,
    "check": cmd_check,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="branchsim",
        description="Reproducible simulation of branching linear recursions",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "bootstrap": "generate bootstrap sample pools",
        "naive": "exact tree Monte Carlo samples",
        "compare": "bootstrap pools vs an exact reference",
        "estimate": "replicated plug-in estimation of E[h(value)]",
        "check": "convergence-condition report only",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", type=Path, help="path to a key = value config file")
        p.add_argument(
            "--preset", choices=sorted(PRESETS), help="start from a built-in preset"
        )
        p.add_argument("--seed", type=int, help="override the configured seed")
        p.add_argument("--out", type=Path, help="output directory")
        p.add_argument(
            "--no-figures", action="store_true", help="skip figure rendering"
        )
    return parser


def load_run_config(args: argparse.Namespace) -> ExperimentConfig:
    raw: dict[str, RawValue] = {}
    if args.preset:
        raw.update(preset_raw(args.preset))
    if args.config:
        raw.update(load_config_file(args.config))
    if not raw:
        raise ConfigError("provide --preset and/or --config")
    if args.seed is not None:
        raw["seed"] = RawValue(str(args.seed), source="<cli>")
    if args.out is not None:
        raw["out"] = RawValue(str(args.out), source="<cli>")
    if args.no_figures:
        raw["figures"] = RawValue("false", source="<cli>")
    return build_experiment_config(raw, args.command, preset=args.preset)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_run_config(args)
        summary = _DISPATCH[args.command](cfg)
    except (ConfigError, BudgetExceededError, UnsupportedMomentError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for warning in summary.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    report = summary.condition_report
    if report is not None:
        print(f"condition_case = {report.case}")
    for key, value in summary.entries.items():
        print(f"{key} = {reporting.fmt(value)}")
    print(f"vector_draws = {summary.vector_draws}")
    print(f"q_draws = {summary.q_draws}")
    print(f"elapsed_seconds = {summary.elapsed:.3f}")
    for path in summary.outputs:
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
