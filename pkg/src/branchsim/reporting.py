"""Delimited output and figure rendering.

Every data file starts with a ``# key = value`` comment block carrying the
model hash, seed and run geometry, so any output can be traced back to the
exact run that produced it.  Numbers are written with 17 significant digits
(full float64 round-trip), LF line endings, locale-independent - re-running
a configuration reproduces the files byte for byte.

Figures are a convenience rendering of the same data (the CSVs remain the
numerical contract); PNG metadata is stripped so they are reproducible too.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np

from .metrics import EmpiricalDistribution
from .model import BranchingVectorSpec


def fmt(value) -> str:
    """Canonical text for one field: 17 significant digits for floats."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def model_hash(spec: BranchingVectorSpec) -> str:
    return hashlib.sha256(spec.canonical().encode()).hexdigest()[:12]


def header_lines(meta: dict) -> list[str]:
    return [f"# {key} = {fmt(value)}" for key, value in meta.items()]


def _write(path: Path, lines: list[str]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def write_pool_csv(path: Path, values: np.ndarray, meta: dict) -> Path:
    lines = header_lines(meta)
    lines.extend(fmt(float(v)) for v in values)
    return _write(path, lines)


def write_runs_csv(
    path: Path, values: np.ndarray, nodes: np.ndarray, meta: dict
) -> Path:
    lines = header_lines(meta)
    lines.append("r_k,nodes_visited,truncated")
    lines.extend(
        f"{fmt(float(v))},{int(n)},false" for v, n in zip(values, nodes)
    )
    return _write(path, lines)


def write_ecdf_csv(path: Path, emp: EmpiricalDistribution, meta: dict) -> Path:
    xs, cdf = emp.distinct_points()
    lines = header_lines(meta)
    lines.append("x,cdf")
    lines.extend(f"{fmt(float(x))},{fmt(float(p))}" for x, p in zip(xs, cdf))
    return _write(path, lines)


def write_tail_csv(
    path: Path, xs: np.ndarray, probs: np.ndarray, meta: dict, column: str = "tail"
) -> Path:
    lines = header_lines(meta)
    lines.append(f"x,{column}")
    lines.extend(f"{fmt(float(x))},{fmt(float(p))}" for x, p in zip(xs, probs))
    return _write(path, lines)


def write_distance_csv(path: Path, rows: list[tuple], meta: dict) -> Path:
    """Rows of ``(m, d1, bound-or-None)``."""
    lines = header_lines(meta)
    lines.append("m,d1,bound")
    for m, d1, bound in rows:
        tail = "" if bound is None else fmt(float(bound))
        lines.append(f"{int(m)},{fmt(float(d1))},{tail}")
    return _write(path, lines)


def write_summary(path: Path, meta: dict, entries: dict) -> Path:
    lines = header_lines(meta)
    lines.extend(f"{key} = {fmt(value)}" for key, value in entries.items())
    return _write(path, lines)


def read_sample_csv(path: Path) -> np.ndarray:
    """Read a single-column sample file, ignoring comments and headers."""
    values = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            field = line.split(",")[0]
            try:
                values.append(float(field))
            except ValueError:
                continue  # column header
    if not values:
        raise ValueError(f"no numeric values found in {path}")
    return np.asarray(values)


# ---------------------------------------------------------------------------
# Figures
# ---------------------------------------------------------------------------

_PNG_META = {"Software": None}  # drop the version string: stable bytes


def _new_axes():
    import matplotlib

    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    ax.grid(True, alpha=0.3)
    return plt, fig, ax


def ecdf_figure(path: Path, curves: list[tuple[str, EmpiricalDistribution]]) -> Path:
    """Step plot of one or more ECDFs."""
    plt, fig, ax = _new_axes()
    for label, emp in curves:
        xs, cdf = emp.distinct_points()
        ax.step(xs, cdf, where="post", label=label, linewidth=1.2)
    ax.set_xlabel("x")
    ax.set_ylabel("cumulative probability")
    ax.legend(loc="lower right")
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150, metadata=_PNG_META)
    plt.close(fig)
    return path


def tail_figure(
    path: Path,
    curves: list[tuple[str, np.ndarray, np.ndarray]],
    overlays: list[tuple[str, np.ndarray, np.ndarray]] = (),
) -> Path:
    """Log-scale complementary-CDF plot with optional reference overlays."""
    plt, fig, ax = _new_axes()
    for label, xs, probs in curves:
        mask = probs > 0
        ax.plot(xs[mask], probs[mask], drawstyle="steps-post",
                label=label, linewidth=1.2)
    for label, xs, probs in overlays:
        mask = probs > 0
        ax.plot(xs[mask], probs[mask], linestyle="--", label=label, linewidth=1.0)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("x")
    ax.set_ylabel("tail probability")
    ax.legend(loc="lower left")
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150, metadata=_PNG_META)
    plt.close(fig)
    return path


def estimate_figure(
    path: Path, estimates: np.ndarray, mean: float, oracle: float | None
) -> Path:
    """Per-replicate estimates with their mean and optional oracle line."""
    plt, fig, ax = _new_axes()
    reps = np.arange(estimates.size)
    ax.plot(reps, estimates, "o", markersize=4, label="replicate estimate")
    ax.axhline(mean, color="C1", linewidth=1.2, label="mean")
    if oracle is not None:
        ax.axhline(oracle, color="C2", linestyle="--", linewidth=1.2,
                   label="reference")
    ax.set_xlabel("replicate")
    ax.set_ylabel("estimate")
    ax.legend(loc="best")
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150, metadata=_PNG_META)
    plt.close(fig)
    return path
