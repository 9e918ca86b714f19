"""Figure rendering from the documented nelson-lab CSV schemas.

Three figure kinds:

- sweep-loglog: convergence sweep CSV (lambda,t,err_wv,err_zv,...); log-log
  error curves versus coupling, fitted slopes annotated, plus a reference
  guide line of configurable slope.
- identity-residual: two-column CSV (n_max,residual); residual of the
  dressing identity versus the occupation cap on a log scale.
- observables: observables CSV (lambda,t,mode,abs_err); per-mode first
  moment errors versus coupling on a log-log scale.

Consumes only the CSV columns documented by the primary package; never
reads its internals. Output is deterministic: fixed figure size, no
timestamps embedded in the image.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

KINDS = ("sweep-loglog", "identity-residual", "observables")

REQUIRED_COLUMNS = {
    "sweep-loglog": ("lambda", "t", "err_wv", "err_zv"),
    "identity-residual": ("n_max", "residual"),
    "observables": ("lambda", "t", "mode", "abs_err"),
}

FIGSIZE = (6.4, 4.8)


class SchemaError(ValueError):
    """The CSV header does not match the documented schema."""


@dataclass
class FigureSpec:
    inputs: list
    output: str
    kind: str
    ref_slope: float = 0.5

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(
                f"kind must be one of {KINDS}, got {self.kind!r}")
        if not self.inputs:
            raise ValueError("at least one input CSV is required")


def read_table(path, kind: str) -> list:
    """Rows of the CSV as dicts, validated against the kind's schema."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in REQUIRED_COLUMNS[kind]:
            if col not in header:
                raise SchemaError(
                    f"{path}: missing column {col!r} "
                    f"(expected {','.join(REQUIRED_COLUMNS[kind])})")
        rows = [{k: row[k] for k in REQUIRED_COLUMNS[kind]}
                for row in reader]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return rows


def fit_slope(lams, errs) -> float:
    """Least-squares slope of log(err) against log(lambda)."""
    return float(np.polyfit(np.log(lams), np.log(errs), 1)[0])


def _sweep_series(rows):
    """Per-coupling maxima over time for both error families."""
    by_lam = {}
    for row in rows:
        lam = float(row["lambda"])
        entry = by_lam.setdefault(lam, {"err_wv": 0.0, "err_zv": 0.0})
        entry["err_wv"] = max(entry["err_wv"], float(row["err_wv"]))
        entry["err_zv"] = max(entry["err_zv"], float(row["err_zv"]))
    lams = sorted(by_lam)
    wv = [by_lam[l]["err_wv"] for l in lams]
    zv = [by_lam[l]["err_zv"] for l in lams]
    return np.array(lams), np.array(wv), np.array(zv)


def render(spec: FigureSpec) -> dict:
    """Render the figure; returns the annotation values (fitted slopes).

    All inputs are parsed and validated before anything is written, so a
    bad input never leaves a partial file behind.
    """
    tables = [read_table(p, spec.kind) for p in spec.inputs]
    fig, ax = plt.subplots(figsize=FIGSIZE)
    info = {}

    if spec.kind == "sweep-loglog":
        slopes = []
        for path, rows in zip(spec.inputs, tables):
            lams, wv, zv = _sweep_series(rows)
            label = Path(path).stem
            slope_wv = fit_slope(lams, wv)
            slope_zv = fit_slope(lams, zv)
            slopes.append((label, slope_wv, slope_zv))
            ax.loglog(lams, wv, "o-",
                      label=f"{label} coherent frame (slope {slope_wv:.3f})")
            ax.loglog(lams, zv, "s--",
                      label=f"{label} dressed frame (slope {slope_zv:.3f})")
        lams0, wv0, _ = _sweep_series(tables[0])
        guide = wv0[-1] * (lams0 / lams0[-1]) ** spec.ref_slope
        ax.loglog(lams0, guide, "k:",
                  label=f"reference slope {spec.ref_slope:g}")
        ax.set_xlabel("coupling")
        ax.set_ylabel("max over t of propagator error")
        info["slopes"] = slopes
        info["slope_wv"] = slopes[0][1]
        info["slope_zv"] = slopes[0][2]

    elif spec.kind == "identity-residual":
        for path, rows in zip(spec.inputs, tables):
            pairs = sorted((int(float(r["n_max"])), float(r["residual"]))
                           for r in rows)
            caps = [p[0] for p in pairs]
            res = [p[1] for p in pairs]
            ax.semilogy(caps, res, "o-", label=Path(path).stem)
            info.setdefault("residuals", []).append(pairs)
        ax.set_xlabel("occupation cap")
        ax.set_ylabel("identity residual")

    else:  # observables
        for path, rows in zip(spec.inputs, tables):
            by_mode = {}
            for row in rows:
                if float(row["t"]) == 0.0:
                    continue
                mode = int(float(row["mode"]))
                lam = float(row["lambda"])
                cur = by_mode.setdefault(mode, {})
                cur[lam] = max(cur.get(lam, 0.0), float(row["abs_err"]))
            for mode in sorted(by_mode):
                lams = sorted(by_mode[mode])
                errs = [by_mode[mode][l] for l in lams]
                ax.loglog(lams, errs, "o-",
                          label=f"{Path(path).stem} mode {mode}")
            info.setdefault("modes", []).append(sorted(by_mode))
        ax.set_xlabel("coupling")
        ax.set_ylabel("max over t > 0 of first-moment error")

    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.savefig(spec.output, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return info
