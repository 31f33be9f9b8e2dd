"""Turn a figure spec plus a simulation CSV log into a PNG.

All validation happens before anything is written, so a failing render
leaves no output file behind. Style state is pinned inside an rc context
so the same CSV and spec produce byte-identical images.
"""

import csv
import json
from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .errors import (EmptyLogError, LogFormatError, MissingColumnError,
                     SidecarError, SpecFormatError)
from .spec import parse_expression

# frozen style so reruns rasterize identically regardless of user rc files
_PINNED_STYLE = {
    "font.family": "DejaVu Sans",
    "font.size": 10.0,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "grid.linewidth": 0.6,
    "legend.framealpha": 0.9,
    "lines.solid_capstyle": "butt",
    "path.simplify": False,
    "agg.path.chunksize": 0,
    "savefig.dpi": "figure",
}


def load_log(csv_path):
    """CSV -> {column name: 1-D float array}. Header row is required."""
    try:
        fh = open(csv_path, newline="", encoding="utf-8")
    except FileNotFoundError:
        raise EmptyLogError(f"CSV log not found: {csv_path}")
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyLogError(f"CSV log is empty: {csv_path}")
        rows = [row for row in reader if row]
    if not rows:
        raise EmptyLogError(f"CSV log has a header but no samples: {csv_path}")
    if any(len(row) != len(header) for row in rows):
        raise LogFormatError(f"ragged CSV body in {csv_path}")
    try:
        data = np.asarray(rows, dtype=np.float64)
    except ValueError:
        raise LogFormatError(f"non-numeric CSV body in {csv_path}")
    return {name: data[:, k] for k, name in enumerate(header)}


def default_sidecar_path(csv_path):
    # the simulator writes X_log.csv with its sidecar at X_log.json
    return Path(csv_path).with_suffix(".json")


def _load_sidecar(spec):
    path = Path(spec.sidecar) if spec.sidecar else default_sidecar_path(spec.csv)
    try:
        with open(path, encoding="utf-8") as fh:
            side = json.load(fh)
    except FileNotFoundError:
        raise SidecarError(f"run sidecar not found: {path}")
    except json.JSONDecodeError as exc:
        raise SidecarError(f"run sidecar is not valid JSON: {exc}")
    if "banks" not in side:
        raise SidecarError(f"sidecar {path} has no per-bank decompositions")
    return side


def _column(cols, name):
    try:
        return cols[name]
    except KeyError:
        raise MissingColumnError(name)


def _expr_values(series, cols):
    y = None
    for coeff, name in parse_expression(series.expr):
        term = coeff * _column(cols, name)
        y = term if y is None else y + term
    return y


def _reconstruction_values(series, cols, sidecar):
    banks = sidecar["banks"]
    if not 1 <= series.bank <= len(banks):
        raise SidecarError(f"sidecar describes {len(banks)} banks, series "
                           f"asks for bank {series.bank}")
    blk = banks[series.bank - 1]
    o_i = int(blk["o_i"])
    w = np.asarray(series.weights, dtype=np.float64)
    n = w.size
    Vi = np.asarray(blk["V_i"], dtype=np.float64).reshape(n, o_i)
    Wi = np.asarray(blk["W_i"], dtype=np.float64).reshape(o_i, n)
    cz = w @ Vi                      # functional through the bank's observer
    ch = w @ (np.eye(n) - Vi @ Wi)   # completed by the resilient estimate
    y = np.zeros_like(_column(cols, "t"))
    for k in range(o_i):
        y = y + cz[k] * _column(cols, f"z{series.bank}_{k + 1}")
    for l in range(n):
        y = y + ch[l] * _column(cols, f"xhat{series.bank}_{l + 1}")
    return y


def build_series_data(spec):
    """Evaluate every series against the CSV (and sidecar, if needed)."""
    if not spec.csv:
        raise SpecFormatError("no input CSV given (--csv flag or spec field)")
    cols = load_log(spec.csv)
    t = _column(cols, "t")
    sidecar = None
    out = []
    for series in spec.series:
        if series.kind == "expr":
            y = _expr_values(series, cols)
        else:
            if sidecar is None:
                sidecar = _load_sidecar(spec)
            y = _reconstruction_values(series, cols, sidecar)
        out.append((series, y))
    return t, out


def build_figure(spec):
    t, evaluated = build_series_data(spec)
    fig, ax = plt.subplots(figsize=spec.figsize, dpi=spec.dpi)
    for series, y in evaluated:
        ax.plot(t, y, color=series.color, label=series.label,
                linewidth=series.linewidth, linestyle=series.linestyle,
                alpha=series.alpha, zorder=series.zorder)
    ax.set_xlabel(spec.xlabel)
    ax.set_ylabel(spec.ylabel)
    if spec.title:
        ax.set_title(spec.title)
    if spec.xlim is not None:
        ax.set_xlim(*spec.xlim)
    if spec.legend:
        ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    return fig


def render(spec):
    """Write spec.out as a PNG; returns the output path."""
    if not spec.out:
        raise SpecFormatError("no output path given (--out flag or spec field)")
    with plt.rc_context(_PINNED_STYLE):
        fig = build_figure(spec)
        out = Path(spec.out)
        if out.parent and not out.parent.exists():
            out.parent.mkdir(parents=True)
        try:
            fig.savefig(out, format="png",
                        metadata={"Software": "estplots"})
        finally:
            plt.close(fig)
    return out
