"""Figure specs: which CSV columns to combine, how to style each series.

A spec is a JSON file. Each series either combines CSV columns through a
linear expression ("x1 + x3 + x5", signed decimal coefficients allowed as
in "0.5*z1_2 - xhat3_1") or rebuilds a sensor bank's state reconstruction
from its z columns, completed by that agent's resilient estimate on the
directions the bank cannot see (kind "bank_reconstruction", which needs
the run's JSON sidecar next to the CSV).
"""

import json
import re
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

from .errors import SpecFormatError

_TERM = re.compile(
    r"([+-]?)\s*"
    r"(?:(\d+(?:\.\d*)?(?:[eE][+-]?\d+)?)\s*\*\s*)?"
    r"([A-Za-z_][A-Za-z0-9_]*)\s*")

_SERIES_KEYS = {"label", "color", "kind", "expr", "bank", "weights",
                "linewidth", "linestyle", "alpha", "zorder"}
_SPEC_KEYS = {"series", "title", "xlabel", "ylabel", "xlim", "figsize",
              "dpi", "legend", "csv", "sidecar", "out"}
_KINDS = ("expr", "bank_reconstruction")


def parse_expression(expr):
    """Parse 'x1 + x3 - 0.5*z1_2' into ((coeff, column), ...)."""
    s = expr.strip()
    if not s:
        raise SpecFormatError("empty series expression")
    terms = []
    pos = 0
    while pos < len(s):
        m = _TERM.match(s, pos)
        if m is None or (terms and m.group(1) == ""):
            raise SpecFormatError(
                f"cannot parse series expression near '{s[pos:]}'")
        sign = -1.0 if m.group(1) == "-" else 1.0
        coeff = float(m.group(2)) if m.group(2) else 1.0
        terms.append((sign * coeff, m.group(3)))
        pos = m.end()
    return tuple(terms)


@dataclass(frozen=True)
class Series:
    label: str
    color: str
    kind: str = "expr"
    expr: str = ""
    bank: int = 0          # 1-based, bank_reconstruction only
    weights: tuple = ()    # state functional row, bank_reconstruction only
    linewidth: float = 1.2
    linestyle: str = "-"
    alpha: float = 1.0
    zorder: float = 2.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise SpecFormatError(f"unknown series kind '{self.kind}'")
        if self.kind == "expr":
            parse_expression(self.expr)  # fail fast on bad syntax
        else:
            if self.bank < 1:
                raise SpecFormatError(
                    "bank_reconstruction series need a 1-based 'bank'")
            if not self.weights:
                raise SpecFormatError(
                    "bank_reconstruction series need a 'weights' row")
            object.__setattr__(
                self, "weights", tuple(float(w) for w in self.weights))


@dataclass(frozen=True)
class PlotSpec:
    series: tuple
    title: str = ""
    xlabel: str = "t"
    ylabel: str = ""
    xlim: tuple = None
    figsize: tuple = (8.0, 4.5)
    dpi: int = 120
    legend: bool = True
    csv: str = ""      # usually supplied by --csv
    sidecar: str = ""  # default: derived from the CSV file name
    out: str = ""      # usually supplied by --out

    def __post_init__(self):
        if not self.series:
            raise SpecFormatError("spec declares no series")
        object.__setattr__(self, "series", tuple(self.series))
        object.__setattr__(self, "figsize",
                           tuple(float(v) for v in self.figsize))
        if self.xlim is not None:
            object.__setattr__(self, "xlim",
                               tuple(float(v) for v in self.xlim))


def series_from_dict(d):
    if not isinstance(d, dict):
        raise SpecFormatError("each series must be an object")
    unknown = set(d) - _SERIES_KEYS
    if unknown:
        raise SpecFormatError(f"unknown series field(s) {sorted(unknown)}")
    for key in ("label", "color"):
        if key not in d:
            raise SpecFormatError(f"series is missing '{key}'")
    return Series(**d)


def spec_from_dict(d):
    if not isinstance(d, dict):
        raise SpecFormatError("spec root must be an object")
    unknown = set(d) - _SPEC_KEYS
    if unknown:
        raise SpecFormatError(f"unknown spec field(s) {sorted(unknown)}")
    if "series" not in d or not isinstance(d["series"], list):
        raise SpecFormatError("spec needs a 'series' list")
    payload = dict(d)
    payload["series"] = tuple(series_from_dict(s) for s in d["series"])
    return PlotSpec(**payload)


def load_spec(path):
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise SpecFormatError(f"spec file not found: {path}")
    except json.JSONDecodeError as exc:
        raise SpecFormatError(f"spec file is not valid JSON: {exc}")
    return spec_from_dict(raw)


def with_paths(spec, csv=None, out=None, sidecar=None):
    """Flags beat spec fields; anything still empty stays empty."""
    return replace(spec,
                   csv=csv or spec.csv,
                   out=out or spec.out,
                   sidecar=sidecar or spec.sidecar)


def bundled_spec_path(name):
    base = resources.files("estplots") / "specs" / f"{name}.json"
    with resources.as_file(base) as p:
        if not p.exists():
            raise SpecFormatError(f"no bundled spec named '{name}'")
        return Path(p)


def list_bundled_specs():
    base = resources.files("estplots") / "specs"
    return sorted(p.name[:-5] for p in base.iterdir()
                  if p.name.endswith(".json"))
