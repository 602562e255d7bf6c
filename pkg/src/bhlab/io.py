"""File formats: field files, run configuration, records CSV, reports and plots.

Every floating-point value is written with 17 significant digits, which
round-trips a double exactly.  Output is deterministic: the same run
produces byte-identical ``records.csv``.

Run configuration is an INI file::

    [grid]
    n = 8192
    L = 10

    [equation]
    alpha = 0

    [time]
    t_max = 0.01
    cfl_sigma = 0.5          # or: dt = 1e-5

    [initial]
    variant = rational       # rational | single_mode | gaussian | bandlimited | zero | file
    a = 1300
    b = 1

    [diagnostics]
    cadence = 16
    beta0 = -1
    p = 2.5                  # weight exponents, optional and given together
    q = 0.5

    [stop]
    slope_factor = 100
    tail_fraction = 1e-4

    [output]
    directory = out
    plot = on
    final_field = on

Unknown sections and keys are rejected.
"""

from __future__ import annotations

import configparser
import csv
import json
import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .kernels import WeightParams
from .spectral import GridSpec, RealField

__all__ = [
    "write_field",
    "read_field",
    "RECORD_COLUMNS",
    "record_row",
    "CsvSink",
    "RunConfigFile",
    "load_config",
    "parse_config",
    "write_summary",
    "write_report",
    "plot_run",
]

_HEADER = re.compile(r"^# bh-field v1 n=(\d+) L=(\S+)$")


def _fmt(v) -> str:
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.17g}"


# ---------------------------------------------------------------------------
# field files


def write_field(path, u: RealField) -> None:
    lines = [f"# bh-field v1 n={u.grid.n_points} L={_fmt(u.grid.domain_length)}"]
    lines += [_fmt(v) for v in u.values]
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def read_field(path) -> RealField:
    text = Path(path).read_text(encoding="ascii")
    lines = text.splitlines()
    if not lines:
        raise ConfigurationError(f"{path}: empty field file")
    m = _HEADER.match(lines[0].strip())
    if m is None:
        raise ConfigurationError(f"{path}: bad header {lines[0]!r}")
    n, L = int(m.group(1)), float(m.group(2))
    body = [s for s in (ln.strip() for ln in lines[1:]) if s]
    if len(body) != n:
        raise ConfigurationError(f"{path}: header says n={n} but {len(body)} values follow")
    try:
        vals = np.array([float(s) for s in body])
    except ValueError as exc:
        raise ConfigurationError(f"{path}: {exc}") from None
    return RealField(GridSpec(n, L), vals)


# ---------------------------------------------------------------------------
# records CSV

RECORD_COLUMNS = ("t", "l2", "hamiltonian", "mean", "u_max", "ux_max", "J_traj", "HJ_traj",
                  "dini_at_traj", "J_weight", "rhs8_value")

_SOURCE = {"l2": "l2_norm", "rhs8_value": "dJweight_dt_rhs"}


def record_row(rec) -> list[str]:
    return [_fmt(getattr(rec, _SOURCE.get(c, c))) for c in RECORD_COLUMNS]


class CsvSink:
    """Streams diagnostic records to ``records.csv``; usable as a context manager."""

    def __init__(self, path):
        self.path = Path(path)
        self._fh = open(self.path, "w", newline="", encoding="ascii")
        self._w = csv.writer(self._fh, lineterminator="\n")
        self._w.writerow(RECORD_COLUMNS)
        self.count = 0

    def emit(self, rec) -> None:
        self._w.writerow(record_row(rec))
        self.count += 1

    def close(self):
        if not self._fh.closed:
            self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


# ---------------------------------------------------------------------------
# configuration

_SCHEMA = {
    "grid": {"n", "L"},
    "equation": {"alpha"},
    "time": {"t_max", "dt", "cfl_sigma"},
    "initial": {"variant", "a", "b", "periodize", "amplitude", "wavenumber", "width", "center",
                "kmax", "decay", "seed", "path"},
    "diagnostics": {"cadence", "p", "q", "beta0"},
    "stop": {"slope_factor", "tail_fraction"},
    "output": {"directory", "plot", "final_field"},
}
_REQUIRED = {"grid": ("n", "L"), "equation": ("alpha",), "time": ("t_max",), "initial": ("variant",)}
_VARIANT_KEYS = {
    "rational": ({"a", "b"}, {"periodize"}),
    "single_mode": ({"amplitude"}, {"wavenumber"}),
    "gaussian": ({"amplitude", "width"}, {"center"}),
    "bandlimited": (set(), {"kmax", "decay", "seed", "amplitude"}),
    "zero": (set(), set()),
    "file": ({"path"}, set()),
}


@dataclass(frozen=True)
class RunConfigFile:
    """A parsed configuration: the simulation config plus output options."""

    sim: object  # solver.SimConfig
    output_dir: Path
    plot: bool
    final_field: bool
    source: str = ""


def _get(cp, sec, key, conv, default=None):
    if not cp.has_option(sec, key):
        return default
    raw = cp.get(sec, key)
    try:
        return conv(raw)
    except ValueError:
        raise ConfigurationError(f"[{sec}] {key}: cannot parse {raw!r}") from None


def _bool(s):
    t = s.strip().lower()
    if t in ("on", "true", "yes", "1"):
        return True
    if t in ("off", "false", "no", "0"):
        return False
    raise ValueError(s)


def _int(s):
    f = float(s)
    if f != int(f):
        raise ValueError(s)
    return int(f)


def parse_config(text: str, base_dir=None) -> RunConfigFile:
    """Parse and validate INI text; paths are relative to ``base_dir``."""
    from . import solver as sv

    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"malformed config: {exc}") from None
    for sec in cp.sections():
        if sec not in _SCHEMA:
            raise ConfigurationError(f"unknown section [{sec}]")
        extra = set(cp.options(sec)) - _SCHEMA[sec]
        if extra:
            raise ConfigurationError(f"unknown key(s) in [{sec}]: {', '.join(sorted(extra))}")
    for sec, keys in _REQUIRED.items():
        for k in keys:
            if not cp.has_option(sec, k):
                raise ConfigurationError(f"missing required key [{sec}] {k}")
    base = Path(base_dir) if base_dir is not None else Path.cwd()

    grid = GridSpec(_get(cp, "grid", "n", _int), _get(cp, "grid", "L", float))
    alpha = _get(cp, "equation", "alpha", float)
    t_max = _get(cp, "time", "t_max", float)
    has_dt, has_cfl = cp.has_option("time", "dt"), cp.has_option("time", "cfl_sigma")
    if has_dt and has_cfl:
        raise ConfigurationError("[time] give either dt or cfl_sigma, not both")
    policy = sv.FixedStep(_get(cp, "time", "dt", float)) if has_dt else \
        sv.CFLStep(_get(cp, "time", "cfl_sigma", float, 0.5))

    variant = cp.get("initial", "variant").strip()
    if variant not in _VARIANT_KEYS:
        raise ConfigurationError(f"[initial] variant: unknown {variant!r}; "
                                 f"choose from {', '.join(_VARIANT_KEYS)}")
    need, optional = _VARIANT_KEYS[variant]
    given = set(cp.options("initial")) - {"variant"}
    for k in sorted(need - given):
        raise ConfigurationError(f"missing required key [initial] {k} for variant {variant}")
    stray = given - need - optional
    if stray:
        raise ConfigurationError(f"[initial] key(s) {', '.join(sorted(stray))} do not apply to variant {variant}")
    g = lambda k, conv=float, d=None: _get(cp, "initial", k, conv, d)  # noqa: E731
    if variant == "rational":
        init = sv.RationalFamily(g("a"), g("b"), g("periodize", _bool, True))
    elif variant == "single_mode":
        init = sv.SingleMode(g("amplitude"), g("wavenumber", _int, 1))
    elif variant == "gaussian":
        init = sv.GaussianBump(g("amplitude"), g("width"), g("center", float, 0.0))
    elif variant == "bandlimited":
        init = sv.RandomBandlimited(g("seed", _int, 0), g("kmax", _int, 8), g("decay", float, 1.0),
                                    g("amplitude", float, 1.0))
    elif variant == "zero":
        init = sv.SingleMode(0.0)
    else:
        p = Path(cp.get("initial", "path"))
        init = sv.FromFile(str(p if p.is_absolute() else base / p))

    d = lambda k, conv=float, dflt=None: _get(cp, "diagnostics", k, conv, dflt)  # noqa: E731
    wp = None
    hp, hq = cp.has_option("diagnostics", "p"), cp.has_option("diagnostics", "q")
    if hp != hq:
        raise ConfigurationError("[diagnostics] weight exponents p and q must be given together")
    if hp:
        wp = WeightParams(d("q"), d("p"), alpha)
    stop = sv.StopCriteria(_get(cp, "stop", "slope_factor", float, 100.0),
                           _get(cp, "stop", "tail_fraction", float, 1e-4))
    sim = sv.SimConfig(alpha=alpha, grid=grid, t_max=t_max, dt_policy=policy, initial_data=init,
                       diag_every=d("cadence", _int, 1), stop=stop, beta0=d("beta0"), weights=wp)
    out = Path(_get(cp, "output", "directory", str, "out"))
    return RunConfigFile(sim, out if out.is_absolute() else base / out,
                         _get(cp, "output", "plot", _bool, True),
                         _get(cp, "output", "final_field", _bool, True), text)


def load_config(path) -> RunConfigFile:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, Path.cwd())


# ---------------------------------------------------------------------------
# reports


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


def write_summary(directory, report) -> None:
    """``summary.txt`` (key = value lines) and ``summary.json`` with the same content."""
    d = Path(directory)
    text = report.summary()
    (d / "summary.txt").write_text(text)
    data = {}
    for line in text.splitlines():
        k, _, v = line.partition(" = ")
        try:
            data[k] = _jsonable(int(v)) if re.fullmatch(r"-?\d+", v) else _jsonable(float(v))
        except ValueError:
            data[k] = v
    (d / "summary.json").write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def write_report(path, report) -> None:
    """Write any report exposing ``lines()``."""
    Path(path).write_text("\n".join(report.lines()) + "\n")


def plot_run(directory, report, grid: GridSpec) -> list[Path]:
    """Static SVG plots: field snapshots and ``max|u_x|`` against time."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    d = Path(directory)
    meta = {"Date": None}
    out = []
    fig, ax = plt.subplots(figsize=(7, 4))
    x = grid.nodes
    for t, v in report.snapshots:
        ax.plot(x, v, lw=1, label=f"t = {t:.4g}")
    ax.set_xlabel("x")
    ax.set_ylabel("u")
    ax.legend(fontsize=7)
    fig.tight_layout()
    p = d / "snapshots.svg"
    fig.savefig(p, format="svg", metadata=meta)
    plt.close(fig)
    out.append(p)

    fig, ax = plt.subplots(figsize=(7, 4))
    t = [r.t for r in report.records]
    ux = [r.ux_max for r in report.records]
    ax.plot(t, ux, ".-", lw=1, ms=3)
    if any(v > 0 for v in ux):
        ax.set_yscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel("max |u_x|")
    fig.tight_layout()
    p = d / "ux_max.svg"
    fig.savefig(p, format="svg", metadata=meta)
    plt.close(fig)
    out.append(p)
    return out
