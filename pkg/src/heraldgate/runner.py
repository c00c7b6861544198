"""Parameter sweeps, engine comparisons, and configuration ingestion.

A sweep takes a base parameter set, varies one axis (C_B, lambda, Delta_e1
or N), evaluates one gate with one engine per grid point, and writes a CSV
whose header echoes the resolved configuration, so the artifact documents
itself.  A ``family`` key repeats the sweep for several values of a second
parameter (one curve per value), which is how the multi-curve figures are
reproduced.

Configuration files are INI-style text.  Keys in [system] are the parameter
symbols themselves; couplings can be given either directly (g_A, g_B, J) or
through the dimensionless groups (C_B, C_A, lambda).  Frequencies are either
already in units of the qutrit linewidth gamma (unit_mode = gamma) or in MHz
(unit_mode = MHz, meaning omega / 2 pi; everything is normalized to gamma on
ingestion and gate durations gain a microsecond column).

Point failures never abort a sweep: the row records the error class and the
run carries on, mirroring how long unattended scans are actually used.
"""
from __future__ import annotations

import configparser
import io
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import gates
from .model import SystemParams, params_from_groups, with_probe_rules

__all__ = [
    "ComparisonReport",
    "ConfigError",
    "SweepConfig",
    "SweepResult",
    "compare_engines",
    "gamma_time_to_us",
    "load_config",
    "preset_path",
    "run_sweep",
]

AXES = ("C_B", "lambda", "Delta_e1", "N")
ENGINES = ("analytic", "effective", "full")
GATE_KINDS = ("toffoli", "cz")

SWEEP_COLUMNS = ("gate", "engine", "family", "axis", "axis_value", "N", "C_B",
                 "lambda", "Delta_e1", "P", "one_minus_F", "t_gate", "t_us",
                 "provenance", "wall_time_s", "error")


class ConfigError(ValueError):
    """The configuration file is malformed or inconsistent."""


def gamma_time_to_us(t_gamma: float, gamma_MHz: float) -> float:
    """Convert a duration from 1/gamma units to microseconds.

    ``gamma_MHz`` is the linewidth as an ordinary frequency (gamma / 2 pi).
    """
    return t_gamma / (2.0 * np.pi * gamma_MHz)


@dataclass(frozen=True)
class SweepConfig:
    """Resolved sweep description (see the module docstring for the file format)."""

    base: SystemParams
    gate: str
    engine: str
    axis: str
    grid: tuple[float, ...]
    out: str | None = None
    family_key: str | None = None
    family: tuple[float, ...] = ()
    probe_rules: bool = False
    full_points: int = 10
    workers: int = 1
    rate_method: str = "taylor"
    method: str = "krylov"
    rtol: float = 1e-8
    max_step: float | None = None
    n_max: int | None = None
    gamma_MHz: float | None = None
    compare: tuple[str, ...] = ()
    echo: tuple[str, ...] = ()

    def validate(self) -> None:
        if self.gate not in GATE_KINDS:
            raise ConfigError(f"gate must be one of {GATE_KINDS}, got {self.gate!r}")
        if self.engine not in ENGINES:
            raise ConfigError(f"engine must be one of {ENGINES}, got {self.engine!r}")
        if self.axis not in AXES:
            raise ConfigError(f"axis must be one of {AXES}, got {self.axis!r}")
        if not self.grid:
            raise ConfigError("empty sweep grid")
        if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            raise ConfigError("sweep grid must be strictly increasing")
        if self.family_key is not None and self.family_key == self.axis:
            raise ConfigError("family key cannot equal the sweep axis")
        if self.gate == "cz":
            ns = self._n_values()
            if any(n != 2 for n in ns):
                raise ConfigError("the CZ map is defined for N = 2")
        if self.engine == "full" or "full" in self.compare:
            big = max(self._n_values())
            if big > 3:
                raise ConfigError(f"full-model sweeps are limited to N <= 3, "
                                  f"config reaches N = {big}")
        if self.compare:
            pair = set(self.compare)
            if not ("full" in pair and pair & {"analytic", "effective"}
                    and pair <= set(ENGINES) and len(pair) == 2):
                raise ConfigError("compare engines must pair 'full' with "
                                  "'analytic' or 'effective', got "
                                  f"{self.compare}")

    def _n_values(self) -> list[int]:
        ns = {self.base.n_qutrits}
        if self.axis == "N":
            ns = {int(v) for v in self.grid}
        if self.family_key == "N":
            ns = {int(v) for v in self.family}
        return sorted(ns)


@dataclass
class SweepResult:
    config: SweepConfig
    rows: list[dict]
    n_errors: int
    csv_text: str
    path: Path | None = None


@dataclass
class ComparisonReport:
    config: SweepConfig
    engines: tuple[str, str]
    rows: list[dict]
    max_dev_P: float
    max_dev_F: float
    n_errors: int
    csv_text: str = ""
    path: Path | None = None


# ---------------------------------------------------------------------------
# configuration ingestion
# ---------------------------------------------------------------------------

_SYSTEM_DIRECT = ("gamma0", "gamma1", "gamma_g1", "gamma_g2", "kappa",
                  "g_A", "g_B", "J", "delta", "Delta_e1", "Delta_e2",
                  "Omega1", "Omega2")
_SYSTEM_GROUPS = ("C_B", "C_A", "lambda")
_FREQUENCY_KEYS = ("gamma0", "gamma1", "gamma_g1", "gamma_g2", "kappa",
                   "g_A", "g_B", "J", "delta", "Delta_e1", "Delta_e2",
                   "Omega1", "Omega2")


def _parse_grid(text: str) -> tuple[float, ...]:
    text = text.strip()
    for name, fn in (("linspace", np.linspace),
                     ("logspace", lambda a, b, n: np.logspace(np.log10(a), np.log10(b), n))):
        if text.startswith(name + ":"):
            parts = text.split(":")
            if len(parts) != 4:
                raise ConfigError(f"grid {text!r} wants {name}:start:stop:count")
            a, b, n = float(parts[1]), float(parts[2]), int(parts[3])
            if n < 1 or a <= 0 and name == "logspace":
                raise ConfigError(f"grid {text!r} is not a valid {name} range")
            return tuple(float(v) for v in fn(a, b, n))
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"cannot parse grid {text!r}") from exc


def _system_params(sec: dict[str, str]) -> tuple[SystemParams, float | None]:
    unit_mode = sec.pop("unit_mode", "gamma")
    if unit_mode not in ("gamma", "MHz"):
        raise ConfigError(f"unit_mode must be 'gamma' or 'MHz', got {unit_mode!r}")
    n_qutrits = int(sec.pop("N", 1))
    n_max = int(sec.pop("n_max", 2))
    unknown = set(sec) - set(_SYSTEM_DIRECT) - set(_SYSTEM_GROUPS)
    if unknown:
        raise ConfigError(f"unknown [system] keys: {sorted(unknown)}")
    vals = {k: float(v) for k, v in sec.items()}
    group_given = [k for k in _SYSTEM_GROUPS if k in vals]
    direct_given = [k for k in ("g_A", "g_B", "J") if k in vals]
    if group_given and direct_given:
        raise ConfigError("give couplings either as groups (C_B, C_A, lambda) "
                          f"or directly (g_A, g_B, J), not both: {group_given} "
                          f"with {direct_given}")
    gamma_MHz = None
    if unit_mode == "MHz":
        for need in ("gamma0", "gamma1"):
            if need not in vals:
                raise ConfigError(f"unit_mode = MHz requires {need} in MHz")
        gamma_MHz = vals["gamma0"] + vals["gamma1"]
        for k in list(vals):
            if k in _FREQUENCY_KEYS:
                vals[k] = vals[k] / gamma_MHz
    if group_given:
        if "C_B" not in vals or "lambda" not in vals:
            raise ConfigError("the group form needs both C_B and lambda")
        if "kappa" not in vals:
            raise ConfigError("kappa is required")
        kwargs = dict(C_B=vals.pop("C_B"), lam=vals.pop("lambda"),
                      kappa=vals.pop("kappa"), C_A=vals.pop("C_A", None),
                      Delta_e1=vals.pop("Delta_e1", 0.0),
                      Omega1=vals.pop("Omega1", 0.0),
                      Omega2=vals.pop("Omega2", 0.0),
                      n_qutrits=n_qutrits, n_max=n_max)
        kwargs.update({k: v for k, v in vals.items()})
        try:
            params = params_from_groups(**kwargs)
        except TypeError as exc:
            raise ConfigError(f"bad [system] keys: {exc}") from exc
    else:
        missing = [k for k in ("kappa", "g_A", "g_B", "J") if k not in vals]
        if missing:
            raise ConfigError(f"missing [system] keys: {missing}")
        defaults = dict(gamma0=0.5, gamma1=0.5, gamma_g1=1.0, gamma_g2=1.0,
                        delta=0.0, Delta_e1=0.0, Delta_e2=0.0,
                        Omega1=0.0, Omega2=0.0)
        defaults.update(vals)
        params = SystemParams(n_qutrits=n_qutrits, n_max=n_max, **defaults)
    params.validate()
    return params, gamma_MHz


def load_config(path) -> SweepConfig:
    """Parse an INI configuration file into a validated SweepConfig.

    A bare name with no suffix or directory part is looked up among the
    packaged presets, so ``load_config("toffoli_vs_cooperativity")`` works.
    """
    path = Path(path)
    if not path.is_file():
        if path.suffix == "" and path.parent == Path("."):
            path = preset_path(path.name)
        else:
            raise ConfigError(f"no such config file: {path}")
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if "system" not in cp:
        raise ConfigError("config needs a [system] section")
    base, gamma_MHz = _system_params(dict(cp["system"]))

    sw = dict(cp["sweep"]) if "sweep" in cp else {}
    family_key = None
    family: tuple[float, ...] = ()
    if "family" in sw:
        head, _, tail = sw.pop("family").partition(":")
        family_key = head.strip()
        if family_key not in AXES:
            raise ConfigError(f"family key must be one of {AXES}, got {family_key!r}")
        family = _parse_grid(tail)
    it = dict(cp["integrator"]) if "integrator" in cp else {}
    comp = dict(cp["compare"]) if "compare" in cp else {}
    compare = tuple(e.strip() for e in comp.pop("engines", "").split(",") if e.strip())
    if comp:
        raise ConfigError(f"unknown [compare] keys: {sorted(comp)}")

    def pop_bool(d, key, default):
        raw = d.pop(key, None)
        if raw is None:
            return default
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key} must be a boolean, got {raw!r}")

    raw_grid = sw.pop("grid", None)
    raw_max_step = it.pop("max_step", None)
    raw_n_max = it.pop("n_max", None)
    try:
        cfg = SweepConfig(
            base=base,
            gate=sw.pop("gate", "cz"),
            engine=sw.pop("engine", "analytic"),
            axis=sw.pop("axis", "C_B"),
            grid=_parse_grid(raw_grid) if raw_grid is not None else (),
            out=sw.pop("out", None),
            family_key=family_key,
            family=family,
            probe_rules=pop_bool(sw, "probe_rules", False),
            full_points=int(sw.pop("full_points", 10)),
            workers=int(sw.pop("workers", 1)),
            rate_method=it.pop("rate_method", "taylor"),
            method=it.pop("method", "krylov"),
            rtol=float(it.pop("rtol", 1e-8)),
            max_step=float(raw_max_step) if raw_max_step is not None else None,
            n_max=int(raw_n_max) if raw_n_max is not None else None,
            gamma_MHz=gamma_MHz,
            compare=compare,
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad value in {path}: {exc}") from exc
    if sw:
        raise ConfigError(f"unknown [sweep] keys: {sorted(sw)}")
    if it:
        raise ConfigError(f"unknown [integrator] keys: {sorted(it)}")
    if gamma_MHz is not None:
        # grids over a frequency axis are written in MHz like everything else
        if cfg.axis == "Delta_e1":
            cfg = replace(cfg, grid=tuple(v / gamma_MHz for v in cfg.grid))
        if cfg.family_key == "Delta_e1":
            cfg = replace(cfg, family=tuple(v / gamma_MHz for v in cfg.family))
    cfg = replace(cfg, echo=_echo_lines(cp))
    cfg.validate()
    return cfg


def _echo_lines(cp: configparser.ConfigParser) -> tuple[str, ...]:
    lines = []
    for section in cp.sections():
        for key, val in cp[section].items():
            lines.append(f"# {section}.{key} = {val}")
    return tuple(lines)


# ---------------------------------------------------------------------------
# sweep execution
# ---------------------------------------------------------------------------

def _apply_value(params: SystemParams, key: str, value: float) -> SystemParams:
    """Set one swept quantity, rebuilding couplings when the groups change."""
    if key == "Delta_e1":
        return replace(params, Delta_e1=float(value))
    if key == "N":
        n = int(value)
        if n != value:
            raise ConfigError(f"N grid values must be integers, got {value}")
        return replace(params, n_qutrits=n)
    if key == "lambda":
        return replace(params, J=float(value) * np.sqrt(params.C_B) * params.kappa)
    if key == "C_B":
        alpha = params.alpha
        g_B = np.sqrt(float(value) * params.kappa * params.gamma)
        return replace(params, g_B=g_B, g_A=np.sqrt(alpha) * g_B,
                       J=params.lam * np.sqrt(float(value)) * params.kappa)
    raise ConfigError(f"cannot sweep {key!r}")


def _point_params(config: SweepConfig, family_value: float | None,
                  axis_value: float) -> SystemParams:
    p = config.base
    if config.family_key is not None and family_value is not None:
        p = _apply_value(p, config.family_key, family_value)
    p = _apply_value(p, config.axis, axis_value)
    if config.probe_rules:
        p = with_probe_rules(p)
    if config.n_max is not None:
        p = replace(p, n_max=config.n_max)
    return p


def _engine_kwargs(config: SweepConfig, engine: str) -> dict:
    if engine == "analytic":
        return {"rate_method": config.rate_method}
    if engine == "effective":
        return {"rate_method": config.rate_method}
    return {"rate_method": config.rate_method, "method": config.method,
            "rtol": config.rtol, "fixed_step": config.max_step}


def _sweep_point(config: SweepConfig, engine: str, family_value: float | None,
                 axis_value: float) -> dict:
    start = time.perf_counter()
    row = {"gate": config.gate, "engine": engine,
           "family": "" if family_value is None else f"{family_value:.10g}",
           "axis": config.axis, "axis_value": f"{axis_value:.10g}",
           "P": "", "one_minus_F": "", "t_gate": "", "t_us": "",
           "provenance": "", "error": ""}
    try:
        p = _point_params(config, family_value, axis_value)
        row.update(N=str(p.n_qutrits), C_B=f"{p.C_B:.10g}",
                   **{"lambda": f"{p.lam:.10g}"}, Delta_e1=f"{p.Delta_e1:.10g}")
        report = gates.gate_metrics(p, config.gate, engine,
                                    **_engine_kwargs(config, engine))
        row.update(P=f"{report.success_probability:.12g}",
                   one_minus_F=f"{1.0 - report.conditional_fidelity:.12g}",
                   t_gate=f"{report.duration:.12g}",
                   provenance=report.provenance)
        # solver hygiene for callers; underscore keys never reach the CSV
        row["_diagnostics"] = report.diagnostics
        if config.gamma_MHz is not None:
            row["t_us"] = f"{gamma_time_to_us(report.duration, config.gamma_MHz):.12g}"
    except Exception as exc:   # record and continue: sweeps must survive bad points
        row.setdefault("N", "")
        row.setdefault("C_B", "")
        row.setdefault("lambda", "")
        row.setdefault("Delta_e1", "")
        row["error"] = type(exc).__name__
    row["wall_time_s"] = f"{time.perf_counter() - start:.3f}"
    return row


def _task(args):
    return _sweep_point(*args)


def _grid_for(config: SweepConfig, engine: str) -> tuple[float, ...]:
    """Full-model points are subsampled to at most ``full_points`` per curve."""
    grid = config.grid
    if engine == "full" and len(grid) > config.full_points:
        idx = np.unique(np.linspace(0, len(grid) - 1,
                                    config.full_points).round().astype(int))
        grid = tuple(grid[i] for i in idx)
    return grid


def _run_points(config: SweepConfig, engine: str,
                grid: tuple[float, ...]) -> list[dict]:
    families: tuple[float | None, ...] = config.family or (None,)
    tasks = [(config, engine, fv, av) for fv in families for av in grid]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            return list(pool.map(_task, tasks))
    return [_task(t) for t in tasks]


def _csv_with_header(config: SweepConfig, columns, rows) -> str:
    buf = io.StringIO()
    for line in config.echo:
        buf.write(line + "\n")
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(str(row.get(c, "")) for c in columns) + "\n")
    return buf.getvalue()


def run_sweep(config: SweepConfig, out=None) -> SweepResult:
    """Execute a sweep and write its CSV artifact.

    Every grid point yields one row; failures are recorded in the ``error``
    column and do not stop the sweep.  ``out`` overrides the configured
    output path; None with no configured path skips writing.
    """
    config.validate()
    grid = _grid_for(config, config.engine)
    rows = _run_points(config, config.engine, grid)
    n_errors = sum(1 for r in rows if r["error"])
    text = _csv_with_header(config, SWEEP_COLUMNS, rows)
    path = Path(out) if out is not None else (
        Path(config.out) if config.out else None)
    if path is not None:
        path.write_text(text)
    return SweepResult(config=config, rows=rows, n_errors=n_errors,
                       csv_text=text, path=path)


COMPARE_COLUMNS = ("gate", "family", "axis", "axis_value",
                   "P_a", "P_b", "dev_P", "F_a", "F_b", "dev_F", "error")


def compare_engines(config: SweepConfig, out=None) -> ComparisonReport:
    """Run two engines over the same grid and tabulate their deviation.

    The engine pair comes from the config's [compare] section and must pair
    "full" with one of the cheaper engines.  The grid is subsampled the way
    a full-engine sweep would be, so both engines are evaluated at identical
    points.  Deviations are absolute, on P and on the conditional fidelity.
    """
    config.validate()
    if len(config.compare) != 2:
        raise ConfigError("compare needs [compare] engines = <a>, <b>")
    eng_a, eng_b = config.compare
    grid = _grid_for(config, "full")
    rows_a = _run_points(config, eng_a, grid)
    rows_b = _run_points(config, eng_b, grid)
    rows = []
    max_dev_P = 0.0
    max_dev_F = 0.0
    n_errors = 0
    for ra, rb in zip(rows_a, rows_b):
        row = {"gate": config.gate, "family": ra["family"], "axis": ra["axis"],
               "axis_value": ra["axis_value"], "P_a": ra["P"], "P_b": rb["P"],
               "F_a": "", "F_b": "", "dev_P": "", "dev_F": "",
               "error": ra["error"] or rb["error"],
               "_diag_a": ra.get("_diagnostics"),
               "_diag_b": rb.get("_diagnostics"),
               "_wall_a": ra["wall_time_s"], "_wall_b": rb["wall_time_s"]}
        if row["error"]:
            n_errors += 1
        else:
            dev_p = abs(float(ra["P"]) - float(rb["P"]))
            f_a = 1.0 - float(ra["one_minus_F"])
            f_b = 1.0 - float(rb["one_minus_F"])
            dev_f = abs(f_a - f_b)
            max_dev_P = max(max_dev_P, dev_p)
            max_dev_F = max(max_dev_F, dev_f)
            row.update(dev_P=f"{dev_p:.12g}", dev_F=f"{dev_f:.12g}",
                       F_a=f"{f_a:.12g}", F_b=f"{f_b:.12g}")
        rows.append(row)
    text = _csv_with_header(config, COMPARE_COLUMNS, rows)
    text += (f"# engines = {eng_a}, {eng_b}\n"
             f"# max_dev_P = {max_dev_P:.12g}\n"
             f"# max_dev_F = {max_dev_F:.12g}\n")
    path = Path(out) if out is not None else (
        Path(config.out) if config.out else None)
    if path is not None:
        path.write_text(text)
    return ComparisonReport(config=config, engines=(eng_a, eng_b), rows=rows,
                            max_dev_P=max_dev_P, max_dev_F=max_dev_F,
                            n_errors=n_errors, csv_text=text, path=path)


def preset_path(name: str) -> Path:
    """Path of a packaged sweep preset (name without the .ini suffix)."""
    path = Path(__file__).parent / "presets" / f"{name}.ini"
    if not path.is_file():
        have = sorted(p.stem for p in path.parent.glob("*.ini"))
        raise ConfigError(f"no preset {name!r}; available: {have}")
    return path
