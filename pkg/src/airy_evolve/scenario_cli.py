"""Scenario files, batch runs and the ``airy-evolve`` command line.

A scenario is a flat document of dotted keys::

    physics.hbar = 1.0
    physics.mass = 1.0
    physics.b = 1.0
    force.kind = "constant"
    force.f0 = 0.5
    grid.n = 4096
    grid.x_min = -60
    grid.x_max = 60
    time.dt = 1e-3
    time.t_end = 2.0
    snapshots = [0.5, 1.0, 1.5, 2.0]
    window.lo = -10
    window.hi = 10
    aperture.lo = -40
    aperture.hi = 40
    aperture.ramp = 8

The syntax is a subset of TOML and is read with a TOML parser.

Exit statuses: 0 all checks pass, 1 a threshold failed, 2 the numeric
evolution diverged, 3 I/O or configuration error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import airy_special, analytic_propagator, operator_algebra
from .airy_special import ai_packet
from .analytic_propagator import (
    BERRY_BALAZS,
    HBAR_EXPLICIT,
    ForceProfile,
    PhysicalConstants,
)
from .errors import (
    AiryEvolveError,
    ConfigurationError,
    DegenerateWindowError,
    DivergenceError,
    MissingKeyError,
    TrackingLostError,
)
from .fields import GridSpec
from .numeric_propagator import SPLIT_STEP, Aperture, StepScheme, evolve, steps_for
from .operator_algebra import classical_acceleration
from .verification import (
    peak_trajectory,
    phase_check,
    predicted_peak,
    shape_error,
    locate_peak,
)

EXIT_OK = 0
EXIT_THRESHOLD = 1
EXIT_DIVERGED = 2
EXIT_IO = 3

ENV_OUT = "AIRY_EVOLVE_OUT"
DEFAULT_OUT = "airy_evolve_out"

CSV_COLUMNS = (
    "t",
    "x_peak_numeric",
    "x_shift_analytic",
    "x0",
    "x1",
    "shape_max_dev",
    "shape_l2_dev",
    "phase_max_dev",
    "norm",
)
FIELD_COLUMNS = ("x", "re", "im", "abs2")

KNOWN_KEYS = {
    "physics.hbar", "physics.mass", "physics.b", "physics.B", "physics.convention",
    "force.kind", "force.f0", "force.omega", "force.phase", "force.times", "force.values",
    "grid.n", "grid.x_min", "grid.x_max",
    "time.dt", "time.t_end", "time.scheme",
    "snapshots",
    "window.lo", "window.hi",
    "aperture.lo", "aperture.hi", "aperture.ramp",
    "output.dir", "output.dump_fields",
    "thresholds.shape_max_dev", "thresholds.phase_max_dev", "thresholds.phase_times",
    "thresholds.peak_tol_dx", "thresholds.acceleration_tol",
}


@dataclass(frozen=True)
class Thresholds:
    shape_max_dev: float | None = 1e-3
    phase_max_dev: float | None = None
    phase_times: tuple[float, ...] | None = None
    peak_tol_dx: float | None = 2.0
    acceleration_tol: float | None = None


@dataclass(frozen=True)
class OutputSpec:
    directory: str | None = None
    dump_fields: bool = False
    thresholds: Thresholds = field(default_factory=Thresholds)


@dataclass(frozen=True)
class Scenario:
    constants: PhysicalConstants
    force: ForceProfile
    grid: GridSpec
    scheme: StepScheme
    aperture: Aperture
    t_end: float
    snapshot_times: tuple[float, ...]
    trusted_window: tuple[float, float]
    outputs: OutputSpec = field(default_factory=OutputSpec)


def _flatten(doc: dict, prefix: str = "") -> dict[str, Any]:
    flat = {}
    for key, value in doc.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, name + "."))
        else:
            flat[name] = value
    return flat


class _Keys:
    def __init__(self, flat):
        self.flat = flat

    def has(self, key):
        return key in self.flat

    def get(self, key, default=None, kind: Callable = float):
        if key not in self.flat:
            return default
        return self._convert(key, self.flat[key], kind)

    def need(self, key, kind: Callable = float):
        if key not in self.flat:
            raise MissingKeyError(key)
        return self._convert(key, self.flat[key], kind)

    @staticmethod
    def _convert(key, value, kind):
        try:
            if kind is float and isinstance(value, bool):
                raise TypeError
            return kind(value)
        except (TypeError, ValueError):
            raise ConfigurationError(f"key {key!r} has invalid value {value!r}") from None


def _float_list(value):
    if not isinstance(value, (list, tuple)):
        raise TypeError
    return tuple(float(v) for v in value)


def _bool(value):
    if not isinstance(value, bool):
        raise TypeError
    return value


def _build(what, factory, *args, **kwargs):
    try:
        return factory(*args, **kwargs)
    except AiryEvolveError as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(f"invalid {what}: {exc}") from None


def parse_scenario(text: str) -> Scenario:
    """Parse and validate a scenario document."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"malformed scenario document: {exc}") from None
    flat = _flatten(doc)
    unknown = sorted(set(flat) - KNOWN_KEYS)
    if unknown:
        raise ConfigurationError(f"unknown keys: {', '.join(unknown)}")
    keys = _Keys(flat)

    convention = keys.get("physics.convention", HBAR_EXPLICIT, str)
    hbar = keys.need("physics.hbar")
    mass = keys.need("physics.mass")
    if convention == BERRY_BALAZS:
        constants = _build(
            "physics", PhysicalConstants.berry_balazs, keys.need("physics.B"), hbar, mass
        )
    else:
        constants = _build(
            "physics", PhysicalConstants, hbar, mass, keys.need("physics.b"), convention
        )
    if not constants.b > 0:
        raise ConfigurationError("invalid physics: the Airy scale must be positive")

    kind = keys.get("force.kind", "zero", str)
    if kind == "zero":
        force = ForceProfile.zero()
    elif kind == "constant":
        force = ForceProfile.constant(keys.need("force.f0"))
    elif kind == "sinusoid":
        force = ForceProfile.sinusoid(
            keys.need("force.f0"), keys.need("force.omega"), keys.get("force.phase", 0.0)
        )
    elif kind == "tabulated":
        force = _build(
            "force",
            ForceProfile.tabulated,
            keys.need("force.times", _float_list),
            keys.need("force.values", _float_list),
        )
    else:
        raise ConfigurationError(f"invalid force: unknown kind {kind!r}")

    n = keys.need("grid.n", int)
    if n < 16:
        raise ConfigurationError(f"invalid grid: n ≥ 16 required, got {n}")
    grid = _build("grid", GridSpec, keys.need("grid.x_min"), keys.need("grid.x_max"), n)

    dt = keys.get("time.dt", 1e-3)
    scheme = _build("time", StepScheme, keys.get("time.scheme", SPLIT_STEP, str), dt)
    if not scheme.dt > 0:
        raise ConfigurationError("invalid time: dt > 0 required")
    t_end = keys.need("time.t_end")
    if not t_end >= 0:
        raise ConfigurationError("invalid time: t_end ≥ 0 required")
    if force.kind == "tabulated" and t_end > force.t_max:
        raise ConfigurationError("invalid force: tabulated times must cover [0, t_end]")

    length = grid.length
    ramp = keys.get("aperture.ramp", 0.1 * length)
    ap_lo = keys.get("aperture.lo", grid.x_min + 0.2 * length)
    ap_hi = keys.get("aperture.hi", grid.x_max - 0.2 * length)
    aperture = _build("aperture", Aperture, ap_lo, ap_hi, ramp)
    if ap_lo < grid.x_min or ap_hi > grid.x_max:
        raise ConfigurationError("invalid aperture: window must lie inside the grid")

    quarter = 0.25 * (ap_hi - ap_lo)
    window = (keys.get("window.lo", ap_lo + quarter), keys.get("window.hi", ap_hi - quarter))
    if not window[0] < window[1]:
        raise ConfigurationError("invalid window: lo < hi required")
    if window[0] < ap_lo or window[1] > ap_hi:
        raise ConfigurationError(
            "invalid window: trusted window must lie inside the aperture window"
        )

    snaps = keys.get("snapshots", (t_end,), _float_list)
    if any(b < a for a, b in zip(snaps, snaps[1:])):
        raise ConfigurationError("invalid snapshots: times must be sorted")
    if any(s < 0 or s > t_end for s in snaps):
        raise ConfigurationError("invalid snapshots: times must lie within [0, t_end]")
    for s in (*snaps, t_end):
        steps_for(s, scheme.dt)

    phase_times = keys.get("thresholds.phase_times", None, _float_list)
    thresholds = Thresholds(
        shape_max_dev=keys.get("thresholds.shape_max_dev", 1e-3),
        phase_max_dev=keys.get("thresholds.phase_max_dev"),
        phase_times=phase_times,
        peak_tol_dx=keys.get("thresholds.peak_tol_dx", 2.0),
        acceleration_tol=keys.get("thresholds.acceleration_tol"),
    )
    outputs = OutputSpec(
        directory=keys.get("output.dir", None, str),
        dump_fields=keys.get("output.dump_fields", False, _bool),
        thresholds=thresholds,
    )
    return Scenario(constants, force, grid, scheme, aperture, float(t_end), snaps, window, outputs)


def load_scenario(path) -> Scenario:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read scenario {path}: {exc}") from None
    return parse_scenario(text)


# Serialisation

def fmt(value) -> str:
    """Numbers with 17 significant digits; non-finite values as ``nan``/``inf``."""
    if value is None:
        return "nan"
    return format(float(value), ".17g")


def to_json(obj, indent: int = 2, _level: int = 0) -> str:
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format(float(obj), ".17g") if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{to_json(str(k))}: {to_json(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [f"{pad}{to_json(v, indent, _level + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


@dataclass
class RunResult:
    status: int
    summary: dict
    rows: list[dict]
    message: str = ""
    snapshots: list = field(default_factory=list)


def _constant_force_value(force: ForceProfile):
    if force.kind == "zero":
        return 0.0
    if force.kind == "constant":
        return force.f0
    return None


def analyse(scenario: Scenario) -> RunResult:
    """Evolve the scenario and assemble its reports (no file output)."""
    c, force = scenario.constants, scenario.force
    initial = ai_packet(c.b, 0.0, scenario.grid)
    try:
        snaps = evolve(
            initial,
            c,
            force,
            scenario.scheme,
            scenario.aperture,
            scenario.t_end,
            scenario.snapshot_times,
        )
    except DivergenceError as exc:
        summary = {"status": EXIT_DIVERGED, "diverged_at_step": exc.step_index}
        return RunResult(EXIT_DIVERGED, summary, [], str(exc))

    th = scenario.outputs.thresholds
    window = scenario.trusted_window
    dx = scenario.grid.dx
    half = 5.0 / c.b
    checks = []
    rows = []
    per_snapshot = []
    for t, f in snaps:
        state = analytic_propagator.analytic_state(c, force, t)
        shape = shape_error(f, c, force, t, window)
        try:
            phase = phase_check(f, c, force, t, window)
        except DegenerateWindowError:
            phase = None
        guess = predicted_peak(c, force, t)
        try:
            peak = locate_peak(f, guess - half, guess + half)
        except TrackingLostError:
            peak = None
        row = {
            "t": t,
            "x_peak_numeric": peak,
            "x_shift_analytic": state.x_shift,
            "x0": state.x0,
            "x1": state.x1,
            "shape_max_dev": shape.max_abs_dev,
            "shape_l2_dev": shape.l2_dev,
            "phase_max_dev": phase,
            "norm": f.norm(),
        }
        rows.append(row)
        per_snapshot.append(
            {
                **shape.as_record(),
                "window": list(shape.window),
                "phase_max_dev": phase,
                "x_peak_numeric": peak,
                "x_peak_predicted": guess,
                "x_shift_analytic": state.x_shift,
                "x0": state.x0,
                "x1": state.x1,
                "phase_slope": state.phase_slope,
                "phase_offset": state.phase_offset,
                "norm": f.norm(),
            }
        )
        if th.shape_max_dev is not None:
            checks.append(_check(f"shape_max_dev@t={t:g}", shape.max_abs_dev, th.shape_max_dev))
        if th.phase_max_dev is not None and (
            th.phase_times is None or any(abs(t - s) <= 1e-12 * max(1, s) for s in th.phase_times)
        ):
            checks.append(_check(f"phase_max_dev@t={t:g}", phase, th.phase_max_dev))
        if th.peak_tol_dx is not None:
            err = None if peak is None else abs(peak - guess) / dx
            checks.append(_check(f"peak_offset_dx@t={t:g}", err, th.peak_tol_dx))

    trajectory = None
    fit_accel = None
    classical = None
    f_const = _constant_force_value(force)
    if f_const is not None:
        classical = classical_acceleration(c, f_const)
    if len(snaps) >= 4:
        try:
            report = peak_trajectory(snaps, c, force)
            trajectory = report.as_record()
            fit_accel = report.fitted_acceleration
        except TrackingLostError as exc:
            trajectory = {"error": str(exc)}
    if th.acceleration_tol is not None and classical is not None:
        err = None if fit_accel is None else abs(fit_accel - classical)
        checks.append(_check("acceleration", err, th.acceleration_tol))

    status = EXIT_OK if all(ch["passed"] for ch in checks) else EXIT_THRESHOLD
    summary = {
        "status": status,
        "scheme": scenario.scheme.kind,
        "dt": scenario.scheme.dt,
        "grid": {"x_min": scenario.grid.x_min, "x_max": scenario.grid.x_max, "n": scenario.grid.n},
        "f_b": c.f_b,
        "trusted_window": list(window),
        "snapshots": per_snapshot,
        "trajectory": trajectory,
        "fitted_acceleration": fit_accel,
        "classical_acceleration": classical,
        "checks": checks,
    }
    return RunResult(status, summary, rows, snapshots=snaps)


def _check(name, value, limit):
    passed = value is not None and math.isfinite(value) and value <= limit
    return {"name": name, "value": value, "threshold": limit, "passed": bool(passed)}


def _write_csv(path: Path, columns, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(row[c]) for c in columns])
    path.write_text(buf.getvalue())


def run_scenario(scenario: Scenario, out_dir=None, dump_fields: bool | None = None) -> int:
    """Run ``scenario`` and write ``summary.json`` and ``trajectory.csv`` into ``out_dir``."""
    out = Path(resolve_out_dir(scenario, out_dir))
    dump = scenario.outputs.dump_fields if dump_fields is None else dump_fields
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        print(f"error: cannot write to {out}: {exc}", file=sys.stderr)
        return EXIT_IO

    result = analyse(scenario)
    try:
        (out / "summary.json").write_text(to_json(result.summary) + "\n")
        if result.status != EXIT_DIVERGED:
            _write_csv(out / "trajectory.csv", CSV_COLUMNS, result.rows)
        if dump and result.status != EXIT_DIVERGED:
            _dump_fields(result.snapshots, out)
    except OSError as exc:
        print(f"error: writing results failed: {exc}", file=sys.stderr)
        return EXIT_IO
    if result.status == EXIT_DIVERGED:
        print(f"error: {result.message}", file=sys.stderr)
    return result.status


def _dump_fields(snapshots, out: Path):
    fields_dir = out / "fields"
    fields_dir.mkdir(exist_ok=True)
    for i, (t, f) in enumerate(snapshots):
        a = f.amplitudes
        rows = [
            {"x": x, "re": z.real, "im": z.imag, "abs2": abs(z) ** 2}
            for x, z in zip(f.grid.x, a)
        ]
        _write_csv(fields_dir / f"field_{i:03d}_t{t:.6g}.csv", FIELD_COLUMNS, rows)


def resolve_out_dir(scenario: Scenario | None, out_dir=None) -> str:
    if out_dir:
        return str(out_dir)
    if scenario is not None and scenario.outputs.directory:
        return scenario.outputs.directory
    return os.environ.get(ENV_OUT, DEFAULT_OUT)


# Built-in verification battery

def _selfcheck_items():
    ai, ai_prime = airy_special.ai, airy_special.ai_prime
    oa = operator_algebra
    items = [
        ("ai(0) oracle", lambda: abs(ai(0.0) - 0.3550280538878172) <= 1e-12),
        ("ai(1) oracle", lambda: abs(ai(1.0) - 0.1352924163128814) <= 1e-12),
        ("ai first zero", lambda: abs(ai(-2.3381074104597670)) <= 1e-10),
        ("ai'(0) oracle", lambda: abs(ai_prime(0.0) + 0.2588194037928068) <= 1e-12),
        ("ai' first extremum", lambda: abs(ai_prime(-1.0187929716474711)) <= 1e-9),
    ]

    hbar, mass, b, t = 0.7, 1.3, 1.1, 0.9
    consts = PhysicalConstants(hbar, mass, b)
    fb = consts.f_b
    x = oa.OperatorExpr.x(hbar)
    p = oa.OperatorExpr.p(hbar)

    def factors():
        a_op, b_op = oa.free_space_generators(consts, t)
        return oa.zassenhaus(a_op, b_op, 4)

    expected = [
        x * (1j * fb * t / hbar),
        oa.hb_operator(consts) * (-1j * t / hbar),
        p * (-1j / hbar * fb * t ** 2 / (2 * mass)),
        oa.OperatorExpr.scalar(1j / hbar * fb ** 2 * t ** 3 / (6 * mass), hbar),
    ]
    labels = ["position phase", "airy hamiltonian", "shift", "scalar phase"]
    for i, label in enumerate(labels):
        items.append(
            (f"zassenhaus {label} factor", lambda i=i: len(factors()) > i and factors()[i].isclose(expected[i], 1e-12))
        )
    items.append(("zassenhaus termination", lambda: factors().exact and len(factors()) == 4))
    items.append(
        (
            "zassenhaus matrix equivalence",
            lambda: oa.zassenhaus_matrix_deviation(*oa.free_space_generators(consts, t), dim=160, block=10)
            <= 1e-8,
        )
    )

    def forced_commutator():
        rng = np.random.default_rng(24)
        for f1, f2 in rng.uniform(-3, 3, size=(5, 2)):
            lhs = oa.commutator(oa.forced_hamiltonian(consts, f1), oa.forced_hamiltonian(consts, f2))
            rhs = p * (1j * hbar / mass * (f2 - f1))
            if not lhs.isclose(rhs, 1e-12):
                return False
        return True

    items.append(("commutator of forced hamiltonians", forced_commutator))

    def shift_routes(force, t_end):
        def check():
            for s in np.linspace(0.1, t_end, 7):
                a = analytic_propagator.x1(consts, force, s)
                k = analytic_propagator.x1_kernel(consts, force, s)
                if abs(a - k) > 1e-10 * max(abs(a), 1e-300):
                    return False
            return True

        return check

    tab = ForceProfile.tabulated([0.0, 0.4, 1.1, 2.0, 3.0], [0.3, -1.2, 0.8, 2.0, -0.5])
    items.append(("impulse vs kernel shift (tabulated)", shift_routes(tab, 3.0)))
    items.append(
        ("impulse vs kernel shift (sinusoid)", shift_routes(ForceProfile.sinusoid(1.0, 1.0), math.pi))
    )
    return items


def selfcheck(stream=None) -> int:
    stream = stream or sys.stdout
    ok = True
    for name, check in _selfcheck_items():
        try:
            passed = bool(check())
        except Exception as exc:  # a crashing check is a failing check
            passed = False
            name = f"{name} ({type(exc).__name__}: {exc})"
        ok &= passed
        print(f"{'pass' if passed else 'FAIL'}  {name}", file=stream)
    return EXIT_OK if ok else EXIT_THRESHOLD


# Command line

def _run_file(path, out_dir, dump_fields):
    try:
        scenario = load_scenario(path)
    except ConfigurationError as exc:
        print(f"error: {path}: {exc}", file=sys.stderr)
        return EXIT_IO
    return run_scenario(scenario, out_dir, dump_fields or None)


def _batch_job(args):
    path, out_dir = args
    return str(path), _run_file(path, out_dir, False)


def batch(directory, jobs: int = 1, out_dir=None) -> int:
    paths = sorted(Path(directory).glob("*.toml"))
    if not paths:
        print(f"error: no *.toml scenarios in {directory}", file=sys.stderr)
        return EXIT_IO
    base = Path(out_dir or os.environ.get(ENV_OUT, DEFAULT_OUT))
    work = [(p, base / p.stem) for p in paths]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_batch_job, work))
    else:
        results = [_batch_job(w) for w in work]
    for path, status in results:
        print(f"{status}  {path}")
    return max(status for _, status in results)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="airy-evolve", description="Analytic and numeric evolution of Airy packets"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one scenario file")
    run.add_argument("scenario")
    run.add_argument("--out", help=f"output directory (default: ${ENV_OUT} or ./{DEFAULT_OUT})")
    run.add_argument("--dump-fields", action="store_true", help="write per-snapshot field CSVs")
    sub.add_parser("selfcheck", help="run the built-in verification battery")
    bat = sub.add_parser("batch", help="run every *.toml scenario in a directory")
    bat.add_argument("directory")
    bat.add_argument("--jobs", type=int, default=1)
    bat.add_argument("--out")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return _run_file(args.scenario, args.out, args.dump_fields)
    if args.command == "selfcheck":
        return selfcheck()
    if args.jobs < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_IO
    return batch(args.directory, args.jobs, args.out)
