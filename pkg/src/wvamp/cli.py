"""Command-line interface: ``shift``, ``scan``, ``verify`` and ``probe-dump``.

A run is described by a JSON scenario file (``--scenario``); command-line
flags override individual fields.  Data files contain no timestamps, so
identical scenarios and seeds give byte-identical output; run metadata goes
to a ``.meta.json`` sidecar next to ``--out``.

Exit codes: 0 ok, 1 a selected claim failed, 2 invalid input,
3 numerical failure, 4 indeterminate claims.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import platform
import sys
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from importlib import metadata as importlib_metadata
from pathlib import Path
from typing import Any, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from . import claims as claims_mod
from .errors import InputError, NumericalError, ScenarioError, SingularProbe, WvampError
from .fourier import (
    MOMENTUM,
    POSITION,
    UNITS,
    momentum_table,
    position_mean,
    transform_to_position,
)
from .model import SpinScenario, WeakValue, self_test, weak_value_spin
from .probes import probe_from_params
from .quadrature import QuadratureConfig, pointer_shift

EXIT_OK = 0
EXIT_CLAIM_FAILED = 1
EXIT_INPUT = 2
EXIT_NUMERIC = 3
EXIT_INDETERMINATE = 4

FAMILIES = ("gaussian", "ssh_optimal", "arbitrary_shift", "variational", "tabulated")
SCAN_PARAMS = {
    "theta": "theta [rad]",
    "alpha": "alpha",
    "W": f"W [{UNITS[MOMENTUM]}]",
    "n": "n",
}
REPORT_FIELDS = ("shift", "mean_initial", "mean_final", "error_estimate")


# ---------------------------------------------------------------------------
# scenario schema


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class WeakValueInput(_Strict):
    """Either an explicit complex value ``{re, im}`` or a spin angle ``{theta_radians}``."""

    re: float | None = None
    im: float | None = None
    theta_radians: float | None = None

    @model_validator(mode="after")
    def _exactly_one_form(self):
        explicit = self.re is not None or self.im is not None
        spin = self.theta_radians is not None
        if explicit == spin:
            raise ValueError("give exactly one of {re, im} or {theta_radians}")
        if explicit and self.re is None:
            raise ValueError("explicit weak value needs 're'")
        return self

    def resolve(self) -> WeakValue:
        if self.theta_radians is not None:
            return weak_value_spin(SpinScenario(self.theta_radians))
        return WeakValue(complex(self.re, self.im or 0.0))


class ProbeInput(_Strict):
    family: Literal[FAMILIES]  # type: ignore[valid-type]
    params: dict[str, Any] = Field(default_factory=dict)
    label: str | None = None


class NumericsInput(_Strict):
    rel_tol: float = Field(1e-10, gt=0)
    abs_tol: float = Field(1e-12, gt=0)
    max_subdivisions: int = Field(4096, gt=0)
    singularity_epsilon: float = Field(0.0, ge=0)
    window_half_width: float = Field(200.0, gt=0)

    def config(self) -> QuadratureConfig:
        return QuadratureConfig(self.rel_tol, self.abs_tol, self.max_subdivisions,
                                self.singularity_epsilon)


class Scenario(_Strict):
    weak_value: WeakValueInput | None = None
    probe: ProbeInput | list[ProbeInput] | None = None
    numerics: NumericsInput = Field(default_factory=NumericsInput)
    seed: int = 0

    @property
    def probes(self) -> list[ProbeInput]:
        if self.probe is None:
            return []
        return list(self.probe) if isinstance(self.probe, list) else [self.probe]

    def labels(self) -> list[str]:
        out = []
        for i, p in enumerate(self.probes):
            out.append(p.label or (p.family if len(self.probes) == 1 else f"{i}_{p.family}"))
        return out


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def load_scenario(args) -> Scenario:
    """Read ``--scenario`` (if any) and apply flag overrides before validation."""
    raw: dict[str, Any] = {}
    if args.scenario:
        try:
            raw = json.loads(Path(args.scenario).read_text())
        except OSError as exc:
            raise ScenarioError(f"cannot read scenario file: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"scenario file is not valid JSON: {exc}") from None
        if not isinstance(raw, dict):
            raise ScenarioError("scenario file must contain a JSON object")
    if args.theta is not None:
        raw["weak_value"] = {"theta_radians": args.theta}
    if args.aw is not None:
        raw["weak_value"] = {"re": args.aw[0], "im": args.aw[1]}
    if args.probe is not None:
        raw["probe"] = {"family": args.probe, "params": {}}
    if args.param:
        probe = raw.get("probe")
        if not isinstance(probe, dict):
            raise ScenarioError("--param needs exactly one probe (use --probe or a single-probe scenario)")
        probe.setdefault("params", {})
        for item in args.param:
            key, sep, value = item.partition("=")
            if not sep or not key:
                raise ScenarioError(f"--param expects key=value, got {item!r}")
            probe["params"][key] = _parse_value(value)
    if args.epsilon is not None:
        raw.setdefault("numerics", {})["singularity_epsilon"] = args.epsilon
    if args.seed is not None:
        raw["seed"] = args.seed
    try:
        return Scenario.model_validate(raw)
    except ValidationError as exc:
        raise ScenarioError(_validation_message(exc)) from None


def _validation_message(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        parts.append(f"{loc}: {err['msg']}")
    return "invalid scenario: " + "; ".join(parts)


def _require(scenario: Scenario, need_probe: bool = True) -> WeakValue:
    if scenario.weak_value is None:
        raise ScenarioError("scenario needs a weak_value (or --theta / --aw)")
    if need_probe and not scenario.probes:
        raise ScenarioError("scenario needs a probe (or --probe)")
    return scenario.weak_value.resolve()


def _build_probe(entry: ProbeInput, aw: WeakValue, seed: int):
    params = dict(entry.params)
    if entry.family == "tabulated" and "path" not in params:
        params.setdefault("seed", seed)
    return probe_from_params(entry.family, params, aw)


# ---------------------------------------------------------------------------
# output helpers


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value) + 0.0:.17g}"  # + 0.0 drops the sign of zero
    return str(value)


def _csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _json_default(obj):
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _unsigned_zero(obj):
    if isinstance(obj, float):
        return obj + 0.0
    if isinstance(obj, dict):
        return {k: _unsigned_zero(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_unsigned_zero(v) for v in obj]
    return obj


def _json_text(obj) -> str:
    return json.dumps(_unsigned_zero(obj), indent=2, sort_keys=True, default=_json_default) + "\n"


def _emit(text: str, args) -> None:
    if args.out:
        path = Path(args.out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
        _write_sidecar(Path(str(path) + ".meta.json"), args)
    else:
        sys.stdout.write(text)


def _package_version() -> str:
    try:
        return importlib_metadata.version("artifact")
    except importlib_metadata.PackageNotFoundError:
        return "unknown"


def _write_sidecar(path: Path, args) -> None:
    meta = {
        "command": args.command,
        "argv": sys.argv[1:],
        "timestamp_utc": datetime.now(timezone.utc).isoformat(),
        "package_version": _package_version(),
        "python": platform.python_version(),
        "numpy": np.__version__,
    }
    path.write_text(_json_text(meta))


def _weak_value_dict(aw: WeakValue) -> dict:
    return {"re": aw.re, "im": aw.im}


# ---------------------------------------------------------------------------
# commands


def cmd_shift(args) -> int:
    scenario = load_scenario(args)
    aw = _require(scenario)
    cfg = scenario.numerics.config()
    records = []
    for entry, label in zip(scenario.probes, scenario.labels()):
        probe = _build_probe(entry, aw, scenario.seed)
        report = pointer_shift(probe, aw, cfg)
        record = {"label": label, "weak_value": _weak_value_dict(aw), "probe": probe.to_dict()}
        record.update(report.as_dict())
        if args.position_check:
            record.update(_position_check(probe, aw, cfg, report, scenario.numerics.window_half_width))
        records.append(record)
    if args.format == "csv":
        keys = ["label", *REPORT_FIELDS, "n_initial", "n_final", "mean_kernel_norm",
                "boundary_term_initial", "boundary_term_final", "finite_difference_derivative"]
        if args.position_check:
            keys += ["position_mean_initial", "position_mean_final"]
        header = [f"{k} [{UNITS[POSITION]}]" if k in ("shift", "mean_initial", "mean_final") else k
                  for k in keys]
        _emit(_csv_text(header, [[r[k] for k in keys] for r in records]), args)
    else:
        _emit(_json_text(records[0] if len(records) == 1 else records), args)
    return EXIT_OK


def _position_check(probe, aw, cfg, report, half_width: float, step: float = 0.25) -> dict:
    """Windowed position-space means of the initial and final states."""
    out = {}
    for key, centre, state in (("position_mean_initial", report.mean_initial, None),
                               ("position_mean_final", report.mean_final, aw)):
        x = np.arange(centre - half_width, centre + half_width + 0.5 * step, step)
        table = transform_to_position(probe, x, cfg, aw=state)
        out[key] = position_mean(table, centre, half_width)
    return out


def _scan_values(lo: float, hi: float, steps: int, log: bool) -> np.ndarray:
    if steps < 1:
        raise ScenarioError("--steps must be >= 1")
    if log:
        if lo <= 0 or hi <= 0:
            raise ScenarioError("log spacing needs a positive range")
        return np.geomspace(lo, hi, steps)
    return np.linspace(lo, hi, steps)


def _apply_param(raw: dict, param: str, value: float) -> dict:
    """Return a copy of a scenario dump with the scanned parameter set."""
    raw = json.loads(json.dumps(raw))
    if param == "theta":
        raw["weak_value"] = {"theta_radians": value}
        return raw
    family, key = {"alpha": ("arbitrary_shift", "alpha"),
                   "W": ("gaussian", "width"),
                   "n": ("arbitrary_shift", "n")}[param]
    probes = raw["probe"] if isinstance(raw["probe"], list) else [raw["probe"]]
    for p in probes:
        if p["family"] == family:
            p["params"][key] = int(round(value)) if param == "n" else value
    return raw


def _scan_row(task) -> list:
    raw, param, value = task
    scenario = Scenario.model_validate(_apply_param(raw, param, value))
    cfg = scenario.numerics.config()
    cells = []
    try:
        aw = scenario.weak_value.resolve()
    except WvampError as exc:
        return _failed_cells(len(scenario.probes), exc)
    for entry in scenario.probes:
        try:
            report = pointer_shift(_build_probe(entry, aw, scenario.seed), aw, cfg)
            cells.append(([getattr(report, f) for f in REPORT_FIELDS], "ok"))
        except WvampError as exc:
            cells.append(([math.nan] * len(REPORT_FIELDS), f"error:{type(exc).__name__}"))
    return cells


def _failed_cells(n: int, exc: Exception) -> list:
    return [([math.nan] * len(REPORT_FIELDS), f"error:{type(exc).__name__}")] * n


def cmd_scan(args) -> int:
    scenario = load_scenario(args)
    if args.scan_param != "theta":
        _require(scenario)
    elif not scenario.probes:
        raise ScenarioError("scenario needs a probe (or --probe)")
    family = {"alpha": "arbitrary_shift", "n": "arbitrary_shift", "W": "gaussian"}.get(args.scan_param)
    if family and not any(p.family == family for p in scenario.probes):
        raise ScenarioError(f"scanning {args.scan_param!r} needs a probe of family {family!r}")
    values = _scan_values(args.range[0], args.range[1], args.steps, args.log)
    if args.scan_param == "n":
        if np.any(values < 1):
            raise ScenarioError("n must be a positive integer")
        values = np.round(values).astype(int)
    elif args.scan_param == "theta":
        for v in values:
            SpinScenario(float(v))  # reject out-of-range angles before running
    raw = scenario.model_dump(exclude_none=True)
    if args.scan_param == "theta":
        raw.pop("weak_value", None)
    tasks = [(raw, args.scan_param, v.item()) for v in values]
    if args.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_scan_row, tasks))  # map keeps input order
    else:
        results = [_scan_row(t) for t in tasks]

    labels = scenario.labels()
    unit = f" [{UNITS[POSITION]}]"
    names = ["shift" + unit, "mean_initial" + unit, "mean_final" + unit, "err"]
    if len(labels) == 1:
        header = [SCAN_PARAMS[args.scan_param], *names, "status"]
    else:
        header = [SCAN_PARAMS[args.scan_param]]
        for label in labels:
            header += [f"{n.split(' ')[0]}[{label}]" + (unit if n != "err" else "") for n in names]
        header.append("status")
    rows, any_ok = [], False
    for value, cells in zip(values, results):
        row = [value]
        statuses = []
        for numbers, status in cells:
            row += numbers
            statuses.append(status)
            any_ok |= status == "ok"
        row.append("ok" if all(s == "ok" for s in statuses) else ";".join(statuses))
        rows.append(row)

    if args.format == "json":
        records = [dict(zip(header, r)) for r in rows]
        _emit(_json_text({"param": args.scan_param, "rows": records}), args)
    else:
        _emit(_csv_text(header, rows), args)
    return EXIT_OK if any_ok else EXIT_NUMERIC


def cmd_verify(args) -> int:
    ids = list(claims_mod.CLAIM_IDS)
    if args.claims:
        ids = [c.strip().upper() for item in args.claims for c in item.split(",") if c.strip()]
    unknown = [c for c in ids if c not in claims_mod.REGISTRY]
    if unknown:
        raise ScenarioError(f"unknown claim id(s) {unknown}; choose from {list(claims_mod.CLAIM_IDS)}")
    cfg = QuadratureConfig()
    if args.scenario:
        scenario = load_scenario(args)
        num = scenario.numerics
        cfg = QuadratureConfig(num.rel_tol, num.abs_tol, num.max_subdivisions)
    out_dir = Path(args.out or "verify_out")
    results = claims_mod.run_claims(ids, cfg, out_dir, seed=args.seed)
    _write_sidecar(out_dir / "run_metadata.json", args)

    width = max(len(r.description) for r in results)
    lines = [f"{'claim':<6}{'verdict':<15}description", "-" * (21 + width)]
    for r in results:
        lines.append(f"{r.id:<6}{r.verdict:<15}{r.description}")
    lines.append(f"report: {out_dir / 'report.json'}")
    print("\n".join(lines))

    verdicts = {r.verdict for r in results}
    if claims_mod.FAIL in verdicts:
        return EXIT_CLAIM_FAILED
    if claims_mod.INDETERMINATE in verdicts:
        return EXIT_INDETERMINATE
    return EXIT_OK


def _grid(spec, default_lo, default_hi, default_step) -> np.ndarray:
    lo, hi, step = spec if spec is not None else (default_lo, default_hi, default_step)
    if not (step > 0 and hi > lo):
        raise ScenarioError("grid needs LO < HI and STEP > 0")
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    grid = lo + step * np.arange(count)
    if abs(grid[-1] - hi) < 1e-9 * step:
        grid[-1] = hi  # keep the end point inside a closed support
    return grid


def cmd_probe_dump(args) -> int:
    scenario = load_scenario(args)
    aw = _require(scenario)
    if len(scenario.probes) != 1:
        raise ScenarioError("probe-dump needs exactly one probe")
    cfg = scenario.numerics.config()
    probe = _build_probe(scenario.probes[0], aw, scenario.seed)
    if probe.singular_points and cfg.singularity_epsilon == 0:
        raise SingularProbe("probe has singular points; set numerics.singularity_epsilon > 0")
    state = aw if args.state == "final" else None
    if args.space == MOMENTUM:
        iv = probe.support
        k = _grid(args.grid, iv.k_minus, iv.k_plus, iv.width / 400)
        k = k[iv.contains(k)]
        eps = cfg.singularity_epsilon
        for s in probe.singular_points:
            k = k[np.abs(k - s) > eps]
        table = momentum_table(probe, k, aw=state)
    else:
        table = transform_to_position(probe, _grid(args.grid, -20.0, 20.0, 0.1), cfg, aw=state)
    if args.format == "json":
        _emit(table.to_json() + "\n", args)
    else:
        buf = io.StringIO()
        table.to_csv(buf)
        _emit(buf.getvalue(), args)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--scenario", help="JSON scenario file")
    g.add_argument("--out", help="output file (verify: output directory); default stdout")
    g.add_argument("--format", choices=("json", "csv"), default=None)
    g.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    g.add_argument("--jobs", type=int, default=1, help="worker processes for scans")
    o = common.add_argument_group("scenario overrides")
    o.add_argument("--theta", type=float, help="spin post-selection angle in radians")
    o.add_argument("--aw", type=float, nargs=2, metavar=("RE", "IM"), help="explicit weak value")
    o.add_argument("--probe", choices=FAMILIES, help="probe family (replaces the scenario probe)")
    o.add_argument("--param", action="append", metavar="KEY=VALUE",
                   help="probe parameter, value parsed as JSON when possible (repeatable)")
    o.add_argument("--epsilon", type=float, help="singularity exclusion half-width")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(prog="wvamp", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("shift", parents=[common], help="pointer shift for the scenario probe(s)")
    p.add_argument("--position-check", action="store_true",
                   help="also compute windowed position-space means")
    p.set_defaults(func=cmd_shift, default_format="json")

    p = sub.add_parser("scan", parents=[common], help="shift as a function of one parameter")
    p.add_argument("scan_param", metavar="param", choices=tuple(SCAN_PARAMS))
    p.add_argument("--range", type=float, nargs=2, metavar=("LO", "HI"), required=True)
    p.add_argument("--steps", type=int, required=True, help="number of data rows")
    p.add_argument("--log", action="store_true", help="geometric spacing")
    p.set_defaults(func=cmd_scan, default_format="csv")

    p = sub.add_parser("verify", parents=[common], help="run the claim suite")
    p.add_argument("--claims", action="append", help="claim ids, comma separated (default all)")
    p.set_defaults(func=cmd_verify, default_format="json")

    p = sub.add_parser("probe-dump", parents=[common], help="tabulate a probe in k or x")
    p.add_argument("--space", choices=(MOMENTUM, POSITION), default=MOMENTUM)
    p.add_argument("--grid", type=float, nargs=3, metavar=("LO", "HI", "STEP"))
    p.add_argument("--state", choices=("initial", "final"), default="initial")
    p.set_defaults(func=cmd_probe_dump, default_format="csv")
    return parser


def _fail(exc: Exception, code: int) -> int:
    print(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": code}),
          file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.format is None:
        args.format = args.default_format
    if args.jobs < 1:
        return _fail(ScenarioError("--jobs must be >= 1"), EXIT_INPUT)
    try:
        self_test()
        return args.func(args)
    except (InputError, ValueError, KeyError) as exc:
        return _fail(exc, EXIT_INPUT)
    except (NumericalError, ArithmeticError, RuntimeError) as exc:
        return _fail(exc, EXIT_NUMERIC)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
