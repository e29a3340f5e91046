"""
Command-line front end.

    spinsemi quantum       [--config cfg.json] [--out DIR]
    spinsemi semiclassical [--config cfg.json] [--out DIR] [--policy real-only|full]
    spinsemi rootmap       --tau 0.5 [--config cfg.json] [--out DIR]
    spinsemi diagnostics   [--config cfg.json] [--out DIR]

The configuration file is JSON; every key is optional and the defaults
reproduce j = 4.5, s0A = s0B = 1, lambda = 1 over 0 <= tau <= 1. Complex
numbers are written as {"re": x, "im": y}.

Exit codes: 0 success, 2 configuration (or output path) error, 3 numerical
failure, in which case an ``error.json`` report is written as well.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .classical import (
    AnalyticTrajectory,
    PhasePoint,
    critical_tau,
    det_M_star,
    det_M_star_closed_form,
    real_point,
    stability,
    verify_variaS,
)
from .entropy import FilterPolicy, family_terms, image_kind, semiclassical_entropy
from .numerics import det
from .quantum import QuantumParams, exact_entropy_series
from .saddle import GridSpec, RootRegistry, scan_roots, transcendental_residual

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

SEED_POLICIES = ("scan+continue", "real-only")


class ConfigError(ValueError):
    """Invalid configuration or unusable output location."""


def parse_complex(value, name: str = "value") -> complex:
    """Accept {"re": x, "im": y}, [x, y] or a plain number."""
    try:
        if isinstance(value, dict):
            extra = set(value) - {"re", "im"}
            if extra:
                raise ConfigError(f"{name}: unexpected keys {sorted(extra)}")
            return complex(float(value.get("re", 0.0)), float(value.get("im", 0.0)))
        if isinstance(value, (list, tuple)):
            if len(value) != 2:
                raise ConfigError(f"{name}: expected [re, im]")
            return complex(float(value[0]), float(value[1]))
        if isinstance(value, bool):
            raise ConfigError(f"{name}: expected a number")
        return complex(value)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{name}: cannot read {value!r} as a complex number") from exc


def complex_json(z: complex) -> dict:
    z = complex(z)
    return {"re": _json_float(z.real), "im": _json_float(z.imag)}


def _json_float(x: float):
    return float(x) if math.isfinite(x) else None


_FILTER_KEYS = {
    "maxValue": "max_value",
    "growthRate": "growth_rate",
    "growthFloor": "growth_floor",
    "causticTol": "caustic_tol",
    "negligible": "negligible",
}

_KEYS = {
    "j": "j",
    "s0A": "s0A",
    "s0B": "s0B",
    "lambda": "lam",
    "tauMin": "tau_min",
    "tauMax": "tau_max",
    "tauSteps": "tau_steps",
    "gridResolution": "grid_resolution",
    "mapResolution": "map_resolution",
    "continuationStep": "continuation_step",
    "rescanEvery": "rescan_every",
    "outputDir": "output_dir",
    "seedPolicy": "seed_policy",
}


@dataclass(frozen=True)
class RunConfig:
    """
    Validated run configuration.

    ``grid_resolution`` sets the n x n root-scan grid; ``map_resolution``
    the (coarser) grid written to root maps.
    """

    j: float = 4.5
    s0A: complex = 1.0 + 0j
    s0B: complex = 1.0 + 0j
    lam: float = 1.0
    tau_min: float = 0.0
    tau_max: float = 1.0
    tau_steps: int = 101
    grid_resolution: int = 600
    map_resolution: int = 200
    continuation_step: float = 1e-3
    rescan_every: float = 0.02
    filters: FilterPolicy = field(default_factory=FilterPolicy)
    output_dir: str = "."
    seed_policy: str = "scan+continue"

    def __post_init__(self):
        two_j = 2 * self.j
        if self.j <= 0 or abs(two_j - round(two_j)) > 1e-12:
            raise ConfigError(f"j must be a positive half-integer, got {self.j}")
        if self.lam == 0 or not math.isfinite(self.lam):
            raise ConfigError("lambda must be finite and non-zero")
        if not self.tau_min < self.tau_max:
            raise ConfigError("tauMin must be smaller than tauMax")
        if self.tau_steps < 2:
            raise ConfigError("tauSteps must be at least 2")
        if self.grid_resolution < 2 or self.map_resolution < 2:
            raise ConfigError("grid resolutions must be at least 2")
        if self.continuation_step <= 0 or self.rescan_every <= 0:
            raise ConfigError("continuationStep and rescanEvery must be positive")
        if self.seed_policy not in SEED_POLICIES:
            raise ConfigError(f"seedPolicy must be one of {SEED_POLICIES}")

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object")
        kwargs = {}
        for key, value in data.items():
            if key == "filters":
                kwargs["filters"] = _filters_from_dict(value)
            elif key in _KEYS:
                kwargs[_KEYS[key]] = value
            else:
                raise ConfigError(f"unknown configuration key {key!r}")
        try:
            for name in ("s0A", "s0B"):
                if name in kwargs:
                    kwargs[name] = parse_complex(kwargs[name], name)
            for name in ("j", "lam", "tau_min", "tau_max", "continuation_step", "rescan_every"):
                if name in kwargs:
                    kwargs[name] = float(kwargs[name])
            for name in ("tau_steps", "grid_resolution", "map_resolution"):
                if name in kwargs:
                    v = kwargs[name]
                    if isinstance(v, bool) or int(v) != v:
                        raise ConfigError(f"{name} must be an integer")
                    kwargs[name] = int(v)
            if "output_dir" in kwargs:
                kwargs["output_dir"] = str(kwargs["output_dir"])
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc
        return cls(**kwargs)

    def to_dict(self) -> dict:
        inv = {v: k for k, v in _KEYS.items()}
        out = {}
        for name, value in asdict(self).items():
            if name == "filters":
                finv = {v: k for k, v in _FILTER_KEYS.items()}
                out["filters"] = {finv[k]: v for k, v in value.items()}
            elif isinstance(value, complex):
                out[inv[name]] = complex_json(value)
            else:
                out[inv[name]] = value
        return out

    @property
    def params(self) -> QuantumParams:
        try:
            return QuantumParams(self.j, self.s0A, self.s0B, self.lam)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def tau_grid(self) -> np.ndarray:
        return np.linspace(self.tau_min, self.tau_max, self.tau_steps)

    @property
    def grid(self) -> GridSpec:
        return GridSpec(n_radial=self.grid_resolution, n_angular=self.grid_resolution)


def _filters_from_dict(data) -> FilterPolicy:
    if not isinstance(data, dict):
        raise ConfigError("filters must be a JSON object")
    kwargs = {}
    for key, value in data.items():
        if key not in _FILTER_KEYS:
            raise ConfigError(f"unknown filter threshold {key!r}")
        try:
            kwargs[_FILTER_KEYS[key]] = float(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"filter threshold {key} must be a number") from exc
    try:
        return FilterPolicy(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | None, overrides: dict | None = None) -> RunConfig:
    data = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if overrides:
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object")
        data = {**data, **overrides}
    return RunConfig.from_dict(data)


# -- output helpers -------------------------------------------------------------

def _fmt(x) -> str:
    x = float(x)
    return f"{x:.15g}" if math.isfinite(x) else str(x)


def _out_dir(config: RunConfig) -> Path:
    out = Path(config.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc.strerror}") from exc
    return out


def _write_text(path: Path, text: str) -> Path:
    try:
        path.write_text(text)
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc.strerror}") from exc
    return path


def _write_rows(path: Path, rows) -> Path:
    try:
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerows(rows)
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc.strerror}") from exc
    return path


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=1, allow_nan=False) + "\n"


def tau_label(tau: complex) -> str:
    tau = complex(tau)
    if tau.imag == 0:
        return f"{tau.real:.6g}"
    return f"{tau.real:.6g}{tau.imag:+.6g}i"


def parse_tau(text: str) -> complex:
    """Real or complex tau; accepts Python literals such as '0.5' or '0.0354j'."""
    try:
        return complex(text.replace(" ", "").replace("i", "j"))
    except ValueError as exc:
        raise ConfigError(f"cannot read tau {text!r}") from exc


# -- commands -------------------------------------------------------------------

def cmd_quantum(config: RunConfig) -> Path:
    series = exact_entropy_series(config.params, config.tau_grid)
    rows = [["tau", "S_exact"]]
    rows += [[_fmt(t), _fmt(s)] for t, s in zip(series.tau, series.exact)]
    return _write_rows(_out_dir(config) / "quantum_entropy.csv", rows)


def cmd_semiclassical(config: RunConfig) -> tuple[Path, Path]:
    params = config.params
    out = _out_dir(config)
    registry = RootRegistry(params, config.seed_policy, config.grid, config.rescan_every)
    series = semiclassical_entropy(params, config.tau_grid, registry, config.filters,
                                   step=config.continuation_step)
    rows = [["tau", "S_sc", "S_exact", "nSetsActive"]]
    for t, s, e, n in zip(series.tau, series.semiclassical, series.exact, series.n_active):
        rows.append([_fmt(t), _fmt(s.real), _fmt(e), str(int(n))])
    csv_path = _write_rows(out / "semiclassical_entropy.csv", rows)

    records = []
    for bid in sorted(series.branches, key=lambda b: (b != "real", b)):
        log = series.branches[bid]
        records.append({
            "branchId": bid,
            "tau": log["tau"],
            "x1A": [complex_json(x) for x in log["x1A"]],
            "value_re": [_json_float(v.real) for v in log["value"]],
            "value_im": [_json_float(v.imag) for v in log["value"]],
            "filteredReason": log["reason"],
        })
    head = {
        "seedPolicy": config.seed_policy,
        "maxImagEntropy": _json_float(float(np.max(np.abs(series.semiclassical.imag)))),
    }
    # one branch per line keeps large files diff-able
    body = ",\n".join(json.dumps(r, allow_nan=False) for r in records)
    text = json.dumps(head, allow_nan=False)[:-1] + ', "branches": [\n' + body + "\n]}\n"
    json_path = _write_text(out / "branches.json", text)
    return csv_path, json_path


def cmd_rootmap(config: RunConfig, tau: complex) -> Path:
    params = config.params
    T = params.time(tau)
    rows = [["# section: grid"], ["re_x", "im_x", "Re_f", "Im_f"]]
    z = GridSpec(n_radial=config.map_resolution, n_angular=config.map_resolution).points().ravel()
    f = transcendental_residual(z, params, T)
    for x, fx in zip(z, f):
        rows.append([_fmt(x.real), _fmt(x.imag), _fmt(fx.real), _fmt(fx.imag)])

    records = scan_roots(params, T, config.grid, tau)
    roots = np.array([complex(r.x1A) for r in records])
    det_F, log_w = family_terms(roots, params, T)
    rows += [["# section: roots"], ["re", "im", "converged", "filtered", "kind"]]
    for x, d, lw in zip(roots, det_F, log_w):
        res = abs(transcendental_residual(complex(x), params, T))
        reason = ""
        if not (np.isfinite(d) and np.isfinite(lw)):
            reason = "non-finite"
        elif abs(d) < config.filters.caustic_tol:
            reason = "caustic"
        else:
            log_abs = lw.real - 0.5 * math.log(abs(d))
            if log_abs > math.log(config.filters.max_value):
                reason = "divergent"
            elif log_abs < math.log(config.filters.negligible):
                reason = "negligible"
        rows.append([_fmt(x.real), _fmt(x.imag), str(int(res < 1e-10)), reason, image_kind(x)])
    return _write_rows(_out_dir(config) / f"rootmap_{tau_label(tau)}.csv", rows)


def _variaS_samples(params: QuantumParams) -> list[tuple[str, PhasePoint]]:
    rng = np.random.default_rng(20240611)
    samples = [("real", real_point(params))]
    base = real_point(params).as_vector()
    for k in range(2):
        kick = 0.2 * (rng.standard_normal(4) + 1j * rng.standard_normal(4))
        samples.append((f"complex-{k + 1}", PhasePoint.from_vector(base + kick)))
    return samples


def cmd_diagnostics(config: RunConfig) -> Path:
    params = config.params
    tau = config.tau_grid
    p0 = real_point(params)
    det_m, det_star, det_closed = [], [], []
    for t in tau:
        T = params.time(t)
        det_m.append(det(stability(p0, params, T).full()))
        det_star.append(det_M_star(p0, params, T, check=False))
        det_closed.append(det_M_star_closed_form(params, T))
    star_err = max(abs(a - b) for a, b in zip(det_star, det_closed))

    entries = []
    for t in (0.1, 0.5):
        T = params.time(t)
        for name, p in _variaS_samples(params):
            traj = AnalyticTrajectory(p, T, params)
            for xi in (1, -1):
                rep = verify_variaS(traj, params, xi)
                entries.append({"tau": t, "trajectory": name, "xi": xi,
                                **{k: rep[k] for k in ("gradient", "mixed", "final")}})
    try:
        tc = complex_json(critical_tau(params))
    except ZeroDivisionError:
        tc = None
    doc = {
        "params": {"j": params.j, "s0A": complex_json(params.s0A), "s0B": complex_json(params.s0B),
                   "lambda": params.lam},
        "tau": [float(t) for t in tau],
        "detM": [complex_json(v) for v in det_m],
        "detMstar": [complex_json(v) for v in det_star],
        "detMstarClosedForm": [complex_json(v) for v in det_closed],
        "maxDetMstarError": star_err,
        "tauCritical": tc,
        "variaS": {
            "samples": len(entries),
            "maxResidual": max(max(e["gradient"], e["mixed"], e["final"]) for e in entries),
            "entries": entries,
        },
    }
    return _write_text(_out_dir(config) / "diagnostics.json", _dump_json(doc))


# -- entry point ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spinsemi", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("quantum", "exact linear entropy -> quantum_entropy.csv"),
        ("semiclassical", "semiclassical linear entropy -> semiclassical_entropy.csv, branches.json"),
        ("rootmap", "transcendental-equation samples and roots -> rootmap_<tau>.csv"),
        ("diagnostics", "stability and action checks -> diagnostics.json"),
    ):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--out", help="output directory (overrides outputDir)")
        if name == "semiclassical":
            p.add_argument("--policy", choices=("real-only", "full"),
                           help="seed policy (overrides seedPolicy; full = scan+continue)")
        if name == "rootmap":
            p.add_argument("--tau", required=True, help="real or complex tau, e.g. 0.5 or 0.0354j")
    return parser


def _error_report(out_dir: str | None, command: str, exc: Exception) -> None:
    report = {"command": command, "error": type(exc).__name__, "message": str(exc)}
    text = _dump_json(report)
    sys.stderr.write(text)
    if out_dir:
        try:
            Path(out_dir).mkdir(parents=True, exist_ok=True)
            (Path(out_dir) / "error.json").write_text(text)
        except OSError:
            pass


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {}
    if args.out is not None:
        overrides["outputDir"] = args.out
    if getattr(args, "policy", None):
        overrides["seedPolicy"] = "scan+continue" if args.policy == "full" else "real-only"
    out_dir = args.out
    try:
        config = load_config(args.config, overrides)
        out_dir = config.output_dir
        if args.command == "quantum":
            paths = [cmd_quantum(config)]
        elif args.command == "semiclassical":
            paths = list(cmd_semiclassical(config))
        elif args.command == "rootmap":
            paths = [cmd_rootmap(config, parse_tau(args.tau))]
        else:
            paths = [cmd_diagnostics(config)]
    except ConfigError as exc:
        print(f"spinsemi: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, FloatingPointError, np.linalg.LinAlgError, RuntimeError) as exc:
        _error_report(out_dir, args.command, exc)
        return EXIT_NUMERIC
    for p in paths:
        logger.info("wrote %s", p)
    return EXIT_OK
