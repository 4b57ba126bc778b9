"""Command-line front end: ``stealthcurve {tradeoff,verify,synthesize} --config run.json``.

Exit codes: 0 success, 1 configuration/validation error, 2 numerical or
solver error (including a verification row outside its tolerance).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.linalg import LinAlgError

from . import __version__
from .divergence import RatioUndefinedError, kl_rate
from .io import read_spectrum_csv, write_csv, write_json, write_series_csv
from .lti import ClosedLoop, FirstOrderPlant, OpenLoop, RationalTransferFunction
from .simulate import (
    STREAM_ATTACK,
    estimate_distortion,
    estimate_output_distortion,
    rng_streams,
    simulate,
    synthesize_colored_gaussian,
)
from .spectra import FrequencyGrid, ar1_spectrum, output_spectrum, welch_estimate, white_spectrum
from .tradeoff import SolverError, finite_horizon_min_kl, worst_case_attack

log = logging.getLogger("stealthcurve")

GRID_ENV = "STEALTHCURVE_GRID_N"
DEFAULT_GRID_N = 4096
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name
        self.message = message


@dataclass
class SimulationConfig:
    enabled: bool = False
    horizon: int = 2**16
    seed: int = 0
    distortion_tol: float = 0.03
    kl_tol: float = 0.10
    write_trajectory: bool = False


@dataclass
class OracleConfig:
    enabled: bool = False
    horizons: list = field(default_factory=lambda: [63, 511])
    tolerance: float = 0.01


@dataclass
class RunConfig:
    plant: dict
    controller: Optional[dict] = None
    input_spectrum: Optional[dict] = None
    grid_n: int = DEFAULT_GRID_N
    distortion_targets: Optional[list] = None
    kl_targets: Optional[list] = None
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    oracle: OracleConfig = field(default_factory=OracleConfig)
    output_dir: str = "stealthcurve-out"

    @classmethod
    def from_dict(cls, data: dict, base_dir: Path = Path(".")) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("<root>", "configuration must be a JSON object")
        known = {"plant", "controller", "input_spectrum", "grid_n", "targets", "simulation", "oracle", "output"}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(unknown[0], "unknown configuration key")
        if "plant" not in data:
            raise ConfigError("plant", "missing")
        targets = data.get("targets") or {}
        if not isinstance(targets, dict) or set(targets) - {"distortion", "kl_rate"}:
            raise ConfigError("targets", "must be an object with key 'distortion' or 'kl_rate'")
        if ("distortion" in targets) == ("kl_rate" in targets):
            raise ConfigError("targets", "exactly one of 'distortion' and 'kl_rate' must be given")

        spec = data.get("input_spectrum")
        if spec is not None and spec.get("kind") == "table":
            path = Path(spec.get("path", ""))
            if not path.is_absolute():
                path = (base_dir / path).resolve()
            spec = {**spec, "path": str(path)}
        try:
            sim = SimulationConfig(**(data.get("simulation") or {}))
            orc = OracleConfig(**(data.get("oracle") or {}))
        except TypeError as exc:
            raise ConfigError("simulation/oracle", str(exc)) from None
        return cls(
            plant=dict(data["plant"]),
            controller=data.get("controller"),
            input_spectrum=spec,
            grid_n=int(data.get("grid_n", DEFAULT_GRID_N)),
            distortion_targets=targets.get("distortion"),
            kl_targets=targets.get("kl_rate"),
            simulation=sim,
            oracle=orc,
            output_dir=str((data.get("output") or {}).get("dir", "stealthcurve-out")),
        )

    def to_dict(self) -> dict:
        out = {
            "plant": self.plant,
            "grid_n": self.grid_n,
            "targets": (
                {"distortion": self.distortion_targets}
                if self.distortion_targets is not None
                else {"kl_rate": self.kl_targets}
            ),
            "simulation": asdict(self.simulation),
            "oracle": asdict(self.oracle),
            "output": {"dir": self.output_dir},
        }
        if self.controller is not None:
            out["controller"] = self.controller
        if self.input_spectrum is not None:
            out["input_spectrum"] = self.input_spectrum
        return out

    @property
    def target_kind(self) -> str:
        return "distortion" if self.distortion_targets is not None else "kl_rate"

    @property
    def targets(self) -> list:
        return list(self.distortion_targets if self.distortion_targets is not None else self.kl_targets)


def _validate_targets(cfg: RunConfig) -> None:
    name = f"targets.{cfg.target_kind}"
    try:
        vals = [float(t) for t in cfg.targets]
    except (TypeError, ValueError):
        raise ConfigError(name, "targets must be numbers") from None
    if not vals:
        raise ConfigError(name, "at least one target is required")
    for v in vals:
        if not (math.isfinite(v) and v > 0.0):
            raise ConfigError(name, f"target {v} must be positive (a zero target means no attack)")
    if any(b <= a for a, b in zip(vals, vals[1:])):
        raise ConfigError(name, "targets must be strictly increasing")


def build_model(cfg: RunConfig):
    """Construct the system model, mapping every invariant violation to a ConfigError."""
    try:
        grid = FrequencyGrid(cfg.grid_n)
    except ValueError as exc:
        raise ConfigError("grid_n", str(exc)) from None
    try:
        plant = FirstOrderPlant(**cfg.plant)
    except TypeError as exc:
        raise ConfigError("plant", str(exc)) from None
    except ValueError as exc:
        raise ConfigError("plant", str(exc)) from None

    if cfg.controller is not None:
        if cfg.input_spectrum is not None:
            raise ConfigError("input_spectrum", "an exogenous input spectrum is only allowed without a controller")
        try:
            k = RationalTransferFunction(cfg.controller["numerator"], cfg.controller["denominator"])
        except (KeyError, TypeError) as exc:
            raise ConfigError("controller", f"needs 'numerator' and 'denominator' lists ({exc})") from None
        except ValueError as exc:
            raise ConfigError("controller", str(exc)) from None
        try:
            return ClosedLoop(plant, k), grid
        except ValueError as exc:
            raise ConfigError("controller", f"stability invariant violated: {exc}") from None

    su = None
    if cfg.input_spectrum is not None:
        su = _input_spectrum(cfg.input_spectrum, grid)
    if not abs(plant.a) < 1.0:
        raise ConfigError(
            "plant.a",
            f"stability invariant violated: open-loop model requires |a| < 1 (got a={plant.a}); "
            "add a stabilizing controller",
        )
    try:
        return OpenLoop(plant, su), grid
    except ValueError as exc:
        raise ConfigError("plant", str(exc)) from None


def _input_spectrum(spec: dict, grid: FrequencyGrid):
    kind = spec.get("kind")
    try:
        if kind == "white":
            return white_spectrum(grid, float(spec["variance"]))
        if kind == "ar1":
            return ar1_spectrum(grid, float(spec["a"]), float(spec["innovation_var"]))
        if kind == "table":
            path = Path(spec["path"])
            if not path.exists():
                raise ConfigError("input_spectrum.path", f"file not found: {path}")
            return read_spectrum_csv(path, spec.get("column", "value"), grid_n=grid.n)
    except KeyError as exc:
        raise ConfigError("input_spectrum", f"missing field {exc}") from None
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError("input_spectrum", str(exc)) from None
    raise ConfigError("input_spectrum.kind", f"expected 'white', 'ar1' or 'table', got {kind!r}")


def load_config(path, grid_n: Optional[int] = None, seed: Optional[int] = None, out: Optional[str] = None) -> RunConfig:
    """Read a JSON config and apply overrides (flag > environment > file)."""
    path = Path(path)
    if not path.exists():
        raise ConfigError("--config", f"file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("--config", f"invalid JSON: {exc}") from None
    cfg = RunConfig.from_dict(data, base_dir=path.parent)
    env = os.environ.get(GRID_ENV)
    if grid_n is not None:
        cfg.grid_n = grid_n
    elif env:
        try:
            cfg.grid_n = int(env)
        except ValueError:
            raise ConfigError(GRID_ENV, f"not an integer: {env!r}") from None
    if seed is not None:
        cfg.simulation.seed = seed
    if out is not None:
        cfg.output_dir = out
    _validate_targets(cfg)
    return cfg


def _solve(model, grid, kind: str, target: float):
    if kind == "distortion":
        return worst_case_attack(model, grid, distortion=target)
    return worst_case_attack(model, grid, kl_budget=target)


def _report(cfg: RunConfig, command: str) -> dict:
    return {"tool": "stealthcurve", "version": __version__, "command": command, "config": cfg.to_dict(), "errors": []}


def _solve_all(cfg, model, grid, report):
    points = []
    for t in cfg.targets:
        try:
            points.append((t, _solve(model, grid, cfg.target_kind, float(t))))
        except (SolverError, ValueError, FloatingPointError) as exc:
            report["errors"].append({"target": t, "kind": "solver", "message": str(exc)})
    return points


def cmd_tradeoff(cfg: RunConfig) -> tuple:
    model, grid = build_model(cfg)
    out = Path(cfg.output_dir)
    report = _report(cfg, "tradeoff")
    points = _solve_all(cfg, model, grid, report)
    rows = []
    for i, (t, p) in enumerate(points):
        rows.append({"index": i, "target": t, "D": p.distortion_D, "zeta": p.zeta, "kl_rate": p.kl_rate})
        write_csv(
            out / f"spectrum_{i:03d}.csv",
            ["omega", "S_y", "S_nhat", "S_n"],
            [grid.omega, p.S_y.values, p.S_nhat.values, p.S_n.values],
        )
    for col in ("D", "kl_rate"):
        vals = [r[col] for r in rows]
        if any(b <= a for a, b in zip(vals, vals[1:])):
            report["errors"].append({"target": None, "kind": "solver", "message": f"curve column {col} is not strictly increasing"})
    write_csv(
        out / "curve.csv",
        ["target", "D", "zeta", "kl_rate"],
        [[r[k] for r in rows] for k in ("target", "D", "zeta", "kl_rate")],
    )
    report["rows"] = rows
    write_json(out / "report.json", report)
    return report, (EXIT_NUMERIC if report["errors"] else EXIT_OK)


def _oracle_grid(n: int, k: int) -> FrequencyGrid:
    need = 1 << max(6, math.ceil(math.log2(2 * (k + 1))))
    return FrequencyGrid(max(n, need))


def cmd_verify(cfg: RunConfig) -> tuple:
    if not (cfg.oracle.enabled or cfg.simulation.enabled):
        raise ConfigError("oracle.enabled/simulation.enabled", "verify needs the oracle or the simulation enabled")
    if cfg.simulation.enabled and cfg.simulation.horizon < 2 * cfg.grid_n:
        raise ConfigError("simulation.horizon", f"must be at least 2 * grid_n = {2 * cfg.grid_n} for spectrum estimation")
    model, grid = build_model(cfg)
    out = Path(cfg.output_dir)
    report = _report(cfg, "verify")
    points = _solve_all(cfg, model, grid, report)
    c2 = model.plant.c ** 2
    failed = False

    oracle_rows = []
    if cfg.oracle.enabled:
        for t, p in points:
            for k in cfg.oracle.horizons:
                k = int(k)
                try:
                    S_y = output_spectrum(model, _oracle_grid(grid.n, k))
                    oracle = finite_horizon_min_kl(S_y, c2 * p.distortion_D, k)
                except (SolverError, ValueError, LinAlgError) as exc:
                    report["errors"].append({"target": t, "k": k, "kind": "oracle", "message": str(exc)})
                    continue
                rel = abs(oracle - p.kl_rate) / p.kl_rate
                ok = rel <= cfg.oracle.tolerance
                failed |= not ok
                oracle_rows.append(
                    {"target": t, "k": k, "oracle_kl": oracle, "integral_kl": p.kl_rate, "rel_error": rel, "pass": ok}
                )
        write_csv(
            out / "verify_oracle.csv",
            ["target", "k", "oracle_kl", "integral_kl", "rel_error"],
            [[r[c] for r in oracle_rows] for c in ("target", "k", "oracle_kl", "integral_kl", "rel_error")],
        )

    mc_rows = []
    if cfg.simulation.enabled:
        h = cfg.simulation.horizon
        for i, (t, p) in enumerate(points):
            attack = synthesize_colored_gaussian(
                p.S_n, -(-h // grid.n) * grid.n, rng_streams(cfg.simulation.seed)[STREAM_ATTACK]
            )[:h]
            try:
                res = simulate(model, attack, h, cfg.simulation.seed)
                emp_kl = kl_rate(p.S_y, welch_estimate(res.output_deviation, grid))
            except (SolverError, ValueError) as exc:
                report["errors"].append({"target": t, "kind": "simulation", "message": str(exc)})
                continue
            emp_d = estimate_distortion(res)
            d_err = abs(emp_d - p.distortion_D) / p.distortion_D
            kl_err = abs(emp_kl - p.kl_rate) / p.kl_rate
            ok = d_err <= cfg.simulation.distortion_tol and kl_err <= cfg.simulation.kl_tol
            failed |= not ok
            mc_rows.append(
                {
                    "target": t,
                    "empirical_D": emp_d,
                    "theoretical_D": p.distortion_D,
                    "empirical_output_power": estimate_output_distortion(res),
                    "empirical_kl_rate": emp_kl,
                    "theoretical_kl_rate": p.kl_rate,
                    "pass": ok,
                }
            )
            if cfg.simulation.write_trajectory:
                write_csv(
                    out / f"trajectory_{i:03d}.csv",
                    ["k", "x", "x_hat", "y", "y_hat", "n"],
                    [np.arange(h), res.x, res.x_hat, res.y, res.y_hat, res.n],
                )
        cols = ("target", "empirical_D", "theoretical_D", "empirical_kl_rate", "theoretical_kl_rate")
        write_csv(out / "verify_monte_carlo.csv", list(cols), [[r[c] for r in mc_rows] for c in cols])

    report["oracle_rows"] = oracle_rows
    report["monte_carlo_rows"] = mc_rows
    write_json(out / "report.json", report)
    return report, (EXIT_NUMERIC if (failed or report["errors"]) else EXIT_OK)


def cmd_synthesize(cfg: RunConfig) -> tuple:
    if len(cfg.targets) != 1:
        raise ConfigError(f"targets.{cfg.target_kind}", "synthesize needs exactly one target")
    model, grid = build_model(cfg)
    h = cfg.simulation.horizon
    if h <= 0:
        raise ConfigError("simulation.horizon", "must be positive")
    out = Path(cfg.output_dir)
    report = _report(cfg, "synthesize")
    t = float(cfg.targets[0])
    try:
        p = _solve(model, grid, cfg.target_kind, t)
    except (SolverError, ValueError) as exc:
        report["errors"].append({"target": t, "kind": "solver", "message": str(exc)})
        write_json(out / "report.json", report)
        return report, EXIT_NUMERIC
    series = synthesize_colored_gaussian(
        p.S_n, -(-h // grid.n) * grid.n, rng_streams(cfg.simulation.seed)[STREAM_ATTACK]
    )[:h]
    write_series_csv(out / "attack.csv", series)
    write_csv(
        out / "attack_spectrum.csv",
        ["omega", "S_y", "S_nhat", "S_n"],
        [grid.omega, p.S_y.values, p.S_nhat.values, p.S_n.values],
    )
    report["rows"] = [
        {
            "target": t,
            "D": p.distortion_D,
            "zeta": p.zeta,
            "kl_rate": p.kl_rate,
            "attack_variance": float(np.mean(p.S_n.values)),
            "sample_variance": float(np.var(series)),
            "length": h,
            "seed": cfg.simulation.seed,
        }
    ]
    write_json(out / "report.json", report)
    return report, EXIT_OK


COMMANDS = {"tradeoff": cmd_tradeoff, "verify": cmd_verify, "synthesize": cmd_synthesize}


def _emit_error(code: int, kind: str, message: str, field_name: Optional[str] = None) -> None:
    payload = {"error": {"exit_code": code, "kind": kind, "field": field_name, "message": message}}
    print(json.dumps(payload), file=sys.stderr)
    print(f"stealthcurve: {kind} error: {message}", file=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON run configuration")
    common.add_argument("--out", default=None, help="output directory (overrides output.dir)")
    common.add_argument("--grid-n", type=int, default=None, help=f"grid size; overrides ${GRID_ENV} and the config")
    common.add_argument("--seed", type=int, default=None, help="simulation seed (overrides simulation.seed)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="stealthcurve", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("tradeoff", parents=[common], help="solve the tradeoff curve and worst-case spectra")
    sub.add_parser("verify", parents=[common], help="finite-horizon oracle and Monte Carlo checks")
    sub.add_parser("synthesize", parents=[common], help="generate a worst-case attack series")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config, grid_n=args.grid_n, seed=args.seed, out=args.out)
        report, code = COMMANDS[args.command](cfg)
    except ConfigError as exc:
        _emit_error(EXIT_CONFIG, "validation", exc.message, exc.field)
        return EXIT_CONFIG
    except (SolverError, RatioUndefinedError, LinAlgError, FloatingPointError, ValueError) as exc:
        _emit_error(EXIT_NUMERIC, "numerical", str(exc))
        return EXIT_NUMERIC
    for err in report["errors"]:
        _emit_error(EXIT_NUMERIC, err["kind"], f"target {err.get('target')}: {err['message']}")
    if code == EXIT_NUMERIC and not report["errors"]:
        _emit_error(EXIT_NUMERIC, "verification", "one or more rows exceeded their tolerance")
    log.info("wrote results to %s", cfg.output_dir)
    return code


if __name__ == "__main__":
    sys.exit(main())
