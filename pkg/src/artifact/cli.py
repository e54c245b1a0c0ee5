"""Command line entry point: single solves, the verification suite and amplitude sweeps.

Exit codes: 0 success, 2 configuration error, 3 solver non-convergence
(or any other solver failure), 4 verification failure.
"""
from __future__ import annotations

import argparse
import copy
import csv
import json
import logging
import math
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .ansatz import AngularData, AnsatzError, fourier_from_json, fourier_to_json, project_orthogonal
from .elliptic import OrthogonalityError
from .field_core import FieldError, PolarGrid, ScalarField, write_field_csv
from .matter import SourceError, sources_from_config
from .solver import (
    SolverConfig,
    SolverError,
    charges,
    decay_report,
    fixed_point,
    measure_contraction,
    orthogonality,
    recenter,
    residuals,
    tau_tilde_norm,
)
from .verify import run_suite

log = logging.getLogger("artifact")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_VERIFY = 0, 2, 3, 4
MODES = ("solve", "verify", "sweep")
CHARGE_KEYS = ("alpha", "rho_cos", "rho_sin", "c1", "c2", "J", "A")

# two offset Gaussians: gamma gives the gradient energy and the momentum
# density, gamma_dot the kinetic energy and an off-centre dipole
DEFAULT_TERMS = (
    {"which": "gamma", "center": [0.2, 0.4]},
    {"which": "gamma_dot", "center": [0.5, 0.0]},
)


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    n_r: int = 256
    n_theta: int = 64
    L: float = 4.0
    order: int = 6
    delta: float = -0.5
    tol: float = 1e-10
    max_iter: int = 50
    moment_tol: float = 1e-8
    mode: str = "solve"
    sources: dict | None = None
    angular: dict = field(default_factory=dict)
    sweep_amplitudes: list = field(default_factory=lambda: [0.02, 0.04, 0.08])
    recenter: str = "c_over_alpha"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        def bad(name, msg):
            raise ConfigError(f"{name}: {msg}")

        for name in ("n_r", "n_theta", "order", "max_iter"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int):
                bad(name, f"must be an integer, got {v!r}")
        if self.n_r < 16:
            bad("n_r", f"must be at least 16, got {self.n_r}")
        if self.n_theta < 8 or self.n_theta % 2:
            bad("n_theta", f"must be an even integer >= 8, got {self.n_theta}")
        if self.order not in (4, 6):
            bad("order", f"must be 4 or 6, got {self.order}")
        if self.max_iter < 1:
            bad("max_iter", f"must be positive, got {self.max_iter}")
        for name in ("L", "delta", "tol", "moment_tol"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                bad(name, f"must be a finite number, got {v!r}")
        if self.L <= 0:
            bad("L", f"must be positive, got {self.L}")
        if not -1 < self.delta < 0:
            bad("delta", f"must lie strictly inside (-1, 0), got {self.delta}")
        if self.tol <= 0 or self.moment_tol <= 0:
            bad("tol", "tolerances must be positive")
        if self.mode not in MODES:
            bad("mode", f"must be one of {MODES}, got {self.mode!r}")
        if self.sources is not None and not isinstance(self.sources, dict):
            bad("sources", f"must be an object or null, got {type(self.sources).__name__}")
        if not isinstance(self.angular, dict) or set(self.angular) - {"b_tilde", "B"}:
            bad("angular", f"must be an object with optional keys b_tilde, B; got {self.angular!r}")
        amps = self.sweep_amplitudes
        if not isinstance(amps, list) or not amps:
            bad("sweep_amplitudes", "must be a non-empty list")
        for a in amps:
            if isinstance(a, bool) or not isinstance(a, (int, float)) or not a > 0 or not math.isfinite(a):
                bad("sweep_amplitudes", f"entries must be positive numbers, got {a!r}")
        if len(set(amps)) != len(amps):
            bad("sweep_amplitudes", f"entries must be distinct, got {amps}")
        if self.recenter not in ("c_over_alpha", "c"):
            bad("recenter", f"must be 'c_over_alpha' or 'c', got {self.recenter!r}")

    # serialization
    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigError(f"config must be a JSON object, got {type(d).__name__}")
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        d = copy.deepcopy(d)
        for name in ("L", "delta", "tol", "moment_tol"):
            if isinstance(d.get(name), int) and not isinstance(d.get(name), bool):
                d[name] = float(d[name])
        return cls(**d)

    def to_dict(self) -> dict:
        return copy.deepcopy(asdict(self))

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            d = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        return cls.from_dict(d)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    # derived objects
    def grid(self) -> PolarGrid:
        return PolarGrid(self.n_r, self.n_theta, self.L, self.order)

    def solver_config(self) -> SolverConfig:
        return SolverConfig(delta=self.delta, tol=self.tol, max_iter=self.max_iter, moment_tol=self.moment_tol)

    def angular_data(self) -> AngularData:
        try:
            bt = fourier_from_json(self.angular.get("b_tilde"))
            B = fourier_from_json(self.angular.get("B"))
        except AnsatzError as e:
            raise ConfigError(f"angular: {e}") from e
        return AngularData(project_orthogonal(bt), B)


# ---------------------------------------------------------------------------
# report helpers

def _clean(x):
    """JSON-safe copy with numpy scalars turned into Python floats."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else repr(v)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")


def _sources_for(cfg: RunConfig, grid: PolarGrid, amplitude: float | None = None, base: Path | None = None):
    spec = cfg.sources
    if amplitude is not None:
        if spec and spec.get("family") not in (None, "gaussian"):
            raise ConfigError("sources: a sweep needs the gaussian family")
        spec = dict(spec or {"family": "gaussian", "terms": [dict(t) for t in DEFAULT_TERMS]})
        spec["family"] = "gaussian"
        spec["amplitude"] = amplitude
    try:
        return sources_from_config(grid, spec, base)
    except (SourceError, FieldError, KeyError, TypeError) as e:
        raise ConfigError(f"sources: {e}") from e


def solve_report(cfg: RunConfig, sol, src) -> dict:
    st = sol.state
    rep = {
        "grid": sol.grid.meta(),
        "config": cfg.to_dict(),
        "epsilon": sol.epsilon,
        "alpha0": sol.alpha0,
        "iterations": sol.iterations,
        "history": sol.history,
        "fixed_point_gap": sol.fixed_point_gap,
        "charges": charges(sol, src),
        "residuals": residuals(sol, src),
        "orthogonality": orthogonality(sol),
        "decay": decay_report(sol),
        "tau_tilde_norm": tau_tilde_norm(sol),
    }
    if st.alpha > 0:
        rc = recenter(sol, cfg.recenter)
        other = recenter(sol, "c" if cfg.recenter == "c_over_alpha" else "c_over_alpha")
        rep["recenter"] = {
            cfg.recenter: {"x0": rc.x0, "dipole_analytic": rc.dipole_analytic,
                           "dipole_measured": rc.dipole_measured},
            other_name(cfg.recenter): {"x0": other.x0, "dipole_analytic": other.dipole_analytic,
                                       "dipole_measured": other.dipole_measured},
        }
    return rep


def other_name(conv: str) -> str:
    return "c" if conv == "c_over_alpha" else "c_over_alpha"


def write_fields(out: Path, sol) -> list[str]:
    g = sol.grid
    names = {
        "lambda": sol.lam,
        "lambda_tilde": sol.lam_tilde,
        "tau": sol.tau,
        "H11": ScalarField(g, sol.H.t11),
        "H12": ScalarField(g, sol.H.t12),
    }
    written = []
    for name, f in names.items():
        p = out / f"field_{name}.csv"
        write_field_csv(f, p)
        written.append(p.name)
    return written


def loglog_slope(x, y) -> float | None:
    x, y = np.asarray(x, float), np.asarray(y, float)
    ok = (x > 0) & (y > 0)
    if ok.sum() < 2:
        return None
    return float(np.polyfit(np.log(x[ok]), np.log(y[ok]), 1)[0])


# ---------------------------------------------------------------------------
# modes

def run_solve(cfg: RunConfig, out: Path, base: Path | None = None) -> int:
    g = cfg.grid()
    src = _sources_for(cfg, g, base=base)
    sol = fixed_point(g, cfg.angular_data(), src, cfg.solver_config())
    log.info("converged in %d iterations, alpha = %.6e", sol.iterations, sol.state.alpha)
    rep = solve_report(cfg, sol, src)
    rep["fields"] = write_fields(out, sol)
    write_json(out / "report.json", rep)
    return EXIT_OK


def run_verify(cfg: RunConfig, out: Path) -> int:
    checks = run_suite(cfg.n_r, cfg.n_theta)
    for c in checks:
        log.info("%-22s %.3e <= %.1e  %s", c.name, c.value, c.tol, "pass" if c.passed else "FAIL")
    ok = all(c.passed for c in checks)
    write_json(out / "verify.json", {"grid": cfg.grid().meta(), "passed": ok,
                                     "checks": [c.as_dict() for c in checks]})
    return EXIT_OK if ok else EXIT_VERIFY


def sweep_rows(cfg: RunConfig, base: Path | None = None) -> list[dict]:
    g = cfg.grid()
    ang = cfg.angular_data()
    rows = []
    for a in sorted(cfg.sweep_amplitudes):
        src = _sources_for(cfg, g, a, base)
        sol = fixed_point(g, ang, src, cfg.solver_config())
        ch = charges(sol, src)
        row = {"amplitude": a, "epsilon": sol.epsilon, "iterations": sol.iterations}
        for k in CHARGE_KEYS:
            row[k] = ch["converged"][k]
            row[f"{k}_pred"] = ch["predicted"][k]
            row["discrepancy" if k == "alpha" else f"{k}_discrepancy"] = ch["discrepancy"][k]
        row["contraction"] = measure_contraction(sol, src)["max"]
        rows.append(row)
        log.info("a = %g: eps = %.4e, |alpha - alpha_pred| = %.3e", a, sol.epsilon, row["discrepancy"])
    return rows


def sweep_slopes(rows: list[dict]) -> dict:
    eps = [r["epsilon"] for r in rows]
    out = {}
    for k in CHARGE_KEYS:
        col = "discrepancy" if k == "alpha" else f"{k}_discrepancy"
        out[k] = loglog_slope(eps, [r[col] for r in rows])
    out["contraction"] = loglog_slope(eps, [r["contraction"] for r in rows])
    return out


def run_sweep(cfg: RunConfig, out: Path, base: Path | None = None) -> int:
    rows = sweep_rows(cfg, base)
    cols = list(rows[0])
    with (out / "sweep.csv").open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(float(v)) if isinstance(v, float) else v for k, v in r.items()})
    slopes = sweep_slopes(rows)
    write_json(out / "sweep_slopes.json", {"slopes_vs_epsilon": slopes, "config": cfg.to_dict()})
    for k, v in slopes.items():
        log.info("slope %-12s %s", k, "n/a" if v is None else f"{v:.3f}")
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="artifact", description=__doc__.splitlines()[0])
    p.add_argument("--config", type=Path, help="JSON run configuration")
    p.add_argument("--out-dir", type=Path, default=Path("out"))
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--nr", type=int, dest="n_r")
    p.add_argument("--ntheta", type=int, dest="n_theta")
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", type=int, dest="max_iter")
    p.add_argument("-q", "--quiet", action="store_true")
    return p


def config_from_args(args) -> tuple[RunConfig, Path | None]:
    d = {}
    base = None
    if args.config is not None:
        d = RunConfig.load(args.config).to_dict()
        base = args.config.parent
    for name in ("mode", "n_r", "n_theta", "tol", "max_iter"):
        v = getattr(args, name)
        if v is not None:
            d[name] = v
    return RunConfig.from_dict(d), base


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s")
    try:
        cfg, base = config_from_args(args)
        out = args.out_dir
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.json").write_text(cfg.dumps() + "\n")
        if cfg.mode == "solve":
            return run_solve(cfg, out, base)
        if cfg.mode == "verify":
            return run_verify(cfg, out)
        return run_sweep(cfg, out, base)
    except ConfigError as e:
        log.error("config error: %s", e)
        return EXIT_CONFIG
    except (SolverError, OrthogonalityError, FieldError, AnsatzError) as e:
        log.error("%s: %s", type(e).__name__, e)
        hist = getattr(e, "history", None)
        if hist and args.out_dir.is_dir():
            write_json(args.out_dir / "failure.json", {"error": str(e), "history": hist})
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
