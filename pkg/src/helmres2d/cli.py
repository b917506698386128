"""Command-line front end: ``helmres2d <resonance|sweep|profile|validate> --config PATH``.

Exit codes: 0 ok, 1 configuration error, 2 solver failure, 3 validation failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import os
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy
import tomli

from . import __version__
from .fields import K_REF, blowup_sweep, gap_profile, resonance_pair
from .geometry import CurveSpec, auto_nodes, discretize, make_pair
from .oracles import BipolarPair
from .resonance import MediumParams, ResonanceError, sigma_scan
from .statics import ConditioningError, gap_capacitance_asymptotic
from .svgplot import Series, loglog_svg
from .validation import ValidationSetup, run_validation

log = logging.getLogger("helmres2d")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_VALIDATION = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

_REAL, _INT, _STR, _REALS = "real", "integer", "string", "list of reals"

SCHEMA = {
    "geometry": {"kind": _STR, "radius": _REAL, "a": _REAL, "b": _REAL, "coefficients": _REALS, "epsilon": _REAL},
    "medium": {"rho": _REAL, "kappa": _REAL, "rho_b": _REAL, "kappa_b": _REAL},
    "discretization": {"N": "integer or 'auto'"},
    "solver": {"tol": _REAL, "maxiter": _INT, "k_ref": _REAL},
    "sweep": {"epsilons": _REALS, "deltas": _REALS, "n_samples": _INT},
    "profile": {"n_samples": _INT, "omega_window": _REALS},
    "validate": {"epsilon": _REAL, "N": _INT, "n_densities": _INT, "seed": _INT},
    "output": {"dir": _STR},
}
REQUIRED = {"geometry": ("kind", "epsilon"), "medium": ("rho", "kappa", "rho_b", "kappa_b")}


@dataclass(frozen=True)
class RunConfig:
    spec: CurveSpec
    epsilon: float
    medium: MediumParams
    N: int | None  # None means automatic
    tol: float = 1e-12
    maxiter: int = 60
    k_ref: float = K_REF
    epsilons: tuple = ()
    deltas: tuple = ()
    sweep_samples: int = 11
    profile_samples: int = 21
    omega_window: tuple | None = None
    validate: ValidationSetup | None = None
    out_dir: str = "out"
    digest: str = ""
    raw: dict = field(default_factory=dict, compare=False)


def _typed(section: str, key: str, value):
    kind = SCHEMA[section][key]
    name = f"{section}.{key}"
    is_real = lambda v: isinstance(v, (int, float)) and not isinstance(v, bool)
    if kind == _REAL:
        if not is_real(value):
            raise ConfigError(f"{name}: expected a real number, got {value!r}")
        return float(value)
    if kind == _INT:
        if not isinstance(value, int) or isinstance(value, bool):
            raise ConfigError(f"{name}: expected an integer, got {value!r}")
        return value
    if kind == _STR:
        if not isinstance(value, str):
            raise ConfigError(f"{name}: expected a string, got {value!r}")
        return value
    if kind == _REALS:
        if not isinstance(value, list) or not all(is_real(v) for v in value):
            raise ConfigError(f"{name}: expected a list of real numbers, got {value!r}")
        return tuple(float(v) for v in value)
    if value == "auto":
        return None
    if not isinstance(value, int) or isinstance(value, bool):
        raise ConfigError(f"{name}: expected an integer or 'auto', got {value!r}")
    return value


def _positive(name: str, value):
    values = value if isinstance(value, tuple) else (value,)
    if not all(v > 0 and math.isfinite(v) for v in values):
        raise ConfigError(f"{name}: must be positive, got {value!r}")
    return value


def parse_config(data: dict) -> RunConfig:
    """Validate a parsed TOML document strictly and build a :class:`RunConfig`."""
    cfg = {}
    for section, body in data.items():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section '{section}'")
        if not isinstance(body, dict):
            raise ConfigError(f"'{section}' must be a table")
        for key, value in body.items():
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key '{section}.{key}'")
            cfg[(section, key)] = _typed(section, key, value)
    for section, keys in REQUIRED.items():
        for key in keys:
            if (section, key) not in cfg:
                raise ConfigError(f"missing required key '{section}.{key}'")
    get = lambda s, k, default=None: cfg.get((s, k), default)

    kind = get("geometry", "kind")
    try:
        spec = CurveSpec(kind, radius=get("geometry", "radius"), a=get("geometry", "a"), b=get("geometry", "b"),
                         coefficients=get("geometry", "coefficients"))
    except ValueError as exc:
        raise ConfigError(f"geometry: {exc}") from exc
    epsilon = _positive("geometry.epsilon", get("geometry", "epsilon"))
    for key in SCHEMA["medium"]:
        _positive(f"medium.{key}", get("medium", key))
    medium = MediumParams(*(get("medium", k) for k in ("rho", "kappa", "rho_b", "kappa_b")))

    N = get("discretization", "N")
    if N is not None and (N < 32 or N % 2):
        raise ConfigError(f"discretization.N: must be even and at least 32, got {N}")
    tol = _positive("solver.tol", get("solver", "tol", 1e-12))
    maxiter = _positive("solver.maxiter", get("solver", "maxiter", 60))
    k_ref = _positive("solver.k_ref", get("solver", "k_ref", K_REF))
    epsilons = _positive("sweep.epsilons", get("sweep", "epsilons", ()))
    if epsilons and len(epsilons) < 4:
        raise ConfigError("sweep.epsilons: a blow-up fit needs at least four values")
    deltas = _positive("sweep.deltas", get("sweep", "deltas", ()))
    window = get("profile", "omega_window")
    if window is not None:
        if len(window) != 3 or not 0 < window[0] < window[1] or window[2] < 2 or window[2] != int(window[2]):
            raise ConfigError("profile.omega_window: expected [omega_min, omega_max, count] with 0 < min < max")
    vN = get("validate", "N", 256)
    if vN < 32 or vN % 2:
        raise ConfigError(f"validate.N: must be even and at least 32, got {vN}")
    setup = ValidationSetup(
        spec=spec,
        epsilon=_positive("validate.epsilon", get("validate", "epsilon", epsilon)),
        N=vN,
        k_ref=k_ref,
        n_densities=_positive("validate.n_densities", get("validate", "n_densities", 10)),
        seed=get("validate", "seed", 20240607),
    )
    canonical = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return RunConfig(
        spec=spec,
        epsilon=epsilon,
        medium=medium,
        N=N,
        tol=tol,
        maxiter=maxiter,
        k_ref=k_ref,
        epsilons=tuple(sorted(epsilons, reverse=True)),
        deltas=tuple(sorted(deltas, reverse=True)),
        sweep_samples=_positive("sweep.n_samples", get("sweep", "n_samples", 11)),
        profile_samples=_positive("profile.n_samples", get("profile", "n_samples", 21)),
        omega_window=window,
        validate=setup,
        out_dir=get("output", "dir", "out"),
        digest=hashlib.sha256(canonical.encode()).hexdigest(),
        raw=data,
    )


def load_config(path) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            data = tomli.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    return parse_config(data)


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(f".{path.name}.tmp{os.getpid()}")
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_table(path: Path, columns, rows, cfg: RunConfig, extra: dict | None = None) -> None:
    """CSV with ``#`` provenance lines, one header row, 17 significant digits."""
    buf = io.StringIO()
    buf.write(f"# helmres2d {__version__} numpy {np.__version__} scipy {scipy.__version__}\n")
    buf.write(f"# config_sha256 {cfg.digest}\n")
    buf.write(f"# delta {_cell(cfg.medium.delta)}\n")
    for k, v in (extra or {}).items():
        buf.write(f"# {k} {_cell(v)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    _atomic_write(path, buf.getvalue())


def _mesh(cfg: RunConfig, epsilon: float | None = None, N: int | None = None):
    pair = make_pair(cfg.spec, cfg.epsilon if epsilon is None else epsilon)
    N = N if N is not None else (cfg.N if cfg.N is not None else auto_nodes(pair))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        mesh = discretize(pair, N)
    for w in caught:
        log.warning("%s", w.message)
    log.info("mesh: epsilon=%g N=%d", pair.epsilon, N)
    return mesh


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

RESONANCE_COLUMNS = [
    "mode", "re_omega", "im_omega", "sigma_min", "leading_order_re", "leading_order_im",
    "relative_gap", "alpha12_minus_alpha11_re", "alpha12_minus_alpha11_im", "iterations",
]


def _resonance_rows(cfg: RunConfig, medium: MediumParams, mesh):
    alpha, results = resonance_pair(mesh, medium, cfg.k_ref, cfg.tol, cfg.maxiter)
    rows = []
    for mode in ("monopole", "dipole"):
        r = results[mode]
        lo = r.leading_order_omega
        rows.append([mode, r.omega.real, r.omega.imag, r.sigma_min, lo.real, lo.imag, r.relative_gap,
                     alpha.mutual.real, alpha.mutual.imag, r.iterations])
        log.info("%s: omega=%r sigma_min=%.3e |A|=%.3e", mode, r.omega, r.sigma_min, r.norm_A)
    return rows, results


def cmd_resonance(cfg: RunConfig, out: Path, jobs: int = 1) -> int:
    mesh = _mesh(cfg)
    rows, _ = _resonance_rows(cfg, cfg.medium, mesh)
    write_table(out / "resonances.csv", RESONANCE_COLUMNS, rows, cfg, {"N": mesh.N, "epsilon": cfg.epsilon})
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, out: Path, jobs: int = 1) -> int:
    if not cfg.epsilons:
        raise ConfigError("sweep.epsilons is required for the sweep command")
    res = blowup_sweep(cfg.spec, cfg.medium, cfg.epsilons, cfg.N, cfg.sweep_samples, jobs=jobs, k_ref=cfg.k_ref)
    points = sorted(res.points, key=lambda p: -p.epsilon)
    lam = make_pair(cfg.spec, cfg.epsilon).lam

    alpha_rows = []
    for p in points:
        ref = BipolarPair(cfg.spec.radius, p.epsilon).mutual_capacitance if cfg.spec.kind == "disk" else math.nan
        fit = res.alpha_fit
        alpha_rows.append([p.epsilon, p.N, p.mutual, ref, gap_capacitance_asymptotic(lam, p.epsilon),
                           fit.slope if fit else math.nan, p.failure if not math.isfinite(p.mutual) else ""])
    write_table(out / "sweep_alpha.csv",
                ["epsilon", "N", "alpha12_minus_alpha11", "bipolar", "asymptotic", "fitted_slope", "failures"],
                alpha_rows, cfg, {"lambda": lam, "r_squared": res.alpha_fit.r_squared if res.alpha_fit else math.nan})

    grad_rows = []
    for p in points:
        for mode in ("monopole", "dipole"):
            fit = res.fits.get(mode)
            w = p.omega.get(mode, complex(math.nan, math.nan))
            grad_rows.append([p.epsilon, p.N, mode, w.real, w.imag, p.center_gradient.get(mode, math.nan),
                              p.max_gradient.get(mode, math.nan), fit.slope if fit else math.nan,
                              fit.r_squared if fit else math.nan, p.failure])
    write_table(out / "sweep_gradient.csv",
                ["epsilon", "N", "mode", "re_omega", "im_omega", "center_gradient", "max_gap_gradient",
                 "fitted_slope", "r_squared", "failures"],
                grad_rows, cfg, {"dipole_fit": "center_gradient", "monopole_fit": "max_gap_gradient"})

    eps = tuple(p.epsilon for p in points)
    finite = [p for p in points if math.isfinite(p.mutual)]
    _atomic_write(out / "sweep_alpha.svg", loglog_svg(
        [Series("computed", tuple(p.epsilon for p in finite), tuple(p.mutual for p in finite)),
         Series("2 pi / sqrt(lambda eps)", eps, tuple(gap_capacitance_asymptotic(lam, e) for e in eps), True)],
        "mutual capacitance", "epsilon", "alpha12 - alpha11"))
    good = [p for p in points if not p.failure]
    if good:
        ge = tuple(p.epsilon for p in good)
        series = [Series("dipole |du/dx2(0,0)|", ge, tuple(p.center_gradient["dipole"] for p in good)),
                  Series("2 / eps", ge, tuple(2.0 / e for e in ge), True)]
        mono = tuple(p.max_gradient["monopole"] for p in good)
        if all(v > 0 for v in mono):
            series.insert(1, Series("monopole max gap |grad u|", ge, mono))
        _atomic_write(out / "sweep_gradient.svg",
                      loglog_svg(series, "gap gradient blow-up", "epsilon", "|grad u|"))

    if cfg.deltas:
        mesh = _mesh(cfg)
        rows = []
        for d in cfg.deltas:
            medium = MediumParams(cfg.medium.rho, cfg.medium.kappa, d * cfg.medium.rho,
                                  d * cfg.medium.rho * cfg.medium.v_b**2)
            for row in _resonance_rows(cfg, medium, mesh)[0]:
                rows.append([d] + row)
        write_table(out / "sweep_delta.csv", ["delta"] + RESONANCE_COLUMNS, rows, cfg,
                    {"N": mesh.N, "epsilon": cfg.epsilon})
    failed = [p for p in points if p.failure]
    return EXIT_SOLVER if len(failed) == len(points) else EXIT_OK


def cmd_profile(cfg: RunConfig, out: Path, jobs: int = 1) -> int:
    mesh = _mesh(cfg)
    _, results = resonance_pair(mesh, cfg.medium, cfg.k_ref, cfg.tol, cfg.maxiter)
    rows = []
    centre = {}
    for mode in ("monopole", "dipole"):
        prof = gap_profile(mesh, results[mode], cfg.profile_samples)
        centre[f"{mode}_center_gradient"] = abs(prof.center_gradient)
        for x, u, g, mid, d, gn in zip(prof.points, prof.u, prof.grad_u, prof.on_midline, prof.delta_of_x1,
                                       prof.grad_norm):
            rows.append([mode, x[0], x[1], bool(mid), d, u.real, u.imag, g[0].real, g[0].imag,
                         g[1].real, g[1].imag, gn])
    write_table(out / "gap_profile.csv",
                ["mode", "x1", "x2", "on_midline", "gap_width", "re_u", "im_u", "re_du_dx1", "im_du_dx1",
                 "re_du_dx2", "im_du_dx2", "grad_norm"],
                rows, cfg, {"N": mesh.N, "epsilon": cfg.epsilon, **centre})
    if cfg.omega_window is not None:
        lo, hi, n = cfg.omega_window
        scan = sigma_scan(mesh, cfg.medium, np.linspace(lo, hi, int(n)))
        names = sorted(scan.sectors)
        rows = [[w, f] + [scan.sectors[s][i] for s in names] for i, (w, f) in enumerate(zip(scan.omega, scan.full))]
        write_table(out / "sigma_scan.csv", ["omega", "relative_sigma_min"] + [f"sigma_min_{s}" for s in names],
                    rows, cfg, {"N": mesh.N})
    return EXIT_OK


def cmd_validate(cfg: RunConfig, out: Path, jobs: int = 1, jump_sign: float = 1.0) -> int:
    checks = run_validation(cfg.validate, jump_sign=jump_sign)
    rows = [[c.name, c.kind, c.value, c.tolerance, "pass" if c.passed else "fail"] for c in checks]
    write_table(out / "validate_report.csv", ["check", "comparison", "value", "tolerance", "result"], rows, cfg,
                {"N": cfg.validate.N, "epsilon": cfg.validate.epsilon})
    failed = [c.name for c in checks if not c.passed]
    for name in failed:
        log.error("validation check failed: %s", name)
    return EXIT_VALIDATION if failed else EXIT_OK


COMMANDS = {"resonance": cmd_resonance, "sweep": cmd_sweep, "profile": cmd_profile, "validate": cmd_validate}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="helmres2d", description="Subwavelength resonances of close-to-touching pairs.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="TOML run configuration")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1, help="worker processes for sweeps")
    p.add_argument("--out", default=None, help="output directory (overrides output.dir)")
    return p


def _setup_logging(out: Path) -> logging.Handler:
    handler = logging.FileHandler(out / "run.log", encoding="utf-8")
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
    log.addHandler(handler)
    log.setLevel(logging.INFO)
    return handler


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.jobs < 1:
            raise ConfigError("--jobs must be at least 1")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out if args.out is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    handler = _setup_logging(out)
    code = EXIT_SOLVER
    try:
        log.info("command=%s config=%s sha256=%s delta=%r", args.command, args.config, cfg.digest, cfg.medium.delta)
        code = COMMANDS[args.command](cfg, out, jobs=args.jobs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        code = EXIT_CONFIG
    except (ResonanceError, ConditioningError, np.linalg.LinAlgError) as exc:
        log.error("solver failure: %s", exc)
        print(f"solver failure: {exc}", file=sys.stderr)
        code = EXIT_SOLVER
    finally:
        log.info("exit code %d", code)
        log.removeHandler(handler)
        handler.close()
    return code


if __name__ == "__main__":
    sys.exit(main())

