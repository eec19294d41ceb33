"""
Command-line front end.

    openhier <verb> --config run.toml --out DIR [--seed N] [--threads N] [--method rk4|rkf45]

Verbs: ``hops``, ``master-boson``, ``master-fermion``, ``oracle``, ``bcf``,
``verify`` and ``sweep``. Each run writes ``rho.csv`` (when a density
matrix is produced) and ``summary.json`` into the output directory; the
summary is written even when the run fails. See the README for the
configuration schema.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 size guard exceeded.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import platform
import sys
import time
import traceback
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np
import scipy
import tomli

from . import __version__
from .bcf import (
    BCFError,
    Mode,
    PoleScheme,
    PoleSpectralDensity,
    ThermalParams,
    convergence_table,
    eval_modes,
    lorentzian,
    residue_expand,
    thermal_bcf_quadrature,
    BCFKind,
)
from .core import IntegrationError, Method, Statistics, SystemSpec, SystemSpecError, TimeGrid, validate_system
from .grassmann import TooManyGenerators, check_identities
from .hops import HopsRun, ensemble_density, propagate_trajectories, resolve_threads
from .indexset import BosonicUntruncated, SpaceTooLarge, Truncation
from .master import propagate_master
from .noise import NoiseError
from .oracle import DimensionGuard, DiscreteBathSpec, converged_bosonic, exact_propagate, per_mode_channels

EXIT_OK, EXIT_SCHEMA, EXIT_NUMERICAL, EXIT_GUARD = 0, 2, 3, 4
SOLVERS = ("hops", "master-boson", "master-fermion", "oracle", "bcf", "verify")


class SchemaError(ValueError):
    pass


class IncompatibleSolver(SchemaError):
    pass


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class SpectralBath:
    densities: tuple[PoleSpectralDensity, ...]  # one per channel
    thermal: ThermalParams
    scheme: PoleScheme
    count: int

    def modes(self) -> list[list[Mode]]:
        return [residue_expand(J, self.thermal, self.scheme, self.count) for J in self.densities]


@dataclass(frozen=True)
class RunConfig:
    solver: str
    spec: SystemSpec
    grid: TimeGrid
    modes: Optional[tuple[tuple[Mode, ...], ...]] = None
    discrete: Optional[DiscreteBathSpec] = None
    spectral: Optional[SpectralBath] = None
    truncation: Optional[Truncation] = None
    method: Method = Method.RK4
    tol: float = 1e-9
    every: int = 1
    trajectories: int = 100
    seed: int = 0
    terminator: bool = False
    compare_oracle: bool = False
    bcf_counts: tuple[int, ...] = (1, 2, 4, 8, 16)
    verify_trials: int = 100
    sweep_axis: Optional[str] = None
    sweep_values: tuple = ()

    def hierarchy_input(self) -> tuple[SystemSpec, list[list[Mode]]]:
        """System and per-channel modes as seen by the hierarchy solvers."""
        if self.modes is not None:
            return self.spec, [list(ch) for ch in self.modes]
        if self.discrete is not None:
            return per_mode_channels(self.spec, self.discrete)
        if self.spectral is not None:
            return self.spec, self.spectral.modes()
        raise SchemaError("no bath given")


def _field(doc: dict, path: str, default: Any = ..., kind=None):
    cur: Any = doc
    for part in path.split("."):
        if not isinstance(cur, dict) or part not in cur:
            if default is ...:
                raise SchemaError(f"missing field '{path}'")
            return default
        cur = cur[part]
    if kind is not None and not isinstance(cur, kind):
        raise SchemaError(f"field '{path}' has type {type(cur).__name__}, expected {kind}")
    return cur


def _complex(x, where: str) -> complex:
    if isinstance(x, (int, float)) and not isinstance(x, bool):
        return complex(x)
    if isinstance(x, list) and len(x) == 2 and all(isinstance(v, (int, float)) for v in x):
        return complex(x[0], x[1])
    raise SchemaError(f"field '{where}': expected a number or [re, im], got {x!r}")


def _matrix(x, dim: int, where: str) -> np.ndarray:
    if not isinstance(x, list) or len(x) != dim:
        raise SchemaError(f"field '{where}': expected {dim} rows")
    rows = []
    for i, row in enumerate(x):
        if not isinstance(row, list) or len(row) != dim:
            raise SchemaError(f"field '{where}[{i}]': expected {dim} entries")
        rows.append([_complex(v, f"{where}[{i}][{k}]") for k, v in enumerate(row)])
    return np.array(rows, dtype=complex)


def _mode(x, where: str) -> Mode:
    if isinstance(x, dict):
        return Mode(_complex(_field(x, "g"), where + ".g"), _complex(_field(x, "w"), where + ".w"))
    if isinstance(x, list) and len(x) == 4:
        return Mode.from_quadruple([float(v) for v in x])
    raise SchemaError(f"field '{where}': a mode is {{g = ..., w = ...}} or [g_re, g_im, w_re, w_im]")


def _truncation(doc: dict, statistics: Statistics) -> Optional[Truncation]:
    t = doc.get("truncation")
    if t is None:
        return None if statistics is Statistics.FERMIONIC else Truncation.Depth(4)
    depth = t.get("depth")
    energy = t.get("energy")
    weights = t.get("weights")
    if energy is not None and weights is None:
        raise SchemaError("field 'truncation.weights' is required with 'truncation.energy'")
    w = tuple(_complex(v, f"truncation.weights[{i}]") for i, v in enumerate(weights)) if weights else None
    if depth is None and energy is None:
        return None
    return Truncation(depth=depth, energy=energy, weights=w)


def parse_config(text: str, solver: Optional[str] = None) -> RunConfig:
    """Parse and validate a TOML run description."""
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise SchemaError(f"TOML syntax error: {exc}") from None
    solver = solver or _field(doc, "solver", None)
    if solver is None:
        raise SchemaError("missing field 'solver' (or give it as the command verb)")
    if solver not in SOLVERS:
        raise SchemaError(f"field 'solver': unknown solver {solver!r}")

    dim = _field(doc, "system.dimension", kind=int)
    try:
        statistics = Statistics.parse(_field(doc, "system.statistics", "bosonic"))
    except ValueError as exc:
        raise SchemaError(f"field 'system.statistics': {exc}") from None
    H = _matrix(_field(doc, "system.hamiltonian"), dim, "system.hamiltonian")
    couplings = _field(doc, "system.couplings", kind=list)
    Ls = tuple(_matrix(L, dim, f"system.couplings[{j}]") for j, L in enumerate(couplings))
    psi0 = doc["system"].get("psi0")
    if psi0 is not None:
        if not isinstance(psi0, list) or len(psi0) != dim:
            raise SchemaError(f"field 'system.psi0': expected {dim} entries")
        psi0 = np.array([_complex(v, f"system.psi0[{i}]") for i, v in enumerate(psi0)])
    try:
        spec = validate_system(SystemSpec(H, Ls, statistics, psi0))
    except SystemSpecError as exc:
        raise SchemaError(f"system: {exc}") from None

    if solver == "hops" and statistics is Statistics.FERMIONIC:
        raise IncompatibleSolver("hops needs a bosonic environment (Grassmann noise cannot be sampled)")
    if solver == "master-fermion" and statistics is not Statistics.FERMIONIC:
        raise IncompatibleSolver("master-fermion needs system.statistics = 'fermionic'")
    if solver == "master-boson" and statistics is not Statistics.BOSONIC:
        raise IncompatibleSolver("master-boson needs system.statistics = 'bosonic'")

    bath = doc.get("bath", {})
    present = [k for k in ("modes", "discrete", "spectral") if k in bath]
    if len(present) > 1:
        raise SchemaError(f"bath: exactly one of modes/discrete/spectral allowed, got {present}")
    modes = discrete = spectral = None
    if "modes" in bath:
        raw = bath["modes"]
        if not isinstance(raw, list) or len(raw) != len(Ls):
            raise SchemaError("field 'bath.modes': one list of modes per coupling operator")
        modes = tuple(tuple(_mode(m, f"bath.modes[{j}][{i}]") for i, m in enumerate(ch)) for j, ch in enumerate(raw))
    elif "discrete" in bath:
        d = bath["discrete"]
        cs = _field(d, "couplings", kind=list)
        fs = _field(d, "frequencies", kind=list)
        try:
            discrete = DiscreteBathSpec(
                tuple(tuple(_complex(g, f"bath.discrete.couplings[{j}]") for g in ch) for j, ch in enumerate(cs)),
                tuple(tuple(float(w) for w in ch) for ch in fs),
                statistics,
                int(d.get("n_max", 4)),
            )
        except (ValueError, TypeError) as exc:
            raise SchemaError(f"bath.discrete: {exc}") from None
        if discrete.n_channels != len(Ls):
            raise SchemaError("bath.discrete: one list of couplings per coupling operator")
    elif "spectral" in bath:
        s = bath["spectral"]
        lor = _field(s, "lorentzians", kind=list)
        if len(lor) != len(Ls):
            raise SchemaError("field 'bath.spectral.lorentzians': one list per coupling operator")
        dens = []
        for j, ch in enumerate(lor):
            poles = []
            for i, entry in enumerate(ch):
                if not (isinstance(entry, list) and len(entry) == 3):
                    raise SchemaError(f"field 'bath.spectral.lorentzians[{j}][{i}]': expected [eta, gamma, center]")
                poles += list(lorentzian(*map(float, entry)).poles)
            dens.append(PoleSpectralDensity(tuple(poles)))
        try:
            spectral = SpectralBath(
                tuple(dens),
                ThermalParams(float(_field(s, "temperature")), float(s.get("chemical_potential", 0.0))),
                PoleScheme.parse(s.get("scheme", "pade")),
                int(s.get("count", 10)),
            )
        except ValueError as exc:
            raise SchemaError(f"bath.spectral: {exc}") from None
    elif solver != "verify":
        raise SchemaError("missing bath: give one of bath.modes, bath.discrete, bath.spectral")

    if spectral is not None and statistics is Statistics.FERMIONIC:
        if any(np.max(np.abs(L - L.conj().T)) > 1e-12 for L in Ls):
            raise IncompatibleSolver(
                "a fermionic spectral bath is only supported for self-adjoint coupling operators"
            )
    if solver == "oracle" and discrete is None:
        raise IncompatibleSolver("the oracle needs a discrete bath (bath.discrete)")
    if solver == "bcf" and spectral is None:
        raise IncompatibleSolver("bcf needs a spectral bath (bath.spectral)")

    g = doc.get("grid", {})
    try:
        grid = TimeGrid(float(g.get("t0", 0.0)), float(_field(doc, "grid.t1")), int(_field(doc, "grid.steps")))
    except ValueError as exc:
        raise SchemaError(f"grid: {exc}") from None

    try:
        truncation = _truncation(doc, statistics)
        method = Method.parse(doc.get("solver_options", {}).get("method", "rk4"))
    except ValueError as exc:
        raise SchemaError(str(exc)) from None
    opts = doc.get("solver_options", {})
    h = doc.get("hops", {})
    sw = doc.get("sweep", {})
    return RunConfig(
        solver=solver,
        spec=spec,
        grid=grid,
        modes=modes,
        discrete=discrete,
        spectral=spectral,
        truncation=truncation,
        method=method,
        tol=float(opts.get("tol", 1e-9)),
        every=int(g.get("every", 1)),
        trajectories=int(h.get("trajectories", 100)),
        seed=int(h.get("seed", 0)),
        terminator=bool(h.get("terminator", False)),
        compare_oracle=bool(doc.get("oracle", {}).get("compare", False)),
        bcf_counts=tuple(int(c) for c in doc.get("bcf", {}).get("counts", (1, 2, 4, 8, 16))),
        verify_trials=int(doc.get("verify", {}).get("trials", 100)),
        sweep_axis=sw.get("axis"),
        sweep_values=tuple(sw.get("values", ())),
    )


# ---------------------------------------------------------------------------
# running


@dataclass
class Outcome:
    times: Optional[np.ndarray] = None
    rho: Optional[np.ndarray] = None
    se: Optional[np.ndarray] = None
    summary: dict = field(default_factory=dict)
    extra_csv: dict = field(default_factory=dict)  # name -> (header, rows)


def _oracle_deviation(cfg: RunConfig, rho: np.ndarray, times: np.ndarray) -> Optional[float]:
    if not cfg.compare_oracle or cfg.discrete is None:
        return None
    if cfg.discrete.statistics is Statistics.BOSONIC:
        ref, _ = converged_bosonic(cfg.spec, cfg.discrete, times)
    else:
        ref = exact_propagate(cfg.spec, cfg.discrete, times)
    return float(np.max(np.abs(ref.rho - rho)))


def _run_master(cfg: RunConfig) -> Outcome:
    spec, modes = cfg.hierarchy_input()
    res = propagate_master(spec, modes, cfg.grid, cfg.truncation, spec.statistics, cfg.method, cfg.tol, cfg.every)
    summary = {
        "trace_drift": res.trace_drift,
        "pairing_residual": res.max_pairing_residual,
        "space_size": res.space_size,
    }
    dev = _oracle_deviation(cfg, res.rho, res.times)
    if dev is not None:
        summary["oracle_max_deviation"] = dev
    return Outcome(res.times, res.rho, None, summary)


def _run_hops(cfg: RunConfig, threads: Optional[int]) -> Outcome:
    spec, modes = cfg.hierarchy_input()
    run = HopsRun(spec, modes, cfg.grid, cfg.truncation or Truncation.Depth(4), cfg.terminator, cfg.method, cfg.tol, cfg.every)
    seeds = list(range(cfg.seed, cfg.seed + cfg.trajectories))
    traj = propagate_trajectories(run, seeds, threads=threads)
    ens = ensemble_density(traj)
    trace = np.trace(ens.rho, axis1=1, axis2=2)
    summary = {
        "trace_drift": float(np.max(np.abs(trace - 1.0))),
        "space_size": len(run_space(run)),
        "seeds": {"first": seeds[0], "count": len(seeds)},
        "n_trajectories": len(seeds),
        "threads": resolve_threads(threads),
        "terminator": cfg.terminator,
    }
    dev = _oracle_deviation(cfg, ens.rho, ens.times)
    if dev is not None:
        summary["oracle_max_deviation"] = dev
    return Outcome(ens.times, ens.rho, ens.se, summary)


def run_space(run: HopsRun):
    from .hops import build_model

    return build_model(run).space


def _run_oracle(cfg: RunConfig) -> Outcome:
    times = cfg.grid.times[:: cfg.every]
    if cfg.discrete.statistics is Statistics.BOSONIC:
        res, n_max = converged_bosonic(cfg.spec, cfg.discrete, times)
        extra = {"n_max": n_max}
    else:
        res = exact_propagate(cfg.spec, cfg.discrete, times)
        extra = {}
    summary = {
        "trace_drift": float(np.max(np.abs(np.trace(res.rho, axis1=1, axis2=2) - 1))),
        "norm_drift": float(np.max(np.abs(res.norm - 1))),
        "space_size": res.total_dim,
        **extra,
    }
    return Outcome(res.times, res.rho, None, summary)


def _run_bcf(cfg: RunConfig) -> Outcome:
    sb = cfg.spectral
    times = cfg.grid.times[:: cfg.every]
    rows, tables = [], []
    for j, J in enumerate(sb.densities):
        ref = np.array([thermal_bcf_quadrature(J, sb.thermal, BCFKind.SPIN_BATH_ALPHA, t) for t in times])
        approx = eval_modes(residue_expand(J, sb.thermal, sb.scheme, sb.count), times)
        for t, a, q in zip(times, approx, ref):
            rows.append([j, t, a.real, a.imag, q.real, q.imag])
        tables.append(convergence_table(J, sb.thermal, cfg.bcf_counts, times, reference=ref))
    summary = {"convergence": tables, "scheme": sb.scheme.value, "count": sb.count}
    return Outcome(summary=summary, extra_csv={"bcf.csv": (["channel", "t", "re_modes", "im_modes", "re_quad", "im_quad"], rows)})


def _run_verify(cfg: Optional[RunConfig], seed: int, trials: Optional[int]) -> Outcome:
    n = trials if trials is not None else (cfg.verify_trials if cfg else 100)
    rep = check_identities(n, seed)
    print(rep.table())
    return Outcome(summary={"residuals": rep.residuals, "diagnostics": rep.diagnostics, "trials": rep.trials})


def execute(cfg: Optional[RunConfig], verb: str, threads=None, seed=None, trials=None) -> Outcome:
    if verb == "verify":
        return _run_verify(cfg, seed if seed is not None else 0, trials)
    if verb == "hops":
        return _run_hops(cfg, threads)
    if verb in ("master-boson", "master-fermion"):
        return _run_master(cfg)
    if verb == "oracle":
        return _run_oracle(cfg)
    if verb == "bcf":
        return _run_bcf(cfg)
    raise SchemaError(f"unknown verb {verb!r}")


def _fmt(x: float) -> str:
    return repr(float(x))


def write_rho_csv(path: Path, times, rho, se=None) -> None:
    D = rho.shape[-1]
    labels = [f"{a}{b}" for a in range(D) for b in range(D)]
    header = ["t"] + [f"{p}_rho_{l}" for l in labels for p in ("re", "im")]
    if se is not None:
        header += [f"se_{p}_rho_{l}" for l in labels for p in ("re", "im")]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i, t in enumerate(times):
            flat = rho[i].ravel()
            row = [_fmt(t)] + [_fmt(v) for z in flat for v in (z.real, z.imag)]
            if se is not None:
                row += [_fmt(v) for z in se[i].ravel() for v in (z.real, z.imag)]
            w.writerow(row)


def _versions() -> dict:
    return {
        "openhier": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, (SpaceTooLarge, DimensionGuard, TooManyGenerators)):
        return EXIT_GUARD
    if isinstance(exc, (SchemaError, SystemSpecError, BosonicUntruncated)):
        return EXIT_SCHEMA
    if isinstance(exc, (IntegrationError, ArithmeticError, NoiseError, BCFError)):
        return EXIT_NUMERICAL
    if isinstance(exc, (ValueError, TypeError, KeyError)):
        return EXIT_SCHEMA
    return EXIT_NUMERICAL


def run(
    verb: str,
    config_text: Optional[str],
    out: Path,
    seed: Optional[int] = None,
    threads: Optional[int] = None,
    method: Optional[str] = None,
    trials: Optional[int] = None,
) -> int:
    """Execute one verb and write its artifacts; returns the exit code."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    summary: dict = {"solver": verb, "versions": _versions()}
    code = EXIT_OK
    try:
        cfg = parse_config(config_text, verb) if config_text is not None else None
        if cfg is None and verb != "verify":
            raise SchemaError("--config is required")
        if cfg is not None:
            if seed is not None:
                cfg = replace(cfg, seed=seed)
            if method is not None:
                cfg = replace(cfg, method=Method.parse(method))
            summary["seed"] = cfg.seed
            summary["method"] = cfg.method.value
        outcome = execute(cfg, verb, threads, seed, trials)
        summary.update(outcome.summary)
        if outcome.rho is not None:
            write_rho_csv(out / "rho.csv", outcome.times, outcome.rho, outcome.se)
        for name, (header, rows) in outcome.extra_csv.items():
            with open(out / name, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(header)
                w.writerows([[_fmt(v) if isinstance(v, float) else v for v in r] for r in rows])
        summary["status"] = "ok"
    except Exception as exc:  # every failure still produces a summary
        code = _exit_code(exc)
        summary["status"] = "error"
        summary["error"] = {"type": type(exc).__name__, "message": str(exc), "exit_code": code}
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
    summary["wall_time"] = time.perf_counter() - start
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, default=_json_default)
    return code


def _json_default(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    raise TypeError(f"cannot serialise {type(x).__name__}")


SWEEP_AXES = ("depth", "energy", "trajectories", "pade-count")


def sweep(
    config_text: str, axis: str, values: Sequence, out: Path, threads=None, seed=None, method=None
) -> tuple[int, list[dict]]:
    """Run the configured solver for every value along ``axis``.

    Each value gets its own subdirectory; ``convergence.csv`` lists the max
    norm difference of rho(t) between consecutive values (and, for
    trajectory sweeps, the largest standard error).
    """
    axis = axis.lower()
    if axis not in SWEEP_AXES:
        raise SchemaError(f"unknown sweep axis {axis!r}; choose from {SWEEP_AXES}")
    doc = tomli.loads(config_text)
    verb = doc.get("solver")
    if verb not in SOLVERS or verb in ("verify", "bcf", "oracle"):
        raise SchemaError("sweep needs solver = hops, master-boson or master-fermion in the config")
    out = Path(out)
    rows, prev, code = [], None, EXIT_OK
    for v in values:
        sub = out / f"{axis}_{v}"
        text = _override(config_text, axis, v)
        rc = run(verb, text, sub, seed=seed, threads=threads, method=method)
        code = max(code, rc)
        if rc != EXIT_OK:
            rows.append({"value": v, "status": "error"})
            prev = None
            continue
        data = np.loadtxt(sub / "rho.csv", delimiter=",", skiprows=1, ndmin=2)
        D2 = (data.shape[1] - 1) // 2
        if verb == "hops":
            D2 //= 2
        rho = data[:, 1 : 1 + 2 * D2]
        row = {"value": v, "status": "ok", "max_diff_to_previous": None}
        if prev is not None and prev.shape == rho.shape:
            row["max_diff_to_previous"] = float(np.max(np.abs(rho - prev)))
        if verb == "hops":
            row["max_se"] = float(np.max(data[:, 1 + 2 * D2 :]))
        rows.append(row)
        prev = rho
    out.mkdir(parents=True, exist_ok=True)
    keys = ["value", "status", "max_diff_to_previous"] + (["max_se"] if verb == "hops" else [])
    with open(out / "convergence.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=keys, extrasaction="ignore")
        w.writeheader()
        w.writerows(rows)
    return code, rows


def _override(config_text: str, axis: str, value) -> str:
    """Append the swept setting as a TOML override."""
    doc = tomli.loads(config_text)
    if axis == "depth":
        doc.setdefault("truncation", {})["depth"] = int(value)
        doc["truncation"].pop("energy", None)
    elif axis == "energy":
        doc.setdefault("truncation", {})["energy"] = float(value)
        doc["truncation"].pop("depth", None)
    elif axis == "trajectories":
        doc.setdefault("hops", {})["trajectories"] = int(value)
    elif axis == "pade-count":
        spec = doc.get("bath", {}).get("spectral")
        if spec is None:
            raise SchemaError("a pade-count sweep needs bath.spectral")
        spec["count"] = int(value)
    return _dump_toml(doc)


def _dump_toml(doc: dict, prefix: str = "") -> str:
    """Minimal TOML writer for the structures produced by :func:`parse_config` inputs."""
    scalars, tables = [], []
    for k, v in doc.items():
        if isinstance(v, dict):
            tables.append((k, v))
        else:
            scalars.append(f"{k} = {_toml_value(v)}")
    text = ""
    if prefix and scalars:
        text += f"[{prefix}]\n"
    text += "".join(s + "\n" for s in scalars)
    for k, v in tables:
        text += _dump_toml(v, f"{prefix}.{k}" if prefix else k)
    return text


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, list):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    if isinstance(v, dict):
        return "{" + ", ".join(f"{k} = {_toml_value(x)}" for k, x in v.items()) + "}"
    raise TypeError(f"cannot write {type(v).__name__} as TOML")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="openhier", description=__doc__.split("\n\n")[0].strip())
    p.add_argument("verb", choices=SOLVERS + ("sweep",))
    p.add_argument("--config", type=Path, help="TOML run description")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--seed", type=int, help="first trajectory seed (hops) or identity-check seed (verify)")
    p.add_argument("--threads", type=int, help=f"worker threads (default: ${'{'}{'OPENHIER_THREADS'}{'}'} or 1)")
    p.add_argument("--method", choices=[m.value for m in Method])
    p.add_argument("--trials", type=int, help="random trials for verify")
    p.add_argument("--axis", choices=SWEEP_AXES, help="sweep axis")
    p.add_argument("--values", help="comma-separated sweep values")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    text = None
    if args.config is not None:
        try:
            text = args.config.read_text(encoding="utf-8")
        except OSError as exc:
            print(f"error: cannot read config: {exc}", file=sys.stderr)
            return EXIT_SCHEMA
    if args.verb == "sweep":
        try:
            if text is None:
                raise SchemaError("--config is required")
            doc_axis = tomli.loads(text).get("sweep", {})
            axis = args.axis or doc_axis.get("axis")
            if axis is None:
                raise SchemaError("sweep needs --axis or sweep.axis")
            if args.values:
                values = [float(v) if axis == "energy" else int(v) for v in args.values.split(",")]
            else:
                values = doc_axis.get("values")
            if not values:
                raise SchemaError("sweep needs --values or sweep.values")
            code, rows = sweep(text, axis, values, args.out, args.threads, args.seed, args.method)
        except (SchemaError, tomli.TOMLDecodeError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            args.out.mkdir(parents=True, exist_ok=True)
            with open(args.out / "summary.json", "w") as fh:
                json.dump({"solver": "sweep", "status": "error", "error": {"type": type(exc).__name__, "message": str(exc)}}, fh, indent=2)
            return EXIT_SCHEMA
        for r in rows:
            print(r)
        return code
    return run(args.verb, text, args.out, args.seed, args.threads, args.method, args.trials)


if __name__ == "__main__":
    sys.exit(main())
