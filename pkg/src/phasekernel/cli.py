"""Command-line front end: config-driven experiments with manifest output.

Subcommands: overlap, propagate, covariance, convert, project, verify.
Exit codes: 0 success, 2 validation failure, 3 numeric failure, 4 I/O failure.
The default output root is taken from ``PHASEKERNEL_OUT`` (falling back to
``./phasekernel-out``) and may be overridden with ``--out``.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys
import time
from typing import Optional, Sequence

import numpy as np

from . import __version__, conversion, limits, oracles, pde, phasespace, projection, stochastic
from .errors import (
    BoxTooSmallError,
    ConfigError,
    ConversionViolatedError,
    DarbouxInvalidError,
    DegenerateSymplecticError,
    InvalidArgumentError,
    PhaseKernelError,
    TruncationTooSmallError,
)

_EXPERIMENTS = ("overlap", "propagate", "covariance", "convert", "project", "verify")

_NUMERIC_ERRORS = (
    BoxTooSmallError,
    ConversionViolatedError,
    DarbouxInvalidError,
    DegenerateSymplecticError,
    TruncationTooSmallError,
)


def default_out_root() -> str:
    return os.environ.get("PHASEKERNEL_OUT", os.path.join(os.getcwd(), "phasekernel-out"))


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """Validated parameters for one experiment run."""

    experiment: str
    out_dir: str
    nus: tuple = (8.0, 16.0, 32.0)
    t: float = 1.0
    q: tuple = (1.0, 0.0)
    q_prime: tuple = (0.0, 0.0)
    n_samples: int = 20000
    steps: int = 0  # 0 -> per-nu default
    seed: int = 1234
    workers: int = 1
    grid_n: int = 128
    grid_l: float = 8.0
    dt: float = 1e-3
    hamiltonian: str = "zero"  # "zero" | "harmonic"
    chart: str = "cubic"  # "cubic" | "canonical" | path to a chart JSON
    strengths: tuple = (4.0, 16.0, 64.0)
    m_samples: int = 16
    delta: float = 0.4

    def __post_init__(self):
        if self.experiment not in _EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; expected one of {_EXPERIMENTS}")
        if len(self.nus) < 1 or any(nu <= 0 for nu in self.nus):
            raise ConfigError("nus must be positive")
        if list(self.nus) != sorted(self.nus):
            raise ConfigError("nus must be increasing")
        if self.t <= 0:
            raise ConfigError("t must be positive")
        if self.n_samples < 1:
            raise ConfigError("n_samples must be positive")
        if self.m_samples < 1:
            raise ConfigError("m_samples must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be positive")
        if self.delta <= 0:
            raise ConfigError("delta must be positive")
        if any(s <= 0 for s in self.strengths):
            raise ConfigError("strengths must be positive")
        if self.chart not in ("cubic", "canonical") and not os.path.exists(self.chart):
            raise ConfigError(f"chart file not found: {self.chart}")

    @classmethod
    def from_json(cls, path: str, overrides: Optional[dict] = None) -> "RunConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if overrides:
            raw.update(overrides)
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        extra = set(raw) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        for key in ("nus", "q", "q_prime", "strengths"):
            if key in raw:
                raw[key] = tuple(raw[key])
        try:
            return cls(**raw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


@dataclasses.dataclass
class RunManifest:
    """Record of one run: inputs, timings, seeds, and every output file."""

    config_hash: str
    code_version: str
    created: str
    status: str = "RUNNING"
    stages: dict = dataclasses.field(default_factory=dict)
    seeds: dict = dataclasses.field(default_factory=dict)
    outputs: list = dataclasses.field(default_factory=list)
    error: str = ""

    def write(self, out_dir: str) -> str:
        path = os.path.join(out_dir, "manifest.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(dataclasses.asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path


def emit_plotdata(results, style: str, path: str, caption: str = "") -> list:
    """Write plain-text plot data plus a caption sidecar; returns file paths.

    ``style="sweep"`` expects records ``(nu, modulus, stderr)`` and writes a
    three-column table.  ``style="field"`` expects a GridField and delegates
    to the grid CSV writer.
    """
    if style == "sweep":
        rows = list(results)
        if not rows:
            raise InvalidArgumentError("emit_plotdata: empty results")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("# nu  modulus  stderr\n")
            for nu, mod, err in rows:
                fh.write(f"{nu:.17g} {mod:.17g} {err:.17g}\n")
    elif style == "field":
        if results is None:
            raise InvalidArgumentError("emit_plotdata: empty results")
        pde.to_csv(results, path)
    else:
        raise InvalidArgumentError(f"emit_plotdata: unknown style {style!r}")
    sidecar = path + ".caption"
    with open(sidecar, "w", encoding="utf-8") as fh:
        fh.write(caption + "\n")
    return [path, sidecar]


def _write_json(payload: dict, path: str):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def _action_spec(config: RunConfig) -> stochastic.ActionSpec:
    if config.hamiltonian == "zero":
        return stochastic.ActionSpec()
    if config.hamiltonian == "harmonic":
        return stochastic.ActionSpec(hamiltonian_symbol=lambda q: 0.5 * np.sum(q ** 2, axis=-1) - 1.0)
    raise ConfigError(f"unknown hamiltonian {config.hamiltonian!r}")


def _h_field(config: RunConfig):
    if config.hamiltonian == "zero":
        return None
    if config.hamiltonian == "harmonic":
        return lambda q: 0.5 * np.sum(np.asarray(q) ** 2, axis=-1) - 1.0
    raise ConfigError(f"unknown hamiltonian {config.hamiltonian!r}")


def _load_chart(config: RunConfig) -> phasespace.ChartSpec:
    if config.chart == "cubic":
        return phasespace.cubic_chart()
    if config.chart == "canonical":
        return phasespace.canonical_chart(1)
    return phasespace.load_chart(config.chart)


# ---------------------------------------------------------------------------
# experiment bodies; each returns (results dict, output file list)


def _run_overlap(config: RunConfig, out_dir: str, manifest: RunManifest):
    spec = _action_spec(config)
    d = len(config.q) // 2
    estimates = []
    for i, nu in enumerate(config.nus):
        steps = config.steps or stochastic.default_steps(nu, config.t)
        est = stochastic.mc_kernel(
            d, nu, config.t, config.q, config.q_prime, spec,
            n_samples=config.n_samples, steps=steps,
            seed=config.seed, workers=config.workers,
        )
        manifest.seeds[f"nu={nu:g}"] = config.seed
        estimates.append(est)
    sweep = limits.NuSweep(nus=tuple(config.nus), estimates=tuple(estimates),
                           t=config.t, q=np.asarray(config.q),
                           q_prime=np.asarray(config.q_prime))
    result = limits.extrapolate(sweep)
    payload = {
        "nus": list(config.nus),
        "values": [[e.value.real, e.value.imag] for e in estimates],
        "stderrs": [e.stderr for e in estimates],
        "extrapolated": [result.value.real, result.value.imag],
        "modulus": abs(result.value),
        "model": result.model,
        "fit_residual": result.fit_residual,
        "reliable": result.reliable,
    }
    json_path = os.path.join(out_dir, "overlap.json")
    _write_json(payload, json_path)
    rows = [(nu, abs(e.value), e.stderr) for nu, e in zip(config.nus, estimates)]
    files = [json_path] + emit_plotdata(
        rows, "sweep", os.path.join(out_dir, "overlap_sweep.dat"),
        caption="columns: regulator nu, kernel modulus, standard error",
    )
    return payload, files


def _run_propagate(config: RunConfig, out_dir: str, manifest: RunManifest):
    spec = pde.GridSpec(N=config.grid_n, L=config.grid_l, dt=config.dt)
    results = []
    field = None
    for nu in config.nus:
        gen = pde.GeneratorSpec(nu=nu, h_field=_h_field(config))
        field = pde.kernel_from_delta(config.q_prime, gen, config.t, spec)
        value = pde.read_value(field, config.q)
        scale = limits.normalization(nu, config.t, d=1)
        scaled = complex(scale) * value if not isinstance(scale, limits.LogScaledValue) else value
        results.append({"nu": nu, "raw": [value.real, value.imag],
                        "scaled": [scaled.real, scaled.imag]})
    json_path = os.path.join(out_dir, "propagate.json")
    _write_json({"t": config.t, "q": list(config.q), "q_prime": list(config.q_prime),
                 "hamiltonian": config.hamiltonian, "results": results}, json_path)
    files = [json_path] + emit_plotdata(
        field, "field", os.path.join(out_dir, "field.csv"),
        caption=f"kernel field at t={config.t:g} for nu={config.nus[-1]:g}, grid {config.grid_n}",
    )
    return {"results": results}, files


def _run_covariance(config: RunConfig, out_dir: str, manifest: RunManifest):
    nu = config.nus[-1]
    gen = pde.GeneratorSpec(nu=nu)
    spec_cart = pde.GridSpec(N=config.grid_n, L=config.grid_l, dt=config.dt, enforce_band=False)
    # Pins must sit inside the polar box (r in [0.5, 6]) and away from grid
    # edges; substitute suitable points when the generic defaults are in use.
    q, qp = config.q, config.q_prime
    if tuple(qp) == (0.0, 0.0):
        q, qp = (1.8, 2.6), (2.2, 2.2)
    rows = {}
    for name, cmap, spec_curv in (
        ("rotation", phasespace.rotation_map(0.3),
         pde.GridSpec(N=config.grid_n, L=config.grid_l, dt=config.dt, enforce_band=False)),
        ("polar", phasespace.polar_map(),
         pde.GridSpec(N=config.grid_n, L=config.grid_l, dt=config.dt,
                      box=((0.5, 6.0), (0.0, 2.0 * np.pi)),
                      periodic=(False, True), enforce_band=False)),
    ):
        cart, curv, diff = pde.covariance_compare(
            cmap, gen, config.t, q, qp, spec_cart, spec_curv)
        rows[name] = {"cartesian": [cart.real, cart.imag],
                      "curvilinear": [curv.real, curv.imag],
                      "discrepancy": diff}
    json_path = os.path.join(out_dir, "covariance.json")
    _write_json({"nu": nu, "t": config.t, "maps": rows}, json_path)
    return rows, [json_path]


def _run_convert(config: RunConfig, out_dir: str, manifest: RunManifest):
    chart = _load_chart(config)
    if chart.name == "cubic":
        darboux = conversion.cubic_darboux()
    elif chart.name == "canonical":
        darboux = conversion.identity_darboux()
    else:
        raise ConfigError(
            "convert requires a shipped chart ('cubic' or 'canonical'); "
            "custom charts need an explicit Darboux map via the library API")
    darboux = conversion.build_darboux(chart, darboux.Q, darboux.q_of_Q,
                                       jacobian=darboux.jacobian, name=chart.name)
    bracket_residual = conversion.dirac_bracket_check(chart, n_samples=50, seed=config.seed)
    h_base = lambda q: 0.5 * float(np.sum(np.asarray(q) ** 2))
    conversion.build_extended(chart, darboux, h_base, n_samples=25, seed=config.seed)
    payload = {
        "chart": chart.name,
        "dirac_bracket_residual": bracket_residual,
        "conversion_identities": "verified",
    }
    json_path = os.path.join(out_dir, "convert.json")
    _write_json(payload, json_path)
    return payload, [json_path]


def _run_project(config: RunConfig, out_dir: str, manifest: RunManifest):
    spec = pde.GridSpec(N=max(64, min(config.grid_n, 128)), L=4.0, dt=5e-3,
                        enforce_band=False)
    gen = pde.GeneratorSpec(nu=0.5)
    sigma = lambda q: np.asarray(q)[..., 0]
    ref = projection.projected_reference(gen, sigma, config.delta, config.q_prime,
                                         config.t, spec, enforce_accuracy=False)
    rows = []
    for strength in config.strengths:
        measure = projection.XiMeasureSpec("white-noise", strength, seed=config.seed)
        manifest.seeds[f"strength={strength:g}"] = config.seed
        mean, spread = projection.evolve_projected(
            gen, sigma, measure, config.m_samples, config.q_prime, config.t, spec,
            enforce_accuracy=False)
        rel = projection.relative_l2(mean.values, ref.values)
        rows.append({"strength": strength, "relative_l2": rel,
                     "spread": float(np.linalg.norm(spread.values))})
    json_path = os.path.join(out_dir, "project.json")
    _write_json({"delta": config.delta, "M": config.m_samples, "results": rows}, json_path)
    plot_rows = [(r["strength"], r["relative_l2"], r["spread"]) for r in rows]
    files = [json_path] + emit_plotdata(
        plot_rows, "sweep", os.path.join(out_dir, "project_sweep.dat"),
        caption="columns: noise strength, relative L2 distance to window reference, sample spread",
    )
    return {"results": rows}, files


def _run_verify(config: RunConfig, out_dir: str, manifest: RunManifest):
    checks = {}
    val = oracles.coherent_overlap((1.0, 0.0), (0.0, 0.0))
    checks["overlap_gaussian"] = abs(val - np.exp(-0.25)) < 1e-12
    spec = oracles.FockSpec(truncation=60, coeffs=(-1.0, 1.0))
    k0 = oracles.fock_propagator(spec, 0.0, (1.0, 0.0), (0.0, 0.0))
    checks["propagator_t0_reduces_to_overlap"] = abs(k0 - val) < 1e-10
    h = oracles.symbol_for(spec)
    checks["symbol_resynthesis"] = oracles.resynthesis_error(h, spec) < 1e-8
    checks["unitarity"] = oracles.unitarity_defect(spec, 1.0, (0.5, 0.5)) < 1e-8
    n0 = limits.normalization(0.0, 1.0, d=1)
    n2 = limits.normalization(2.0, 1.0, d=1)
    checks["normalization_flat"] = abs(n0 - 2.0 * np.pi) < 1e-12
    checks["normalization_regulated"] = abs(n2 - 2.0 * np.pi * np.e) < 1e-10
    json_path = os.path.join(out_dir, "verify.json")
    _write_json({"checks": checks, "all_passed": all(checks.values())}, json_path)
    if not all(checks.values()):
        failed = [k for k, v in checks.items() if not v]
        raise PhaseKernelError(f"oracle self-checks failed: {failed}")
    return {"checks": checks}, [json_path]


_BODIES = {
    "overlap": _run_overlap,
    "propagate": _run_propagate,
    "covariance": _run_covariance,
    "convert": _run_convert,
    "project": _run_project,
    "verify": _run_verify,
}


def run(config: RunConfig) -> RunManifest:
    """Execute one experiment end-to-end and write its manifest."""
    out_dir = config.out_dir
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out_dir}: {exc}") from exc
    manifest = RunManifest(
        config_hash=config.digest(),
        code_version=__version__,
        created=time.strftime("%Y-%m-%dT%H:%M:%S"),
    )
    config_path = os.path.join(out_dir, "config.json")
    _write_json(config.to_dict(), config_path)
    manifest.outputs.append(config_path)
    manifest.seeds["base"] = config.seed
    start = time.perf_counter()
    try:
        _, files = _BODIES[config.experiment](config, out_dir, manifest)
        manifest.outputs.extend(files)
        manifest.stages[config.experiment] = time.perf_counter() - start
        manifest.status = "OK"
    except Exception as exc:
        manifest.stages[config.experiment] = time.perf_counter() - start
        manifest.status = "FAILED"
        manifest.error = f"{config.experiment}: {type(exc).__name__}: {exc}"
        manifest.outputs.append(os.path.join(out_dir, "manifest.json"))
        manifest.write(out_dir)
        raise
    manifest.outputs.append(os.path.join(out_dir, "manifest.json"))
    manifest.write(out_dir)
    return manifest


def _parse_nus(text: str) -> tuple:
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"--nu expects a comma-separated list of reals: {exc}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="phasekernel",
        description="Regularized coherent-state kernel experiments.",
    )
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in _EXPERIMENTS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--nu", type=str, default=None, help="comma-separated nu list")
        p.add_argument("--samples", type=int, default=None)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {"experiment": args.experiment}
    if args.out is not None:
        overrides["out_dir"] = args.out
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.samples is not None:
        overrides["n_samples"] = args.samples
    try:
        if args.nu is not None:
            overrides["nus"] = _parse_nus(args.nu)
        if args.config is not None:
            config = RunConfig.from_json(args.config, overrides)
        else:
            overrides.setdefault(
                "out_dir", os.path.join(default_out_root(), args.experiment))
            config = RunConfig.from_dict(overrides)
    except (ConfigError, InvalidArgumentError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        manifest = run(config)
    except (ConfigError, InvalidArgumentError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except _NUMERIC_ERRORS as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except PhaseKernelError as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return 4
    print(f"OK: wrote {len(manifest.outputs)} files to {config.out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
