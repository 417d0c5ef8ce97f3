"""Scenario loading and engine execution behind the command line."""

from __future__ import annotations

import copy
import hashlib
import io
import itertools
import json
import math
import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .errors import ConditioningError, InputError, SemanticsError
from .fock import Dissipator, SystemSpec, evolve, gaussian_rho, moments_from_rho, spohn_rate, von_neumann_entropy
from .gaussian import BathSpec
from .gksl import lieb_convexity_sweep, spohn_positivity_sweep
from .micro import compare_with_master, energy_balance, run_micro
from .moments import (
    Moments,
    chi_alpha,
    evolve_moments,
    heat_current,
    rate_report,
    system_entropy_from_moments,
    thermal_epr,
)

SEED_ENV = "ENTROFLUX_SEED"
FLOAT_FMT = "%.12g"


class ConfigError(InputError):
    """Schema or cross-field violation; ``path`` names the offending field."""

    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


def load_schema() -> dict:
    return json.loads(resources.files("entroflux").joinpath("scenario.schema.json").read_text())


@dataclass
class Scenario:
    config: dict

    @classmethod
    def from_dict(cls, raw: dict, env: dict | None = None) -> "Scenario":
        env = os.environ if env is None else env
        try:
            jsonschema.validate(raw, load_schema())
        except jsonschema.ValidationError as exc:
            path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigError(exc.message, path) from None
        cfg = copy.deepcopy(raw)
        if env.get(SEED_ENV):
            try:
                cfg["seed"] = int(env[SEED_ENV])
            except ValueError:
                raise ConfigError(f"{SEED_ENV} must be an integer", SEED_ENV) from None
        cfg.setdefault("seed", 0)
        cfg.setdefault("samples", 101)
        cfg.setdefault("normalized", False)
        cfg.setdefault("initial", {"kind": "vacuum"})
        cfg["system"].setdefault("dim", 40)
        for b in cfg["baths"]:
            b.setdefault("r", 0.0)
            b.setdefault("theta", 0.0)
        scen = cls(cfg)
        scen.initial_moments()
        return scen

    @classmethod
    def load(cls, path) -> "Scenario":
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read scenario: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from None
        return cls.from_dict(raw)

    @property
    def omega(self) -> float:
        return float(self.config["system"]["omega"])

    @property
    def seed(self) -> int:
        return int(self.config["seed"])

    def digest(self) -> str:
        blob = json.dumps(self.config, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def baths(self) -> list[BathSpec]:
        out = []
        for b in self.config["baths"]:
            if "nbar" in b:
                out.append(BathSpec.from_occupation(b["nbar"], self.omega, b["gamma"], b["r"], b["theta"]))
            else:
                out.append(BathSpec(b["temperature"], b["gamma"], b["r"], b["theta"]))
        return out

    def initial_moments(self) -> Moments:
        init = self.config["initial"]
        kind = init["kind"]
        need = {"thermal": ["nbar"], "coherent": ["alpha"], "moments": ["a_mean", "a_sq", "n"]}.get(kind, [])
        for key in need:
            if key not in init:
                raise ConfigError(f"initial kind {kind!r} needs {key!r}", f"initial/{key}")
        if kind == "vacuum":
            m = Moments.vacuum()
        elif kind == "thermal":
            m = Moments.thermal(init["nbar"])
        elif kind == "coherent":
            m = Moments.coherent(complex(*init["alpha"]))
        else:
            m = Moments(complex(*init["a_mean"]), complex(*init["a_sq"]), init["n"])
        if not m.is_physical():
            raise ConfigError("initial moments violate the uncertainty relation", "initial")
        return m

    @property
    def horizon(self) -> float:
        """Horizon in time units; ``horizon_unit: decay`` counts it in 1/Gamma."""
        h = float(self.config["horizon"])
        if self.config.get("horizon_unit", "time") == "decay":
            h /= sum(b.gamma for b in self.baths())
        return h

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, int(self.config["samples"]))

    def with_point(self, point: dict) -> "Scenario":
        cfg = copy.deepcopy(self.config)
        cfg.pop("grid", None)
        for key, value in point.items():
            if key == "seed":
                cfg["seed"] = int(value)
                continue
            for b in cfg["baths"]:
                if key == "nbar":
                    b.pop("temperature", None)
                b[key] = value
        return Scenario(cfg)


# ---------------------------------------------------------------------------
# output


def write_atomic(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "nan"
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, str):
        return x
    return FLOAT_FMT % (float(x) + 0.0)


def render_csv(columns: list[str], rows, scenario: Scenario, engine: str) -> str:
    buf = io.StringIO()
    buf.write(f"# entroflux {__version__}\n")
    buf.write(f"# scenario_sha256 {scenario.digest()}\n")
    buf.write(f"# engine {engine}\n")
    buf.write(f"# normalized {str(scenario.config['normalized']).lower()}\n")
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue()


# ---------------------------------------------------------------------------
# engines


@dataclass
class EngineResult:
    columns: list
    rows: list
    assertions: dict = field(default_factory=dict)


def _scale(scen: Scenario):
    """(time factor, rate factor) for the output units."""
    if scen.config["normalized"]:
        return scen.omega, 1.0 / scen.omega
    return 1.0, 1.0


def run_moments(scen: Scenario) -> EngineResult:
    baths = scen.baths()
    omega = scen.omega
    want_rep = scen.config.get("rep")
    thermal = all(b.is_thermal for b in baths)
    if want_rep is None:
        want_rep = thermal
    m0 = scen.initial_moments()
    times = scen.times()
    ms = [evolve_moments(m0, baths, omega, t) for t in times]
    k = len(baths)
    columns = (["t", "S_S", "dS_S"] + [f"Q{i + 1}" for i in range(k)] + [f"chi{i + 1}" for i in range(k)]
               + [f"RSp{i + 1}" for i in range(k)] + ["RSp"] + (["Rep"] if want_rep else []))
    rep = thermal_epr(ms, baths, omega) if want_rep else None
    tf, rf = _scale(scen)
    rows = []
    worst_rsp = math.inf
    worst_gap = 0.0
    for i, (t, m) in enumerate(zip(times, ms)):
        heat = [heat_current(m, b, omega) for b in baths]
        chi = [chi_alpha(m, b, omega) for b in baths]
        try:
            r = rate_report(t, m, baths, omega, with_epr=False)
        except ConditioningError:
            # pure state: ln rho is unbounded, so dS_S and the Spohn rates are undefined here
            rows.append([t * tf, system_entropy_from_moments(m), math.nan] + [x * rf for x in heat + chi]
                        + [math.nan] * (k + 1) + ([math.nan] if want_rep else []))
            continue
        row = [t * tf, r.S_S, r.dS_S * rf] + [x * rf for x in r.heat + r.chi + r.spohn] + [r.R_Sp * rf]
        worst_rsp = min(worst_rsp, min(r.spohn))
        if want_rep:
            row.append(rep[i] * rf)
            worst_gap = max(worst_gap, abs(rep[i] - r.R_Sp))
        rows.append(row)
    assertions = {"spohn_nonnegative": bool(worst_rsp >= -1e-8)}
    if want_rep:
        assertions["rep_equals_rsp"] = bool(worst_gap < 1e-5)
    return EngineResult(columns, rows, assertions)


def run_fock(scen: Scenario) -> EngineResult:
    baths = scen.baths()
    omega = scen.omega
    dim = int(scen.config["system"]["dim"])
    m0 = scen.initial_moments()
    diss = [Dissipator(b, SystemSpec(omega, dim)) for b in baths]
    times = scen.times()
    traj = evolve(gaussian_rho(m0, dim), diss, times)
    k = len(baths)
    columns = ["t", "n", "a_sq_re", "a_sq_im", "a_mean_re", "a_mean_im", "S_S"] + [f"RSp{i + 1}" for i in range(k)] + ["RSp"]
    tf, rf = _scale(scen)
    rows = []
    worst = 0.0
    for t, rho in traj:
        fm = moments_from_rho(rho)
        cm = evolve_moments(m0, baths, omega, t)
        worst = max(worst, abs(fm.n - cm.n), abs(fm.a_sq - cm.a_sq), abs(fm.a_mean - cm.a_mean))
        S = von_neumann_entropy(rho)
        if S < 1e-10:
            rates = [math.nan] * k
        else:
            rates = [spohn_rate(rho, d) * rf for d in diss]
        rows.append([t * tf, fm.n, fm.a_sq.real, fm.a_sq.imag, fm.a_mean.real, fm.a_mean.imag, S] + rates + [sum(rates)])
    return EngineResult(columns, rows, {"moments_match_closed_form": bool(worst <= 1e-6)})


def run_micro_engine(scen: Scenario) -> EngineResult:
    opts = scen.config.get("micro", {})
    baths = scen.baths()
    Gamma = sum(b.gamma for b in baths)
    n_steps = int(opts.get("n_steps", 400))
    traj = run_micro(baths, scen.omega, scen.initial_moments(), n_modes=int(opts.get("n_modes", 200)),
                     width_factor=float(opts.get("width_factor", 40.0)),
                     horizon_factor=scen.horizon * Gamma, n_steps=n_steps,
                     layout=opts.get("layout", "pair"))
    window = tuple(opts.get("window", (1.0, 4.0)))
    comp = compare_with_master(traj, window)
    k = len(baths)
    columns = (["t", "S_S"] + [f"S_B{i + 1}" for i in range(k)] + ["I_SB", "R_I", "RSp"]
               + [f"chi{i + 1}" for i in range(k)] + [f"dSB_fd{i + 1}" for i in range(k)]
               + [f"dSB_ref{i + 1}" for i in range(k)])
    tf, rf = _scale(scen)
    rows = []
    for i, t in enumerate(traj.times):
        rows.append([t * tf, traj.S_S[i]] + list(traj.S_B[i]) + [comp.mutual_information[i], comp.R_I[i] * rf, comp.R_Sp[i] * rf]
                    + [x * rf for x in comp.chi[i]] + [x * rf for x in comp.dS_B_fd[i]] + [x * rf for x in comp.dS_B_ref[i]])
    scale = max(1.0, float(np.max(np.abs(traj.energies()["system"]))))
    assertions = {
        "unitarity": bool(np.max(traj.spectrum_drift) < 1e-8),
        "energy_balance": bool(np.max(np.abs(energy_balance(traj))) < 1e-6 * scale),
        "mutual_information_nonnegative": bool(np.min(comp.mutual_information) >= -1e-9),
    }
    return EngineResult(columns, rows, assertions)


def run_gksl(scen: Scenario) -> EngineResult:
    opts = scen.config.get("gksl", {})
    samples = int(opts.get("samples", 1000))
    dims = tuple(opts.get("dims", (2, 3, 4)))
    dump = opts.get("dump_dir")
    if dump:
        Path(dump).mkdir(parents=True, exist_ok=True)
    results = [lieb_convexity_sweep(samples, dims, scen.seed, dump_dir=dump),
               spohn_positivity_sweep(samples, dims, scen.seed + 1, dump_dir=dump)]
    rows = [[r.name, r.samples, r.minimum, r.tolerance, len(r.counterexamples)] for r in results]
    return EngineResult(["probe", "samples", "minimum", "tolerance", "counterexamples"], rows,
                        {r.name: r.passed for r in results})


ENGINES = {"moments": run_moments, "fock": run_fock, "micro": run_micro_engine, "gksl-sweep": run_gksl}


def _validate_engines(scen: Scenario):
    engines = scen.config["engines"]
    if scen.config.get("rep") and any(not b.is_thermal for b in scen.baths()):
        raise SemanticsError("R_ep was requested but a bath is squeezed: the bath temperature is not well "
                             "defined, so dQ/T is not the bath entropy flow; use R_Sp instead")
    if not engines:
        raise ConfigError("no engines requested", "engines")


def execute(scen: Scenario) -> tuple[dict, dict]:
    """Run every requested engine; returns ({engine: EngineResult}, timings)."""
    _validate_engines(scen)
    results, timings = {}, {}
    for name in scen.config["engines"]:
        start = time.perf_counter()
        results[name] = ENGINES[name](scen)
        timings[name] = time.perf_counter() - start
    return results, timings


def run(scen: Scenario, out_dir) -> dict:
    out_dir = Path(out_dir)
    start = time.perf_counter()
    results, timings = execute(scen)
    outputs = {}
    for name, res in results.items():
        path = out_dir / f"{name}.csv"
        write_atomic(path, render_csv(res.columns, res.rows, scen, name))
        outputs[name] = str(path)
    manifest = {
        "tool": "entroflux",
        "version": __version__,
        "scenario_sha256": scen.digest(),
        "config": scen.config,
        "wall_clock_seconds": time.perf_counter() - start,
        "engine_seconds": timings,
        "outputs": outputs,
        "assertions": {name: res.assertions for name, res in results.items()},
    }
    write_atomic(out_dir / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


# ---------------------------------------------------------------------------
# sweeps


def grid_points(scen: Scenario) -> list[dict]:
    grid = scen.config.get("grid") or {}
    keys = sorted(k for k, v in grid.items())
    if not keys or any(len(grid[k]) == 0 for k in keys):
        raise ConfigError("sweep grid is empty", "grid")
    return [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]


def summarize_point(args) -> dict:
    config, point = args
    scen = Scenario(config).with_point(point)
    results, _ = execute(scen)
    summary = {"point": point, "min_RSp": math.nan, "max_rel_dev": math.nan, "min_probe": math.nan}
    if "moments" in results:
        cols = results["moments"].columns
        k = len(scen.baths())
        idx = [cols.index(f"RSp{i + 1}") for i in range(k)]
        vals = [row[j] for row in results["moments"].rows for j in idx]
        summary["min_RSp"] = float(np.nanmin(vals))
    if "micro" in results:
        opts = scen.config.get("micro", {})
        traj_rows = np.array(results["micro"].rows, dtype=float)
        cols = results["micro"].columns
        t = traj_rows[:, 0]
        Gamma = sum(b.gamma for b in scen.baths())
        lo, hi = opts.get("window", (1.0, 4.0))
        tf = scen.omega if scen.config["normalized"] else 1.0
        mask = (t >= lo / Gamma * tf - 1e-12) & (t <= hi / Gamma * tf + 1e-12)
        RI, RSp = traj_rows[mask, cols.index("R_I")], traj_rows[mask, cols.index("RSp")]
        if RI.size:
            summary["max_rel_dev"] = float(np.max(np.abs(RI - RSp) / np.abs(RSp)))
        if not results.get("moments"):
            summary["min_RSp"] = float(np.nanmin(traj_rows[:, cols.index("RSp")]))
    if "gksl-sweep" in results:
        summary["min_probe"] = float(min(row[2] for row in results["gksl-sweep"].rows))
    return summary


def sweep(scen: Scenario, out_dir, jobs: int = 1) -> dict:
    out_dir = Path(out_dir)
    start = time.perf_counter()
    _validate_engines(scen)
    points = grid_points(scen)
    tasks = [(scen.config, p) for p in points]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            summaries = list(pool.map(summarize_point, tasks))
    else:
        summaries = [summarize_point(t) for t in tasks]
    keys = sorted(points[0])
    summaries.sort(key=lambda s: tuple(s["point"][k] for k in keys))
    # local log-log slope of the deviation against the first grid key
    slopes = [math.nan]
    for a, b in zip(summaries, summaries[1:]):
        x0, x1 = a["point"][keys[0]], b["point"][keys[0]]
        y0, y1 = a["max_rel_dev"], b["max_rel_dev"]
        if x0 > 0 and x1 > 0 and x0 != x1 and y0 > 0 and y1 > 0:
            slopes.append(math.log(y1 / y0) / math.log(x1 / x0))
        else:
            slopes.append(math.nan)
    columns = keys + ["min_RSp", "max_rel_dev", "convergence_slope", "min_probe"]
    rows = [[s["point"][k] for k in keys] + [s["min_RSp"], s["max_rel_dev"], sl, s["min_probe"]]
            for s, sl in zip(summaries, slopes)]
    path = out_dir / "sweep.csv"
    write_atomic(path, render_csv(columns, rows, scen, "sweep"))
    devs = [s["max_rel_dev"] for s in summaries]
    manifest = {
        "tool": "entroflux",
        "version": __version__,
        "scenario_sha256": scen.digest(),
        "config": scen.config,
        "wall_clock_seconds": time.perf_counter() - start,
        "points": len(points),
        "outputs": {"sweep": str(path)},
        "assertions": {
            "spohn_nonnegative": bool(all(not (s["min_RSp"] < -1e-8) for s in summaries)),
            "deviation_decreases_with_gamma": bool(
                all(math.isnan(d) for d in devs) or keys[0] != "gamma"
                or all(b < a for a, b in zip(devs[::-1], devs[::-1][1:]))),
        },
    }
    write_atomic(out_dir / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest
