"""Command-line surface: parameter sweeps, figure-data presets, dynamics runs.

Verbs: phases, witness, sweep, figure <preset>, evolve, validate-appendix.
Sweep output is one row per (R, Gamma) grid point, R outer ascending and
Gamma inner ascending, every float printed with 17 significant digits so
files are bit-reproducible across runs.  Exit codes: 0 full success,
1 configuration error, 2 a sweep finished with failed rows.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from . import phases as phase_mod
from .bound import bound_check, bound_check_branched
from .dynamics import (Grid1D, PotentialModel, TrajectoryPair, TwoParticleWave,
                       assemble_wave, boundary_density, branch_product_waves,
                       entanglement_entropy, evolve, evolve_branched,
                       gaussian_packet, packet_sum, potential_field,
                       product_wave, save_checkpoint)
from .errors import BohmgravError, ConfigError, UntunableError
from .phases import CouplingConfig, GammaModel, phases_auto
from .special import PacketGeometry
from .witness import witness_w, witness_wg, W3_THETA, W4_THETA

SCHEMA_VERSION = 1

SWEEP_COLUMNS = ("R", "Gamma", "phi_plus", "phi_minus", "phi_sigma", "phi_delta",
                 "global_phase", "W", "W3", "W4", "method", "error")

MODES = ("phases", "witness", "sweep", "figure", "evolve", "validate-appendix")

# Figure presets: geometry and coupling grids of the reference sweeps.  The
# R axis of the phase sweeps is a package choice (log-spaced over
# [0.01, 5]); the witness-pair preset stops at R = 0.5.
PRESETS = {
    "fig2a": {"geometry": {"delta_x_big": 0.25, "delta_x_small": 0.1},
              "gamma_big": [1.0],
              "r": {"kind": "log", "start": 0.01, "stop": 5.0, "num": 60}},
    "fig2b": {"geometry": {"delta_x_big": 2.5, "delta_x_small": 1.0},
              "gamma_big": [1.0],
              "r": {"kind": "log", "start": 0.01, "stop": 5.0, "num": 60}},
    "fig2c": {"geometry": {"delta_x_big": 3.0, "delta_x_small": 0.5},
              "gamma_big": [1.0],
              "r": {"kind": "log", "start": 0.01, "stop": 5.0, "num": 60}},
    "fig2d": {"geometry": {"delta_x_big": 2.0, "delta_x_small": 1.9},
              "gamma_big": [1.0],
              "r": {"kind": "log", "start": 0.01, "stop": 5.0, "num": 60}},
    "fig3": {"geometry": {"delta_x_big": 0.25, "delta_x_small": 0.1},
             "gamma_big": [0.5, 1.0, 2.0],
             "r": {"kind": "log", "start": 0.01, "stop": 5.0, "num": 60}},
    "fig4": {"geometry": {"delta_x_big": 0.25, "delta_x_small": 0.1},
             "gamma_big": [0.5, 1.0, 2.0],
             "r": {"kind": "log", "start": 0.01, "stop": 0.5, "num": 40}},
}

APPENDIX_PRESETS = {
    "narrow-weak": {
        "grid": {"x_min": -10.0, "x_max": 10.0, "n": 128},
        "masses": [10.0, 10.0],
        "initial": {"kind": "product", "centers": [-3.0, 3.0], "sigma": 1.0},
        "potential": {"variant": "bohm_point", "coupling": 0.05, "softening": 0.1},
        "T": 2.0, "steps": 200, "k_sigma": 5.0,
    },
    "hybrid-window": {
        "grid": {"x_min": -10.0, "x_max": 10.0, "n": 128},
        "masses": [10.0, 10.0],
        "initial": {"kind": "product", "centers": [-3.0, 3.0], "sigma": 1.0},
        "potential": {"variant": "hybrid_r", "coupling": 0.05, "softening": 0.1,
                      "r_window": 1.5},
        "T": 2.0, "steps": 200, "k_sigma": 5.0,
    },
    "two-branch": {
        "grid": {"x_min": -9.0, "x_max": 9.0, "n": 128},
        "masses": [20.0, 20.0],
        "initial": {"kind": "branches", "centers1": [1.5, 4.5], "centers2": [-3.0],
                    "sigma": 0.7},
        "potential": {"variant": "bohm_point", "coupling": 0.05, "softening": 0.1,
                      "gamma": "point"},
        "T": 2.0, "steps": 200, "k_sigma": 5.0,
    },
}


@dataclass
class RunConfig:
    mode: str
    geometry: dict = field(default_factory=dict)
    gamma_big: list = field(default_factory=lambda: [1.0])
    r: object = 1.0
    gamma_model: str = "zero"
    quadrature: dict = field(default_factory=dict)
    dynamics: dict = field(default_factory=dict)
    output: object = None
    format: str = "csv"

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        problems = []
        if data.get("version", SCHEMA_VERSION) != SCHEMA_VERSION:
            problems.append(f"unsupported config version {data.get('version')!r}")
        mode = data.get("mode")
        if mode not in MODES:
            problems.append(f"mode must be one of {MODES}, got {mode!r}")
        geometry = data.get("geometry", {})
        if mode in ("phases", "witness", "sweep", "figure"):
            dxb = geometry.get("delta_x_big")
            dxs = geometry.get("delta_x_small")
            if not isinstance(dxb, (int, float)):
                problems.append("geometry.delta_x_big must be a number")
            if not isinstance(dxs, (int, float)):
                problems.append("geometry.delta_x_small must be a number")
            if isinstance(dxb, (int, float)) and isinstance(dxs, (int, float)):
                if dxs < 0:
                    problems.append("geometry.delta_x_small must be >= 0")
                if dxb - dxs <= 0:
                    problems.append("geometry must satisfy delta_x_big > delta_x_small")
        gammas = data.get("gamma_big", [1.0])
        if isinstance(gammas, (int, float)):
            gammas = [gammas]
        if not all(isinstance(g, (int, float)) and g >= 0 for g in gammas):
            problems.append("gamma_big entries must be numbers >= 0")
        r_spec = data.get("r", 1.0)
        try:
            r_values = resolve_r_spec(r_spec)
            if any(v < 0 for v in r_values):
                problems.append("r values must be >= 0")
        except (TypeError, KeyError, ValueError):
            problems.append(f"bad r specification {r_spec!r}")
        gm = data.get("gamma_model", "zero")
        if gm not in ("zero", "point_newtonian", "smoothed_newtonian"):
            problems.append(f"gamma_model must be zero|point_newtonian|smoothed_newtonian, got {gm!r}")
        fmt = data.get("format", "csv")
        if fmt not in ("csv", "json"):
            problems.append(f"format must be csv or json, got {fmt!r}")
        quad = data.get("quadrature", {})
        if quad and not isinstance(quad, dict):
            problems.append("quadrature must be an object")
        dyn = data.get("dynamics", {})
        if mode in ("evolve", "validate-appendix") and not dyn and not data.get("preset"):
            problems.append(f"mode {mode} needs a dynamics block (or a preset)")
        if problems:
            raise ConfigError(problems)
        return cls(mode=mode, geometry=dict(geometry), gamma_big=[float(g) for g in gammas],
                   r=r_spec, gamma_model=gm, quadrature=dict(quad), dynamics=dict(dyn),
                   output=data.get("output"), format=fmt)

    def to_dict(self) -> dict:
        return {
            "version": SCHEMA_VERSION,
            "mode": self.mode,
            "geometry": self.geometry,
            "gamma_big": self.gamma_big,
            "r": self.r,
            "gamma_model": self.gamma_model,
            "quadrature": self.quadrature,
            "dynamics": self.dynamics,
            "output": self.output,
            "format": self.format,
        }

    def to_json(self) -> str:
        """Canonical serialization (sorted keys, two-space indent, newline)."""
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def resolve_r_spec(spec) -> list:
    if isinstance(spec, (int, float)):
        return [float(spec)]
    if isinstance(spec, (list, tuple)):
        return [float(v) for v in spec]
    if isinstance(spec, dict):
        kind = spec.get("kind", "log")
        num = int(spec["num"])
        if kind == "log":
            vals = np.logspace(math.log10(spec["start"]), math.log10(spec["stop"]), num)
        elif kind == "linear":
            vals = np.linspace(spec["start"], spec["stop"], num)
        else:
            raise ValueError(f"unknown r kind {kind!r}")
        return [float(v) for v in vals]
    raise TypeError(f"bad r spec {spec!r}")


def _gamma_model(name: str) -> GammaModel:
    return {"zero": GammaModel.zero(),
            "point_newtonian": GammaModel.point_newtonian(),
            "smoothed_newtonian": GammaModel.smoothed_newtonian()}[name]


def _apply_quadrature_overrides(quad: dict):
    if "epsabs_scale" in quad:
        phase_mod.QUAD_EPSABS_SCALE = float(quad["epsabs_scale"])
    if "epsrel" in quad:
        phase_mod.QUAD_EPSREL = float(quad["epsrel"])
    if "limit" in quad:
        phase_mod.QUAD_LIMIT = int(quad["limit"])


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.17g}"
    return "" if value is None else str(value)


def sweep_rows(config: RunConfig):
    """Deterministic row sequence; failures land in the row's error column."""
    geom = PacketGeometry(config.geometry["delta_x_big"], config.geometry["delta_x_small"])
    gamma = _gamma_model(config.gamma_model)
    _apply_quadrature_overrides(config.quadrature)
    rows = []
    failures = 0
    for R in sorted(resolve_r_spec(config.r)):
        for g in sorted(config.gamma_big):
            row = {"R": R, "Gamma": g, "error": ""}
            try:
                ps, method = phases_auto(R, geom, CouplingConfig(g), gamma)
                row.update({
                    "phi_plus": ps.phi_plus, "phi_minus": ps.phi_minus,
                    "phi_sigma": ps.phi_sigma, "phi_delta": ps.phi_delta,
                    "global_phase": ps.global_phase,
                    "W": witness_w(ps),
                    "W3": witness_wg(W3_THETA, ps),
                    "W4": witness_wg(W4_THETA, ps),
                    "method": method,
                })
            except BohmgravError as err:
                failures += 1
                row.update({k: None for k in ("phi_plus", "phi_minus", "phi_sigma",
                                              "phi_delta", "global_phase", "W",
                                              "W3", "W4")})
                row["method"] = ""
                row["error"] = str(err).replace(",", ";").replace("\n", " ")
            rows.append(row)
    return rows, failures


def write_rows(rows, fmt: str, stream):
    if fmt == "csv":
        stream.write(",".join(SWEEP_COLUMNS) + "\n")
        for row in rows:
            stream.write(",".join(_fmt(row.get(c)) for c in SWEEP_COLUMNS) + "\n")
    else:
        stream.write(json.dumps(rows, sort_keys=True, indent=2) + "\n")


def run_sweep(config: RunConfig, stream=None) -> int:
    rows, failures = sweep_rows(config)
    if config.output:
        with open(config.output, "w", newline="") as fh:
            write_rows(rows, config.format, fh)
    if stream is not None or not config.output:
        write_rows(rows, config.format, stream or sys.stdout)
    return 2 if failures else 0


def gamma_tuning(target_phi_delta: float, config: RunConfig) -> float:
    """Coupling that realizes the requested phase difference phi_delta.

    All built-in gamma models make every phase strictly linear in the
    coupling, so a single unit-coupling evaluation fixes the scale.
    """
    geom = PacketGeometry(config.geometry["delta_x_big"], config.geometry["delta_x_small"])
    if geom.delta_x_small == 0.0:
        raise UntunableError("phi_delta vanishes identically at delta_x_small = 0")
    gamma = _gamma_model(config.gamma_model)
    R = sorted(resolve_r_spec(config.r))[0]
    ps, _ = phases_auto(R, geom, CouplingConfig(1.0), gamma)
    if ps.phi_delta == 0.0:
        raise UntunableError("phi_delta vanished at unit coupling")
    if target_phi_delta == 0.0:
        return 0.0
    scale = target_phi_delta / ps.phi_delta
    if scale < 0.0:
        raise UntunableError(
            "target has the wrong sign for a nonnegative coupling; shift the "
            "target by a multiple of 2*pi")
    check, _ = phases_auto(R, geom, CouplingConfig(scale), gamma)
    if abs(check.phi_delta - target_phi_delta) > 1e-8 * max(1.0, abs(target_phi_delta)):
        raise UntunableError("round-trip verification of the tuned coupling failed")
    return scale


# ---------------------------------------------------------------------------
# dynamics runs
# ---------------------------------------------------------------------------

def _build_initial(dyn: dict):
    g = dyn["grid"]
    grid = Grid1D(g["x_min"], g["x_max"], int(g["n"]))
    m1, m2 = dyn.get("masses", [1.0, 1.0])
    init = dyn["initial"]
    kind = init.get("kind", "product")
    if kind == "product":
        c1, c2 = init["centers"]
        sig = init.get("sigma", 1.0)
        sigs = init.get("sigmas", [sig, sig])
        k1, k2 = init.get("momenta", [0.0, 0.0])
        wave = product_wave(grid, gaussian_packet(grid, c1, sigs[0], k1),
                            gaussian_packet(grid, c2, sigs[1], k2), m1, m2)
        return grid, wave, None
    if kind == "four_branch":
        geo = init["geometry"]
        geom = PacketGeometry(geo["delta_x_big"], geo["delta_x_small"])
        sig = init.get("sigma", 1.0)
        centers1 = [geom.u1(+1), geom.u1(-1)]
        centers2 = [geom.u2(+1), geom.u2(-1)]
        branches = branch_product_waves(grid, centers1, centers2, sig, m1, m2)
        return grid, assemble_wave(branches), branches
    if kind == "branches":
        sig = init.get("sigma", 1.0)
        branches = branch_product_waves(grid, init["centers1"], init["centers2"],
                                        sig, m1, m2)
        return grid, assemble_wave(branches), branches
    if kind == "two_packet_product":
        sig = init.get("sigma", 1.0)
        f1 = packet_sum(grid, init["centers1"], sig)
        f2 = packet_sum(grid, init["centers2"], sig)
        return grid, product_wave(grid, f1, f2, m1, m2), None
    raise ConfigError(f"unknown initial kind {kind!r}")


def _build_potential(dyn: dict) -> PotentialModel:
    p = dyn["potential"]
    return PotentialModel(p["variant"], p["coupling"], p.get("softening", 0.1),
                          p.get("r_window"), p.get("gamma", "zero"))


def run_evolve(config: RunConfig) -> int:
    dyn = config.dynamics
    grid, wave, branches = _build_initial(dyn)
    pot = _build_potential(dyn)
    dt = float(dyn["dt"])
    steps = int(dyn["steps"])
    every = int(dyn.get("record_every", max(1, steps // 200)))
    branched = bool(dyn.get("branched", branches is not None))
    out_prefix = config.output or "evolve_run"

    entropy_series = []
    x1_series = []
    force1_series = []
    norm0 = wave.norm()
    bdry = [0.0]

    if branched and branches is not None:
        def observer(step, t, brs):
            if (step + 1) % every:
                return
            asm = assemble_wave(brs)
            entropy_series.append([t, entanglement_entropy(asm)])
            bdry[0] = max(bdry[0], boundary_density(asm))
        branches = evolve_branched(branches, pot, dt, steps, observer=observer)
        final = assemble_wave(branches)
        traj_hist = {f"branch_{i}": b.traj.history for i, b in enumerate(branches)}
        traj0 = branches[0].traj
        norm_drift = abs(final.norm() - 1.0)
        ehrenfest = None
    else:
        tr = dyn.get("trajectory")
        traj0 = TrajectoryPair(*(tr if tr else
                                 (float(np.sum(wave.grid.x * wave.marginals()[0]) * grid.dx),
                                  float(np.sum(wave.grid.x * wave.marginals()[1]) * grid.dx))))

        def observer(step, t, w, trj):
            if (step + 1) % every:
                return
            entropy_series.append([t, entanglement_entropy(w)])
            bdry[0] = max(bdry[0], boundary_density(w))
            rho = np.abs(w.psi) ** 2
            x1_series.append([t, float(np.sum(grid.x[:, None] * rho) * grid.dx ** 2)])
            V = potential_field(pot, w, trj.q1, trj.q2)
            dV1 = np.gradient(V, grid.dx, axis=0)
            force1_series.append(-float(np.sum(dV1 * rho) * grid.dx ** 2) / w.m1)
        final, traj0 = evolve(wave, traj0, pot, dt, steps, observer=observer)
        traj_hist = {"single": traj0.history}
        norm_drift = abs(final.norm() - norm0)
        ehrenfest = None
        if len(x1_series) >= 3:
            ts = np.array([p[0] for p in x1_series])
            xs = np.array([p[1] for p in x1_series])
            h = ts[1] - ts[0]
            acc = (xs[2:] - 2 * xs[1:-1] + xs[:-2]) / h ** 2
            ehrenfest = float(np.max(np.abs(acc - np.array(force1_series[1:-1]))))

    ckpt_path = f"{out_prefix}.checkpoint.npz"
    save_checkpoint(ckpt_path, final, traj0, config.to_dict())
    summary = {
        "norm_drift": norm_drift,
        "max_boundary_density": bdry[0],
        "entropy_series": entropy_series,
        "ehrenfest_residual_max": ehrenfest,
        "trajectory_history": traj_hist,
        "checkpoint": ckpt_path,
    }
    with open(f"{out_prefix}.summary.json", "w", newline="") as fh:
        fh.write(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    print(f"wrote {ckpt_path} and {out_prefix}.summary.json")
    return 0


def run_validate_appendix(config: RunConfig, preset: str = None) -> int:
    presets = ([preset] if preset and preset != "all" else
               list(APPENDIX_PRESETS) if preset == "all" else [None])
    reports = []
    for name in presets:
        dyn = APPENDIX_PRESETS[name] if name else config.dynamics
        grid, wave, branches = _build_initial(dyn)
        pot = _build_potential(dyn)
        T = float(dyn["T"])
        steps = int(dyn["steps"])
        k_sigma = float(dyn.get("k_sigma", 5.0))
        if branches is not None:
            reps = bound_check_branched(pot, branches, T, k_sigma, steps,
                                        label=name or "custom")
            reports.extend(reps)
        else:
            reports.append(bound_check(pot, wave, T, k_sigma, steps,
                                       label=name or "custom"))
    payload = {
        "holds": all(r.holds() for r in reports),
        "min_margin": min(r.margin() for r in reports),
        "reports": [r.to_dict() for r in reports],
    }
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    if config.output:
        with open(config.output, "w", newline="") as fh:
            fh.write(text)
        print(f"wrote {config.output} (holds={payload['holds']})")
    else:
        sys.stdout.write(text)
    return 0 if payload["holds"] else 2


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _add_phase_flags(p):
    p.add_argument("--r", type=str, default="1.0",
                   help="window radius; scalar or comma list")
    p.add_argument("--delta-x", type=float, required=True)
    p.add_argument("--delta-x-small", type=float, required=True)
    p.add_argument("--gamma-big", type=str, default="1.0",
                   help="coupling length(s), comma separated")
    p.add_argument("--gamma-model", default="zero",
                   choices=["zero", "point_newtonian", "smoothed_newtonian"])
    p.add_argument("--output", default=None)
    p.add_argument("--format", default="csv", choices=["csv", "json"])


def _parse_list(text: str):
    return [float(v) for v in text.split(",") if v.strip()]


def _config_from_flags(args, mode: str) -> RunConfig:
    return RunConfig.from_dict({
        "version": SCHEMA_VERSION,
        "mode": mode,
        "geometry": {"delta_x_big": args.delta_x, "delta_x_small": args.delta_x_small},
        "gamma_big": _parse_list(args.gamma_big),
        "r": _parse_list(args.r) if "," in args.r else float(args.r),
        "gamma_model": args.gamma_model,
        "output": args.output,
        "format": args.format,
    })


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bohmgrav",
                                     description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="verb", required=True)

    p_ph = sub.add_parser("phases", help="phase set at given parameters")
    _add_phase_flags(p_ph)

    p_wit = sub.add_parser("witness", help="phases plus witness values")
    _add_phase_flags(p_wit)

    p_sw = sub.add_parser("sweep", help="grid sweep over (R, Gamma)")
    p_sw.add_argument("--config", default=None, help="JSON config path")
    _add_phase_flags(p_sw)
    # flags are fallbacks; a config file wins
    for a in p_sw._actions:
        if a.dest in ("delta_x", "delta_x_small"):
            a.required = False

    p_fig = sub.add_parser("figure", help="run a named figure preset")
    p_fig.add_argument("preset", choices=sorted(PRESETS))
    p_fig.add_argument("--output", default=None)
    p_fig.add_argument("--format", default="csv", choices=["csv", "json"])

    p_ev = sub.add_parser("evolve", help="dynamics run from a JSON config")
    p_ev.add_argument("--config", required=True)
    p_ev.add_argument("--output", default=None, help="output prefix")

    p_va = sub.add_parser("validate-appendix",
                          help="free-phase approximation bound check")
    p_va.add_argument("--preset", default=None,
                      choices=sorted(APPENDIX_PRESETS) + ["all"])
    p_va.add_argument("--config", default=None)
    p_va.add_argument("--output", default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.verb in ("phases", "witness"):
            config = _config_from_flags(args, args.verb)
            return run_sweep(config)
        if args.verb == "sweep":
            if args.config:
                with open(args.config) as fh:
                    data = json.load(fh)
                data.setdefault("mode", "sweep")
                config = RunConfig.from_dict(data)
                if args.output:
                    config.output = args.output
            else:
                if args.delta_x is None or args.delta_x_small is None:
                    raise ConfigError(["sweep needs --config or --delta-x/--delta-x-small"])
                config = _config_from_flags(args, "sweep")
            return run_sweep(config)
        if args.verb == "figure":
            preset = dict(PRESETS[args.preset])
            preset.update({"mode": "sweep", "output": args.output,
                           "format": args.format})
            return run_sweep(RunConfig.from_dict(preset))
        if args.verb == "evolve":
            with open(args.config) as fh:
                data = json.load(fh)
            data.setdefault("mode", "evolve")
            config = RunConfig.from_dict(data)
            if args.output:
                config.output = args.output
            return run_evolve(config)
        if args.verb == "validate-appendix":
            if args.config:
                with open(args.config) as fh:
                    data = json.load(fh)
                data.setdefault("mode", "validate-appendix")
                config = RunConfig.from_dict(data)
            else:
                if not args.preset:
                    raise ConfigError(["validate-appendix needs --preset or --config"])
                config = RunConfig(mode="validate-appendix")
            if args.output:
                config.output = args.output
            return run_validate_appendix(config, preset=args.preset)
    except ConfigError as err:
        for line in err.violations:
            print(f"config error: {line}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
