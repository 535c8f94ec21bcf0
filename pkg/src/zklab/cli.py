"""Command-line entry points: reproducible experiments per module.

Verbs: ground-state, theta, certify, profiles, simulate, diagnose.
Every report is JSON embedding the full config and its content hash, so a
rerun with the same config and seed reproduces the payload bit-for-bit.

Exit codes: 0 success, 2 config error, 3 numerical failure, 4 missing
dependency artifact.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .config import ConfigError, RunConfig, load_config
from .evolution import EvolutionError, evolve, soliton_positions
from .grid import PlanarGrid, inner_product, norm_l2, norm_h1, save_field
from .ground_state import (GroundStateError, RadialProfile,
                           check_gagliardo_nirenberg, energy, ode_residual,
                           sample_to_plane, solve_ground_state)
from .modulation import (DecompositionError, build_rho_basis, emit_plot_script,
                         trace)
from .operators import (CoercivityViolation, certify_A_coercivity,
                        certify_L_coercivity, refined_assembly)
from .profiles import (BoxTooSmallError, build_Qb, compute_F, compute_P,
                       compute_Psi_b, compute_theta, fit_power_law)
from .solvers import SolverError
from .weights import WeightFamily


class DependencyError(RuntimeError):
    pass


def _out_dir(cfg: RunConfig, verb: str) -> str:
    path = os.path.join(cfg.out_dir, verb)
    os.makedirs(path, exist_ok=True)
    return path


def _write_report(cfg: RunConfig, verb: str, payload: dict) -> str:
    report = {
        "command": verb,
        "config": json.loads(cfg.to_json()),
        "config_hash": cfg.content_hash(),
        "results": payload,
    }
    path = os.path.join(_out_dir(cfg, verb), "report.json")
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _load_profile(cfg: RunConfig) -> RadialProfile:
    path = os.path.join(cfg.out_dir, "ground-state", "profile.csv")
    if not os.path.exists(path):
        raise DependencyError(
            f"missing ground-state artifact {path}; run 'zklab ground-state' first")
    with open(path) as fh:
        return RadialProfile.from_csv(fh.read())


def cmd_ground_state(cfg: RunConfig) -> dict:
    prof = solve_ground_state()
    grid = PlanarGrid(cfg.box_lengths, cfg.points)
    Q = sample_to_plane(prof, grid)
    gn = check_gagliardo_nirenberg(Q, Q)
    quartic = float(np.sum(Q.values ** 4) * grid.cell_area)
    payload = {
        "q0": prof.q0,
        "tail_coeff": prof.tail_coeff,
        "mass": prof.mass(),
        "ode_residual": ode_residual(prof),
        "energy": energy(Q),
        "gn_defect_relative": gn / quartic,
    }
    out = _out_dir(cfg, "ground-state")
    with open(os.path.join(out, "profile.csv"), "w") as fh:
        fh.write(prof.to_csv())
    return payload

def cmd_theta(cfg: RunConfig) -> dict:
    prof = _load_profile(cfg)
    grid = PlanarGrid(cfg.box_lengths, cfg.points)
    asm = refined_assembly(prof, grid)
    tp = compute_F(asm)
    theta = compute_theta(tp)
    return {"theta": theta,
            "F_mass": tp.spectral_mass(),
            "grid": {"box": list(cfg.box_lengths), "points": list(cfg.points)}}


def cmd_certify(cfg: RunConfig) -> dict:
    prof = _load_profile(cfg)
    rep_L = certify_L_coercivity(prof, box=cfg.coercivity_box,
                                 resolutions=cfg.coercivity_resolutions,
                                 seed=cfg.seed)
    rep_A = certify_A_coercivity(prof, box=cfg.coercivity_box,
                                 resolutions=cfg.coercivity_resolutions,
                                 seed=cfg.seed)
    return {"mu1": rep_L, "mu2": rep_A}


def cmd_profiles(cfg: RunConfig, jobs: int = 1) -> dict:
    prof = _load_profile(cfg)
    grid = PlanarGrid(cfg.sweep_box_lengths, cfg.sweep_points)
    asm = refined_assembly(prof, grid)
    tp = compute_F(asm)
    np_prof = compute_P(asm, tol=cfg.solver_tol)
    P = np_prof.P
    PQ = inner_product(P, asm.Q)
    h2 = grid.spacing[1]
    quarter_F2 = 0.25 * float(np.sum(tp.F ** 2) * h2)
    identity_rel = abs(PQ - quarter_F2) / abs(PQ)

    EQ = energy(asm.Q)
    massQ = inner_product(asm.Q, asm.Q)
    weighted_F2 = tp.weighted_spectral_mass()

    def one_b(b: float) -> dict:
        lp = build_Qb(asm, P, b)
        psi = compute_Psi_b(lp)
        psiQ = inner_product(psi, asm.Q)
        mass_rem = inner_product(lp.Qb, lp.Qb) - massQ - 2.0 * b * PQ
        energy_rem = energy(lp.Qb) - EQ + b * PQ
        return {"b": b, "psiQ_defect": psiQ + 0.5 * b ** 2 * weighted_F2,
                "mass_defect": mass_rem, "energy_defect": energy_rem}

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as ex:
        sweep = list(ex.map(one_b, cfg.b_sweep))
    bs = [row["b"] for row in sweep]
    fits = {}
    for key in ("psiQ_defect", "mass_defect", "energy_defect"):
        p, c = fit_power_law(bs, [row[key] for row in sweep])
        fits[key] = {"exponent": p, "constant": c}
    return {"PQ": PQ, "quarter_int_F2": quarter_F2,
            "identity_relative_error": identity_rel,
            "P_residual": np_prof.residual, "sweep": sweep, "fits": fits}


def cmd_simulate(cfg: RunConfig) -> dict:
    prof = _load_profile(cfg)
    grid = PlanarGrid(cfg.sim_box_lengths, cfg.sim_points)
    asm = refined_assembly(prof, grid)
    np_prof = compute_P(asm, tol=cfg.solver_tol)
    P = np_prof.P
    if cfg.initial_condition == "qb":
        phi0 = build_Qb(asm, P, cfg.b0).Qb
    else:
        phi0 = asm.Q
    traj = evolve(phi0, cfg.t_end, cfg.dt, stride=cfg.snapshot_stride)
    out = _out_dir(cfg, "simulate")
    with open(os.path.join(out, "invariants.csv"), "w") as fh:
        fh.write(traj.invariants_csv())
    with open(os.path.join(out, "manifest.json"), "w") as fh:
        fh.write(traj.manifest())
    save_field(os.path.join(out, "final_state.zkf"), traj.snapshots[-1])

    tp = compute_F(asm)
    theta = compute_theta(tp)
    basis = build_rho_basis(asm, P, theta)
    wf = WeightFamily(B=cfg.B, A=cfg.A, y1=grid.x1)
    tr = trace(traj, asm, P, wf, basis)
    with open(os.path.join(out, "trace.csv"), "w") as fh:
        fh.write(tr.to_csv())
    return {
        "theta": theta,
        "mass_drift": traj.mass_drift(),
        "energy_drift": traj.energy_drift(),
        "halted": traj.halted,
        "snapshots": len(traj.snapshots),
        "decomposition_notes": tr.notes,
        "b_range": [float(tr.b.min()), float(tr.b.max())],
        "lambda_range": [float(tr.lam.min()), float(tr.lam.max())],
        "max_lam_rate_defect": float(np.max(np.abs(tr.series["lam_rate_defect"]))),
        "max_b_rate_defect": float(np.max(np.abs(tr.series["b_rate_defect"]))),
    }


def cmd_diagnose(cfg: RunConfig) -> dict:
    trace_path = os.path.join(cfg.out_dir, "simulate", "trace.csv")
    if not os.path.exists(trace_path):
        raise DependencyError(
            f"missing trace artifact {trace_path}; run 'zklab simulate' first")
    with open(trace_path) as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    cols = {name: np.array([float(r[k]) for r in rows])
            for k, name in enumerate(header)}
    out = _out_dir(cfg, "diagnose")
    for key in ("b_over_lam_theta", "b_over_lam2"):
        with open(os.path.join(out, f"{key}.csv"), "w") as fh:
            fh.write(f"t,{key}\n")
            for t, v in zip(cols["t"], cols[key]):
                fh.write(f"{float(t)!r},{float(v)!r}\n")
    script_path = os.path.join(out, "plot_trace.py")
    with open(script_path, "w") as fh:
        fh.write(emit_plot_script(trace_path))
    return {"trace_rows": len(rows),
            "b_over_lam_theta_range": [float(cols["b_over_lam_theta"].min()),
                                       float(cols["b_over_lam_theta"].max())],
            "b_over_lam2_range": [float(cols["b_over_lam2"].min()),
                                  float(cols["b_over_lam2"].max())],
            "plot_script": script_path}


_COMMANDS = {
    "ground-state": cmd_ground_state,
    "theta": cmd_theta,
    "certify": cmd_certify,
    "profiles": cmd_profiles,
    "simulate": cmd_simulate,
    "diagnose": cmd_diagnose,
}

_NUMERICAL_ERRORS = (SolverError, EvolutionError, DecompositionError,
                     CoercivityViolation, GroundStateError, BoxTooSmallError)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="zklab",
        description="numerical laboratory for critical ZK soliton dynamics")
    parser.add_argument("verb", choices=sorted(_COMMANDS))
    parser.add_argument("--config", help="path to a RunConfig JSON file")
    parser.add_argument("--out", help="output directory (overrides config)")
    parser.add_argument("--jobs", type=int, default=1, help="parallel sweep workers")
    parser.add_argument("--seed", type=int, help="seed (overrides config)")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        if args.out is not None:
            cfg.out_dir = args.out
        if args.seed is not None:
            cfg.seed = args.seed
        cfg.validate()
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        if args.verb == "profiles":
            payload = cmd_profiles(cfg, jobs=args.jobs)
        else:
            payload = _COMMANDS[args.verb](cfg)
        path = _write_report(cfg, args.verb, payload)
    except DependencyError as exc:
        print(f"dependency error: {exc}", file=sys.stderr)
        return 4
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
