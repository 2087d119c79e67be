"""Command-line front end.

Subcommands: steady, dynamics, sweep, decompose (on a saved density file),
validate. Every run writes plot-ready CSV series / JSON reports plus rendered
PNG figures (disable with --no-plots) into the output directory, each file
carrying the resolved configuration and seed list in its header.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import io, plotting
from .analysis import (
    build_grid,
    chi_profile,
    correlation_chi,
    mandel_q,
    negativity,
    photon_distribution,
    position_density,
    reduce_atom,
    reduce_field,
)
from .config import RunConfig, load_config, override
from .decompose import cavity_fit_matrix, decompose_density, fit_coherent_amplitude
from .exceptions import BasisMismatchError, CavityModesError, DegenerateFieldError
from .model import build_basis, build_h_eff, build_h_nh, op_field
from .trajectory import (
    batched_mean_stderr,
    ensemble_density,
    run_trajectories,
    steady_state_density,
)
from .validate import run_validation


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _lattice_potential(cfg: RunConfig, grid):
    return cfg.params.u0 * np.sin(grid.kx) ** 2


def _parity_summary(records, t_rel: float) -> dict:
    window = [rec.a_expect[rec.times > t_rel] for rec in records]
    series = np.concatenate([w for w in window if w.size])
    a_mean, a_se = batched_mean_stderr(series, n_batches=16)
    n_mean = float(
        np.concatenate([rec.n_expect[rec.times > t_rel] for rec in records]).mean()
    )
    return {
        "a_mean": [float(a_mean.real), float(a_mean.imag)],
        "a_abs": float(abs(a_mean)),
        "a_batch_stderr": float(a_se),
        # absolute floor: trajectories confined to one parity sector give
        # <a> = 0 exactly, with zero batch scatter
        "parity_consistent_with_zero": bool(abs(a_mean) <= 3.0 * a_se + 1e-12),
        "n_mean": n_mean,
    }


def _diagnostics_summary(records) -> dict:
    return {
        "max_norm_dev": max(r.diagnostics["max_norm_dev"] for r in records),
        "max_edge_pop": max(r.diagnostics["max_edge_pop"] for r in records),
        "max_nmax_pop": max(r.diagnostics["max_nmax_pop"] for r in records),
        "n_jumps": int(sum(r.diagnostics["n_jumps"] for r in records)),
    }


def steady_pipeline(cfg: RunConfig, out: Path) -> dict:
    """Run the stationary-state pipeline and write all its artifacts."""
    resolved = cfg.resolved()
    schedule = cfg.steady_schedule()
    seeds = schedule.seed_list
    records = run_trajectories(cfg.params, schedule, workers=cfg.workers)
    rho_ss = steady_state_density(records)
    basis = build_basis(cfg.params)
    grid = build_grid(cfg.n_x, cfg.params.k_max)
    rho_at = reduce_atom(rho_ss)
    rho_cav = reduce_field(rho_ss)

    density = position_density(rho_at, grid)
    io.write_csv(out / "position_density.csv", [("kx", grid.kx), ("density", density)],
                 resolved, seeds)
    chi = chi_profile(rho_at, grid)
    io.write_csv(out / "chi.csv", [("kx", grid.kx), ("chi", chi)], resolved, seeds)
    chi_pi = correlation_chi(rho_at, np.pi, grid)
    chi_2pi = correlation_chi(rho_at, 2.0 * np.pi, grid)

    p_sim = photon_distribution(rho_cav)
    n_axis = np.arange(basis.dim_n)
    report: dict = {
        "parity": _parity_summary(records, schedule.t_rel),
        "diagnostics": _diagnostics_summary(records),
        "chi": {"chi_pi": float(chi_pi), "chi_2pi": float(chi_2pi),
                "ratio": float(chi_pi / chi_2pi)},
        "n_samples_steady": int(sum(r.ss_count for r in records)),
    }
    try:
        dec = decompose_density(rho_ss)
        p_fit = np.diag(cavity_fit_matrix(dec.alpha, dec.epsilon, basis.n_max)).real
        report["degenerate_field"] = False
        report["decomposition"] = _decomposition_dict(dec)
        odd = position_density(dec.rho_odd, grid)
        even = position_density(dec.rho_even, grid)
        res = position_density(dec.rho_residual, grid)
        io.write_csv(
            out / "mode_densities.csv",
            [("kx", grid.kx), ("rho_odd", odd), ("rho_even", even), ("rho_residual", res)],
            resolved, seeds,
        )
        io.write_json(out / "decomposition.json", _decomposition_dict(dec), resolved, seeds)
        if cfg.plots:
            plotting.save_mode_densities(out / "mode_densities.png", grid.kx, odd, even, res,
                                         potential=_lattice_potential(cfg, grid))
    except DegenerateFieldError as exc:
        p_fit = np.full(basis.dim_n, np.nan)
        report["degenerate_field"] = True
        report["degenerate_reason"] = str(exc)

    io.write_csv(out / "photon_distribution.csv",
                 [("n", n_axis), ("p_sim", p_sim), ("p_fit", p_fit)], resolved, seeds)
    io.write_json(out / "report.json", report, resolved, seeds)
    if cfg.save_rho:
        io.write_density_json(out / "rho_ss.json", rho_ss, resolved, seeds)
    if cfg.event_log:
        for rec in records:
            io.write_event_log(out / f"events_seed{rec.seed}.csv", rec, resolved)
    if cfg.plots:
        plotting.save_position_density(out / "position_density.png", grid.kx, density,
                                       potential=_lattice_potential(cfg, grid))
        plotting.save_chi(out / "chi.png", grid.kx, chi)
        plotting.save_photon_distribution(out / "photon_distribution.png", n_axis, p_sim,
                                          None if report["degenerate_field"] else p_fit)
    return report


def _decomposition_dict(dec) -> dict:
    return {
        "alpha": [float(dec.alpha.real), float(dec.alpha.imag)],
        "epsilon": float(dec.epsilon),
        "fit_error": float(dec.fit_error),
        "fit_error_pn": float(dec.fit_error_pn),
        "weights": [float(w) for w in dec.weights],
        "hermiticity_defect": float(dec.hermiticity_defect),
        "weight_mismatch": float(dec.weight_mismatch),
        "diagnostics": list(dec.diagnostics),
    }


def cmd_steady(cfg: RunConfig, args) -> int:
    steady_pipeline(cfg, _out_dir(cfg))
    return 0


def cmd_dynamics(cfg: RunConfig, args) -> int:
    out = _out_dir(cfg)
    resolved = cfg.resolved()
    schedule = cfg.dynamics_schedule()
    seeds = schedule.seed_list
    records = run_trajectories(cfg.params, schedule, workers=cfg.workers)
    basis = build_basis(cfg.params)
    grid = build_grid(cfg.n_x, cfg.params.k_max)
    times = records[0].times
    for frame in cfg.frames:
        if not np.isclose(times, frame, rtol=0, atol=1e-9).any():
            raise CavityModesError(
                f"frame {frame} is not on the dynamics sample grid "
                f"(every {cfg.dynamics_sample_every})"
            )

    n_series = np.mean([rec.n_expect for rec in records], axis=0)
    neg, q_series, eps_series, res_series = [], [], [], []
    frame_reports = {}
    for t in times:
        rho_t = ensemble_density(records, t)
        neg.append(negativity(rho_t))
        rho_cav = reduce_field(rho_t)
        try:
            q_series.append(mandel_q(rho_cav))
        except DegenerateFieldError:
            q_series.append(np.nan)
        try:
            fit = fit_coherent_amplitude(rho_cav)
            eps_series.append(fit.epsilon)
        except DegenerateFieldError:
            eps_series.append(0.0)
        res_series.append(1.0 - 2.0 * eps_series[-1])
        if np.isclose(cfg.frames, t, rtol=0, atol=1e-9).any():
            frame_reports[f"{t:g}"] = _frame_outputs(cfg, out, resolved, seeds, grid, t, rho_t)

    neg = np.asarray(neg)
    io.write_csv(out / "negativity.csv", [("kappa_t", times), ("negativity", neg)],
                 resolved, seeds)
    io.write_csv(out / "mandel_q.csv", [("kappa_t", times), ("mandel_q", np.asarray(q_series))],
                 resolved, seeds)
    io.write_csv(out / "photon_number.csv", [("kappa_t", times), ("n_expect", n_series)],
                 resolved, seeds)
    io.write_csv(
        out / "mode_weights.csv",
        [("kappa_t", times), ("epsilon", np.asarray(eps_series)),
         ("residual_weight", np.asarray(res_series))],
        resolved, seeds,
    )
    peak = int(np.argmax(neg))
    report = {
        "negativity_peak": {"kappa_t": float(times[peak]), "value": float(neg[peak])},
        "negativity_final": float(neg[-1]),
        "frames": frame_reports,
        "diagnostics": _diagnostics_summary(records),
    }
    io.write_json(out / "report.json", report, resolved, seeds)
    if cfg.event_log:
        for rec in records:
            io.write_event_log(out / f"events_seed{rec.seed}.csv", rec, resolved)
    if cfg.plots:
        plotting.save_series(out / "negativity.png", times, neg, r"$\kappa t$", "negativity")
        plotting.save_series(out / "mandel_q.png", times, q_series, r"$\kappa t$", "Mandel Q")
        plotting.save_series(out / "photon_number.png", times, n_series, r"$\kappa t$",
                             r"$\langle n \rangle$")
        plotting.save_weight_series(out / "mode_weights.png", times, eps_series, res_series)
    return 0


def _frame_outputs(cfg, out, resolved, seeds, grid, t, rho_t) -> dict:
    label = f"{t:g}"
    try:
        dec = decompose_density(rho_t)
    except DegenerateFieldError as exc:
        return {"degenerate_field": True, "reason": str(exc)}
    odd = position_density(dec.rho_odd, grid)
    even = position_density(dec.rho_even, grid)
    res = position_density(dec.rho_residual, grid)
    io.write_csv(
        out / f"mode_densities_t{label}.csv",
        [("kx", grid.kx), ("rho_odd", odd), ("rho_even", even), ("rho_residual", res)],
        resolved, seeds,
    )
    if cfg.plots:
        plotting.save_mode_densities(out / f"mode_densities_t{label}.png", grid.kx, odd,
                                     even, res, potential=_lattice_potential(cfg, grid))
    return _decomposition_dict(dec)


def cmd_sweep(cfg: RunConfig, args) -> int:
    out = _out_dir(cfg)
    resolved = cfg.resolved()
    rows = []
    for ut in cfg.sweep_ut:
        sub = override(cfg, ut=float(ut), out_dir=str(out / f"ut_{ut:g}"))
        report = steady_pipeline(sub, _out_dir(sub))
        dec = report.get("decomposition")
        rows.append({
            "ut": float(ut),
            "epsilon": dec["epsilon"] if dec else 0.0,
            "residual_weight": 1.0 - 2.0 * dec["epsilon"] if dec else 1.0,
            "fit_error": dec["fit_error"] if dec else np.nan,
            "n_mean": report["parity"]["n_mean"],
            "chi_ratio": report["chi"]["ratio"],
        })
    io.write_csv(
        out / "sweep.csv",
        [(name, np.asarray([row[name] for row in rows]))
         for name in ("ut", "epsilon", "residual_weight", "fit_error", "n_mean", "chi_ratio")],
        resolved,
    )
    if cfg.plots:
        plotting.save_sweep(out / "weights_vs_ut.png",
                            np.asarray([r["ut"] for r in rows]),
                            np.asarray([r["epsilon"] for r in rows]),
                            np.asarray([r["residual_weight"] for r in rows]))
    return 0


def cmd_decompose(cfg: RunConfig, args) -> int:
    out = _out_dir(cfg)
    resolved = cfg.resolved()
    rho = io.read_density_json(args.rho)
    if rho.kind != "full":
        raise BasisMismatchError("decompose needs a full-basis density matrix file")
    dec = decompose_density(rho)
    grid = build_grid(cfg.n_x, rho.basis.k_max)
    odd = position_density(dec.rho_odd, grid)
    even = position_density(dec.rho_even, grid)
    res = position_density(dec.rho_residual, grid)
    io.write_json(out / "decomposition.json", _decomposition_dict(dec), resolved)
    io.write_csv(
        out / "mode_densities.csv",
        [("kx", grid.kx), ("rho_odd", odd), ("rho_even", even), ("rho_residual", res)],
        resolved,
    )
    if cfg.plots:
        plotting.save_mode_densities(out / "mode_densities.png", grid.kx, odd, even, res)
    return 0


def cmd_validate(cfg: RunConfig, args) -> int:
    out = _out_dir(cfg)
    resolved = cfg.resolved()
    results = run_validation(cfg)
    all_passed = all(r.passed for r in results)
    io.write_json(
        out / "validation.json",
        {"checks": [r.to_dict() for r in results], "all_passed": all_passed},
        resolved,
    )
    if getattr(args, "dump_operators", False):
        basis = build_basis(cfg.params)
        io.write_operator_csv(out / "h_eff.csv", build_h_eff(cfg.params, basis), resolved)
        io.write_operator_csv(out / "h_nh.csv", build_h_nh(cfg.params, basis), resolved)
        io.write_operator_csv(out / "annihilate.csv", op_field(basis, "annihilate"), resolved)
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status} {r.name}: value={r.value:.3e} threshold={r.threshold:.3e} {r.detail}")
    return 0 if all_passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cavitymodes",
        description="Stochastic wave-function simulator for a pumped atom in a lossy cavity",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "steady": ("stationary state: density, coherence, photon statistics, modes", cmd_steady),
        "dynamics": ("trajectory ensemble: negativity, Mandel Q, mode weights vs time", cmd_dynamics),
        "sweep": ("steady-state pipeline across pump strengths", cmd_sweep),
        "decompose": ("decompose a saved density-matrix JSON file", cmd_decompose),
        "validate": ("run the invariant and oracle-agreement suite", cmd_validate),
    }
    for name, (help_text, handler) in commands.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="TOML configuration file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override one configuration value (repeatable)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--workers", type=int, help="parallel trajectory workers")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--no-plots", action="store_true", help="skip PNG rendering")
        p.add_argument("--event-log", action="store_true",
                       help="write per-trajectory event logs")
        p.set_defaults(handler=handler)
        if name == "decompose":
            p.add_argument("rho", help="density-matrix JSON file to decompose")
        if name == "validate":
            p.add_argument("--dump-operators", action="store_true",
                           help="also dump sparse operators as (row, col, re, im) CSV")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out_hint = Path(args.out) if args.out else None
    try:
        cfg = load_config(args.config, args.set)
        if args.out is not None:
            cfg = override(cfg, out_dir=args.out)
        if args.workers is not None:
            cfg = override(cfg, workers=args.workers)
        if args.seed is not None:
            cfg = override(cfg, master_seed=args.seed)
        if args.no_plots:
            cfg = override(cfg, plots=False)
        if args.event_log:
            cfg = override(cfg, event_log=True)
        out_hint = Path(cfg.out_dir)
        return args.handler(cfg, args)
    except Exception as exc:  # noqa: BLE001 - single reporting funnel
        record = {
            "error": type(exc).__name__,
            "message": str(exc),
            "command": args.command,
        }
        for attr in ("kappa_t", "p_c", "population"):
            if getattr(exc, attr, None) is not None:
                record[attr] = float(getattr(exc, attr))
        target = out_hint or Path(getattr(args, "out", None) or "out")
        try:
            target.mkdir(parents=True, exist_ok=True)
            (target / "error.json").write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")
        except OSError:
            pass
        print(f"error: {record['error']}: {record['message']}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
