"""Command-line front end.

Subcommands expose each pipeline stage:

  materials show [NAME]   print preset / configured material parameters
  reflect                 dump one reflection matrix (and mode spectra)
  energy                  free energy at the configured separations
  force-curve             energy, pressure, and sphere force gradient curve
  compare-pfa             force curve with the PFA baseline and ratio columns

Every run writes a manifest (config echo with all defaults filled, package
version, timings) next to the result CSVs. Result CSVs are deterministic:
identical configs produce byte-identical files for any worker count.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .casimir import (force_and_gradient, free_energy_per_area, pfa_force_gradient)
from .config import JobConfig, load_config
from .errors import CasparError
from .lifshitz import lifshitz_plane_plane
from .materials import preset, preset_names
from .modal import TransverseWavevector
from .smatrix import layer_basis, stack_reflection

_FLOAT_FMT = "%.17g"


def _fmt(x):
    return _FLOAT_FMT % float(x)


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter=",", lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) if isinstance(v, (int, float, np.floating))
                             else str(v) for v in row])
    return path


def _write_manifest(out_dir, cfg: JobConfig, command, timings, outputs,
                    summary=None):
    manifest = {
        "package": "caspar",
        "version": __version__,
        "command": command,
        "config": cfg.echo,
        "timings_s": timings,
        "outputs": [str(p) for p in outputs],
    }
    if summary:
        manifest["summary"] = summary
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")
    return path


def _apply_overrides(cfg: JobConfig, args) -> JobConfig:
    import dataclasses

    from .geometry import TruncationOrder
    from .grids import BZQuadrature

    changes = {}
    if getattr(args, "workers", None) is not None:
        changes["workers"] = args.workers
    if getattr(args, "out", None) is not None:
        changes["out_dir"] = args.out
    if getattr(args, "zero_freq", None) is not None:
        changes["zero_freq"] = args.zero_freq
    if getattr(args, "adaptive_matsubara", False):
        changes["adaptive_matsubara"] = True
    if getattr(args, "dump_spectra", False):
        changes["dump_spectra"] = True
    if getattr(args, "quad_nodes", None) is not None:
        changes["quad"] = BZQuadrature(nodes_per_dim=args.quad_nodes,
                                       cell=cfg.quad.cell)
    if getattr(args, "orders", None) is not None:
        changes["order"] = TruncationOrder(args.orders)
    if not changes:
        return cfg
    echo = dict(cfg.echo)
    num = dict(echo.get("numerics", {}))
    num.update({k: v for k, v in {
        "workers": changes.get("workers"),
        "zero_freq": changes.get("zero_freq"),
        "adaptive_matsubara": changes.get("adaptive_matsubara"),
        "quad_nodes": args.quad_nodes if "quad" in changes else None,
        "orders": args.orders if "order" in changes else None,
    }.items() if v is not None})
    echo["numerics"] = num
    changes["echo"] = echo
    return dataclasses.replace(cfg, **changes)


def _progress(l, l_last):
    print(f"caspar: matsubara index {l}/{l_last}", file=sys.stderr)


def _energy_result(cfg: JobConfig, separations):
    return free_energy_per_area(
        cfg.stack_left, cfg.stack_right, cfg.gap, separations,
        cfg.order, cfg.grid, cfg.quad, workers=cfg.workers,
        zero_freq=cfg.zero_freq, sigma_floor=cfg.sigma_floor,
        adaptive_matsubara=cfg.adaptive_matsubara, progress=_progress)


def _result_summary(result):
    summary = {
        "l_max": int(result.l_max),
        "matsubara_tail_ratio_max": float(result.tail_ratio.max()),
        "zero_freq_mode": result.zero_freq_mode,
    }
    if result.l0_method_delta is not None:
        summary["l0_direct_vs_extrapolated_rel"] = float(result.l0_method_delta)
    return summary


def _diagnostics_rows(result):
    rows = []
    for l in range(result.per_l.shape[0]):
        for ia, a in enumerate(result.separations):
            rows.append((l, a, result.per_l[l, ia]))
    return rows


def cmd_materials(args):
    names = [args.name] if args.name else preset_names()
    for name in names:
        mat = preset(name)
        print(f"{name}: permittivity={mat.permittivity!r} "
              f"mu={mat.permeability.mu_r} sigma_dc={mat.sigma_dc():.6g} rad/s")
    return 0


def cmd_reflect(args):
    cfg = _apply_overrides(load_config(args.config), args)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    xi = cfg.grid.xi(args.l) if args.l is not None else args.xi
    if xi is None or xi <= 0:
        print("reflect: need --l >= 1 or --xi > 0", file=sys.stderr)
        return 2
    stack = cfg.stack_left if args.side == "left" else cfg.stack_right
    kt = TransverseWavevector.build(args.kx, args.ky, stack.cell, cfg.order)
    R = stack_reflection(stack, kt, xi)
    outputs = []
    rows = [(i, j, R[i, j], abs(R[i, j])) for i in range(R.shape[0])
            for j in range(R.shape[1])]
    outputs.append(_write_csv(out_dir / f"reflection_{args.side}.csv",
                              ["row", "col", "R", "absR"], rows))
    if cfg.dump_spectra:
        rows = []
        media = [("incident", stack.incident_halfspace)]
        media += [(f"layer{i}", ly) for i, ly in enumerate(stack.layers)]
        media.append(("exit", stack.exit_halfspace))
        for key, medium in media:
            basis = layer_basis(medium, stack.cell, kt, xi, layer_key=key)
            for nu, g in enumerate(basis.gammas):
                rows.append((key, xi, args.kx, args.ky, nu, g.real, g.imag))
        outputs.append(_write_csv(out_dir / f"spectra_{args.side}.csv",
                                  ["layer", "xi", "kx", "ky", "nu",
                                   "re_gamma", "im_gamma"], rows))
    _write_manifest(out_dir, cfg, "reflect",
                    {"total": time.perf_counter() - t0}, outputs)
    return 0


def _run_energy(cfg: JobConfig):
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    result = _energy_result(cfg, cfg.separations)
    rows = [(a, F, tr) for a, F, tr in
            zip(result.separations, result.values, result.tail_ratio)]
    outputs = [
        _write_csv(out_dir / "energy.csv",
                   ["a_m", "F_J_per_m2", "matsubara_tail_ratio"], rows),
        _write_csv(out_dir / "diagnostics.csv",
                   ["l", "a_m", "F_contribution_J_per_m2"],
                   _diagnostics_rows(result)),
    ]
    _write_manifest(out_dir, cfg, "energy",
                    {"total": time.perf_counter() - t0}, outputs,
                    summary=_result_summary(result))
    return outputs


def cmd_energy(args):
    cfg = _apply_overrides(load_config(args.config), args)
    _run_energy(cfg)
    return 0


def _pfa_pressure_baseline(cfg: JobConfig, separations):
    """Filling factor times the Lifshitz plane-plane pressure baseline."""
    mat_l = cfg.materials[cfg.pfa_material_left]
    mat_r = cfg.materials[cfg.pfa_material_right]

    def evaluate(a_points):
        return np.array([lifshitz_plane_plane(mat_l, mat_r, cfg.gap, a, cfg.grid)
                         for a in a_points])

    curve = force_and_gradient(evaluate, separations, check_step=False)
    return cfg.pfa_filling_factor * curve.pressure


def _run_force_curve(cfg: JobConfig, with_pfa, echo=False):
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()

    last_result = {}

    def evaluate(a_points):
        result = _energy_result(cfg, a_points)
        last_result["result"] = result
        return result.values

    curve = force_and_gradient(evaluate, cfg.separations, check_step=False)
    gradient = pfa_force_gradient(cfg.sphere_radius, curve.pressure,
                                  a=cfg.separations)
    header = ["a_m", "F_J_per_m2", "pressure_N_per_m2", "gradient_N_per_m"]
    cols = [curve.separations, curve.energy, curve.pressure, gradient]
    if with_pfa:
        pfa_pressure = _pfa_pressure_baseline(cfg, cfg.separations)
        pfa_gradient = pfa_force_gradient(cfg.sphere_radius, pfa_pressure,
                                          a=cfg.separations)
        ratio = gradient / pfa_gradient
        header += ["pfa_gradient_N_per_m", "ratio_exact_over_pfa"]
        cols += [pfa_gradient, ratio]
    rows = list(zip(*cols))
    outputs = [_write_csv(out_dir / "force_curve.csv", header, rows)]
    summary = None
    if "result" in last_result:
        outputs.append(_write_csv(out_dir / "diagnostics.csv",
                                  ["l", "a_m", "F_contribution_J_per_m2"],
                                  _diagnostics_rows(last_result["result"])))
        summary = _result_summary(last_result["result"])
    _write_manifest(out_dir, cfg, "force-curve",
                    {"total": time.perf_counter() - t0}, outputs,
                    summary=summary)
    if echo and with_pfa:
        print("# a_m gradient_N_per_m ratio_exact_over_pfa")
        for a, g, r in zip(curve.separations, gradient, ratio):
            print(f"{_fmt(a)} {_fmt(g)} {_fmt(r)}")
    return outputs


def cmd_force_curve(args, with_pfa=None):
    cfg = _apply_overrides(load_config(args.config), args)
    with_pfa = cfg.pfa_baseline if with_pfa is None else with_pfa
    _run_force_curve(cfg, with_pfa, echo=with_pfa)
    return 0


def cmd_compare_pfa(args):
    return cmd_force_curve(args, with_pfa=True)


def run_job(cfg: JobConfig, command: str = "energy"):
    """Programmatic entry point mirroring the CLI subcommands.

    Returns the list of written files; raises on unknown commands. Any
    computation error propagates to the caller (the CLI wrapper converts
    it to a machine-readable report and a nonzero exit status).
    """
    if command == "energy":
        return _run_energy(cfg)
    if command == "force-curve":
        return _run_force_curve(cfg, with_pfa=cfg.pfa_baseline)
    if command == "compare-pfa":
        return _run_force_curve(cfg, with_pfa=True)
    raise ValueError(f"unknown command {command!r}")


def _add_common(p):
    p.add_argument("--config", required=True, help="TOML job description")
    p.add_argument("--workers", type=int, default=None,
                   help="worker process count (default from config)")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--zero-freq", dest="zero_freq",
                   choices=["direct", "extrapolate", "both"], default=None)
    p.add_argument("--adaptive-matsubara", action="store_true",
                   dest="adaptive_matsubara")
    p.add_argument("--dump-spectra", action="store_true", dest="dump_spectra")
    p.add_argument("--quad-nodes", dest="quad_nodes", type=int, default=None,
                   help="Gauss-Legendre nodes per BZ dimension")
    p.add_argument("--orders", type=int, default=None,
                   help="diffraction order cutoff N = M")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="caspar",
        description="Casimir interactions of 2D-periodic multilayers")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("materials", help="material presets")
    msub = p.add_subparsers(dest="materials_command", required=True)
    pshow = msub.add_parser("show", help="print material parameters")
    pshow.add_argument("name", nargs="?", default=None)
    pshow.set_defaults(func=cmd_materials)

    p = sub.add_parser("reflect", help="dump a reflection matrix")
    _add_common(p)
    p.add_argument("--side", choices=["left", "right"], default="left")
    p.add_argument("--l", type=int, default=None, help="Matsubara index")
    p.add_argument("--xi", type=float, default=None, help="rad/s")
    p.add_argument("--kx", type=float, default=0.0)
    p.add_argument("--ky", type=float, default=0.0)
    p.set_defaults(func=cmd_reflect)

    p = sub.add_parser("energy", help="free energy at the configured separations")
    _add_common(p)
    p.set_defaults(func=cmd_energy)

    p = sub.add_parser("force-curve", help="pressure and force-gradient curve")
    _add_common(p)
    p.set_defaults(func=cmd_force_curve)

    p = sub.add_parser("compare-pfa", help="force curve with PFA baseline")
    _add_common(p)
    p.set_defaults(func=cmd_compare_pfa)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CasparError as exc:
        report = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(report), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
