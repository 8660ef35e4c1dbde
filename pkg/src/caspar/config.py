"""Job configuration: TOML schema, validation, defaults.

A job document has sections [materials], [stack.left], [stack.right],
[gap], [numerics], [output] and a top-level ``schema = 1``. Stacks are
described gap-first: the incident half-space of each stack is implicitly
the gap medium, layers follow in order away from the gap, and ``exit``
names the terminating half-space. All lengths are meters, frequencies
rad/s, temperature kelvin.

Defaults follow the production protocol: N = M = 5 diffraction orders,
4 Gauss-Legendre nodes per Brillouin-zone dimension (16 total), T = 300 K,
36 Matsubara frequencies. Every filled default is echoed into the run
manifest.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib as _toml
else:
    import tomli as _toml

from .errors import ParseError, UnknownMaterial, ValidationError
from .geometry import Inclusion, LayerSpec, LayerStack, TruncationOrder, UnitCell
from .grids import BZQuadrature, MatsubaraGrid
from .materials import (Composite, Constant, Drude, LorentzPole, Material,
                        MagneticModel, preset, preset_names)

__all__ = ["JobConfig", "parse_config", "load_config"]

_DEFAULTS = {
    "orders": 5,
    "quad_nodes": 4,
    "temperature": 300.0,
    "l_max": 36,
    "zero_freq": "direct",
    "sigma_floor": 0.0,
    "workers": 1,
    "adaptive_matsubara": False,
    "separation_min": 100e-9,
    "separation_max": 2e-6,
    "separation_points": 30,
    "sphere_radius": 50e-6,
    "pfa_filling_factor": 1.0,
    "pfa_baseline": False,
    "dump_spectra": False,
    "dump_reflection": False,
    "out_dir": "out",
}


@dataclass(frozen=True, eq=False)
class JobConfig:
    """Fully validated and default-filled job description."""

    materials: dict
    stack_left: LayerStack
    stack_right: LayerStack
    gap: Material
    order: TruncationOrder
    grid: MatsubaraGrid
    quad: BZQuadrature
    separations: np.ndarray
    zero_freq: str
    sigma_floor: float
    workers: int
    adaptive_matsubara: bool
    sphere_radius: float
    pfa_filling_factor: float
    pfa_material_left: str
    pfa_material_right: str
    pfa_baseline: bool
    dump_spectra: bool
    dump_reflection: bool
    out_dir: str
    echo: dict = field(default_factory=dict)


def _build_material(name, spec, problems):
    model = spec.get("model", "")
    mu = MagneticModel(float(spec.get("mu", 1.0)))
    try:
        if model == "constant":
            perm = Constant(float(spec["eps"]))
        elif model == "drude":
            perm = Drude(float(spec["omega_p"]), float(spec["gamma"]))
        elif model == "lorentz":
            perm = LorentzPole(float(spec["eps_static"]), float(spec["eps_inf"]),
                               float(spec["omega_0"]))
        elif model == "drude_lorentz":
            perm = Composite((
                LorentzPole(float(spec["eps_static"]), float(spec["eps_inf"]),
                            float(spec["omega_0"])),
                Drude(float(spec["omega_p"]), float(spec["gamma"])),
            ))
        else:
            problems.append(f"material {name!r}: unknown model {model!r}")
            return None
    except KeyError as exc:
        problems.append(f"material {name!r}: missing field {exc.args[0]!r}")
        return None
    return Material(perm, mu, label=name)


def _material_table(doc, problems):
    table = {n: preset(n) for n in preset_names()}
    for name, spec in doc.get("materials", {}).items():
        if not isinstance(spec, dict):
            problems.append(f"material {name!r}: expected a table of parameters")
            continue
        mat = _build_material(name, spec, problems)
        if mat is not None:
            table[name] = mat
    return table


def _lookup(table, label, where, problems):
    if label not in table:
        problems.append(f"{where}: unknown material label {label!r}")
        raise UnknownMaterial(label)
    return table[label]


def _build_stack(doc, side, table, gap, problems):
    sec = doc.get("stack", {}).get(side)
    if sec is None:
        problems.append(f"missing section [stack.{side}]")
        return None, None
    try:
        Lx = float(sec.get("period_x", 0.0))
        Ly = float(sec.get("period_y", Lx))
        if Lx <= 0:
            problems.append(f"stack.{side}: period_x must be positive")
            return None, None
        cell = UnitCell(Lx=Lx, Ly=Ly)
        layers = []
        for i, lsec in enumerate(sec.get("layers", [])):
            bg = _lookup(table, lsec.get("background", ""),
                         f"stack.{side}.layers[{i}].background", problems)
            incl = []
            for k, isec in enumerate(lsec.get("inclusions", [])):
                mat = _lookup(table, isec.get("material", ""),
                              f"stack.{side}.layers[{i}].inclusions[{k}]",
                              problems)
                incl.append(Inclusion(material=mat, x0=float(isec["x0"]),
                                      y0=float(isec["y0"]), wx=float(isec["wx"]),
                                      wy=float(isec["wy"])))
            layers.append(LayerSpec(thickness=float(lsec["thickness"]),
                                    background=bg, inclusions=tuple(incl)))
        exit_mat = _lookup(table, sec.get("exit", ""),
                           f"stack.{side}.exit", problems)
        stack = LayerStack(cell=cell, incident_halfspace=gap,
                           layers=tuple(layers), exit_halfspace=exit_mat)
        for p in stack.validate():
            problems.append(f"stack.{side}: {p}")
        return stack, sec
    except (KeyError, TypeError, ValueError) as exc:
        problems.append(f"stack.{side}: {exc}")
        return None, None
    except UnknownMaterial:
        return None, None


def _is_all_dielectric(stack: LayerStack):
    mats = [stack.exit_halfspace]
    for ly in stack.layers:
        mats.append(ly.background)
        mats.extend(i.material for i in ly.inclusions)
    return all(m.sigma_dc() == 0.0 for m in mats)


def _separations(num, problems):
    if "separations" in num:
        seps = np.asarray([float(x) for x in num["separations"]], dtype=float)
    else:
        lo = float(num.get("separation_min", _DEFAULTS["separation_min"]))
        hi = float(num.get("separation_max", _DEFAULTS["separation_max"]))
        npts = int(num.get("separation_points", _DEFAULTS["separation_points"]))
        if not (0 < lo <= hi) or npts < 1:
            problems.append("invalid separation grid")
            return np.array([])
        seps = np.geomspace(lo, hi, npts)
    if np.any(seps <= 0):
        problems.append("separations must be positive")
    return seps


def parse_config(text: str) -> JobConfig:
    """Parse and validate a TOML job document.

    Raises ParseError on malformed TOML and ValidationError listing every
    violated invariant otherwise.
    """
    try:
        doc = _toml.loads(text)
    except _toml.TOMLDecodeError as exc:
        raise ParseError(f"config is not valid TOML: {exc}") from exc

    problems = []
    if doc.get("schema") != 1:
        problems.append("missing or unsupported 'schema' (expected schema = 1)")

    table = _material_table(doc, problems)

    gap_label = doc.get("gap", {}).get("material", "vacuum")
    gap = table.get(gap_label)
    if gap is None:
        problems.append(f"gap: unknown material label {gap_label!r}")
    elif gap.sigma_dc() != 0.0:
        problems.append("gap: medium must not have a zero-frequency pole")
    gap_safe = gap if gap is not None else preset("vacuum")

    left, left_sec = _build_stack(doc, "left", table, gap_safe, problems)
    right, right_sec = _build_stack(doc, "right", table, gap_safe, problems)

    num = doc.get("numerics", {})
    out = doc.get("output", {})
    orders = int(num.get("orders", _DEFAULTS["orders"]))
    quad_nodes = int(num.get("quad_nodes", _DEFAULTS["quad_nodes"]))
    temperature = float(num.get("temperature", _DEFAULTS["temperature"]))
    l_max = int(num.get("l_max", _DEFAULTS["l_max"]))
    zero_freq = str(num.get("zero_freq", _DEFAULTS["zero_freq"]))
    sigma_floor = float(num.get("sigma_floor", _DEFAULTS["sigma_floor"]))
    workers = int(num.get("workers", _DEFAULTS["workers"]))
    adaptive = bool(num.get("adaptive_matsubara", _DEFAULTS["adaptive_matsubara"]))
    sphere_radius = float(num.get("sphere_radius", _DEFAULTS["sphere_radius"]))
    fill = float(num.get("pfa_filling_factor", _DEFAULTS["pfa_filling_factor"]))
    pfa_baseline = bool(num.get("pfa_baseline", _DEFAULTS["pfa_baseline"]))

    if orders < 0:
        problems.append("numerics.orders must be >= 0")
    if quad_nodes < 1:
        problems.append("numerics.quad_nodes must be >= 1")
    if temperature <= 0:
        problems.append("numerics.temperature must be positive")
    if l_max < 0:
        problems.append("numerics.l_max must be >= 0")
    if zero_freq not in ("direct", "extrapolate", "both"):
        problems.append("numerics.zero_freq must be direct|extrapolate|both")
    if workers < 1:
        problems.append("numerics.workers must be >= 1")

    seps = _separations(num, problems)

    cell = None
    if left is not None and right is not None:
        # a homogeneous body has no intrinsic period; adopt the other's cell
        if (left.cell.Lx, left.cell.Ly) != (right.cell.Lx, right.cell.Ly):
            if not right.layers:
                right = LayerStack(cell=left.cell, incident_halfspace=gap_safe,
                                   layers=(), exit_halfspace=right.exit_halfspace)
            elif not left.layers:
                left = LayerStack(cell=right.cell, incident_halfspace=gap_safe,
                                  layers=(), exit_halfspace=left.exit_halfspace)
            else:
                problems.append(
                    "stack periods differ; describe both modulated stacks on "
                    "their common reduced cell")
        cell = left.cell

        if zero_freq == "direct" and (_is_all_dielectric(left)
                                      or _is_all_dielectric(right)):
            problems.append(
                "zero_freq = 'direct' is blind to static dielectric contrast; "
                "use 'extrapolate' or 'both' for all-dielectric stacks")

    if problems:
        raise ValidationError(problems)

    pfa_left = str(num.get("pfa_material_left", left.exit_halfspace.label))
    pfa_right = str(num.get("pfa_material_right", right.exit_halfspace.label))
    for lab, where in ((pfa_left, "pfa_material_left"),
                       (pfa_right, "pfa_material_right")):
        if lab not in table:
            raise ValidationError([f"numerics.{where}: unknown material {lab!r}"])

    echo = {
        "schema": 1,
        "materials": sorted(table),
        "gap": gap_label,
        "stack.left": left_sec,
        "stack.right": right_sec,
        "numerics": {
            "orders": orders, "quad_nodes": quad_nodes,
            "temperature": temperature, "l_max": l_max,
            "zero_freq": zero_freq, "sigma_floor": sigma_floor,
            "workers": workers, "adaptive_matsubara": adaptive,
            "sphere_radius": sphere_radius, "pfa_filling_factor": fill,
            "pfa_material_left": pfa_left, "pfa_material_right": pfa_right,
            "pfa_baseline": pfa_baseline,
            "separations_m": [float(s) for s in seps],
        },
        "output": {"directory": str(out.get("directory", _DEFAULTS["out_dir"])),
                   "dump_spectra": bool(out.get("dump_spectra", False)),
                   "dump_reflection": bool(out.get("dump_reflection", False))},
    }

    return JobConfig(
        materials=table,
        stack_left=left,
        stack_right=right,
        gap=gap_safe,
        order=TruncationOrder(orders),
        grid=MatsubaraGrid(temperature=temperature, l_max=l_max),
        quad=BZQuadrature(nodes_per_dim=quad_nodes, cell=cell),
        separations=seps,
        zero_freq=zero_freq,
        sigma_floor=sigma_floor if sigma_floor > 0 else None,
        workers=workers,
        adaptive_matsubara=adaptive,
        sphere_radius=sphere_radius,
        pfa_filling_factor=fill,
        pfa_material_left=pfa_left,
        pfa_material_right=pfa_right,
        pfa_baseline=pfa_baseline,
        dump_spectra=bool(out.get("dump_spectra", False)),
        dump_reflection=bool(out.get("dump_reflection", False)),
        out_dir=str(out.get("directory", _DEFAULTS["out_dir"])),
        echo=echo,
    )


def load_config(path) -> JobConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())
