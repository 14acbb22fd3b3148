"""Single entry point binding scenes, configs and the computational modules
into reproducible batch runs with machine-readable outputs.

Exit codes: 0 success, 2 schema violation (with the JSON pointer of the
offending field), 3 flagged numerical failure.
"""

import argparse
import json
import os
import sys

import numpy as np

from .capacity import (
    CapacitySolveConfig,
    build_cutoff,
    closed_form_capacity,
    estimate_capacity,
)
from .exponents import Exponents
from .geometry import SceneError, load_scene
from .grids import GridSpec
from .manifest import RunWriter
from .metriclen import completeness_probe, conformal_length, ray_curve
from .pde import SolveConfig, maximal_solution, solve_dirichlet, solve_large, verify_integral_estimate, verify_pointwise_estimate
from .wiener import catalog_to_thinness, classify_catalog, dyadic_bridge, load_shape, wiener_terms


class NumericalFailure(RuntimeError):
    def __init__(self, payload):
        super().__init__(json.dumps(payload, default=str))
        self.payload = payload


def _parse_point(text, dim):
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise SceneError("point must be comma-separated numbers", "/point")
    if len(vals) != dim:
        raise SceneError(f"point must have {dim} coordinates", "/point")
    return np.asarray(vals)


def _load_cfgs(path):
    pde_cfg, cap_cfg = SolveConfig(), CapacitySolveConfig()
    if not path:
        return pde_cfg, cap_cfg
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    allowed_pde = set(SolveConfig.__dataclass_fields__)
    allowed_cap = set(CapacitySolveConfig.__dataclass_fields__)
    for key, val in doc.get("pde", {}).items():
        if key not in allowed_pde:
            raise SceneError(f"unknown key '{key}'", f"/pde/{key}")
        setattr(pde_cfg, key, tuple(val) if isinstance(val, list) else val)
    for key, val in doc.get("capacity", {}).items():
        if key not in allowed_cap:
            raise SceneError(f"unknown key '{key}'", f"/capacity/{key}")
        setattr(cap_cfg, key, val)
    for key in doc:
        if key not in ("pde", "capacity"):
            raise SceneError(f"unknown key '{key}'", f"/{key}")
    return pde_cfg, cap_cfg


def _scene_and_grid(args):
    spec, grid, catalog = load_scene(args.scene)
    if getattr(args, "grid", None):
        grid = GridSpec.cube(2.05, args.grid, spec.dimension)
    if grid is None:
        raise SceneError("scene carries no grid and --grid was not given", "/grid")
    return spec, grid, catalog


def _strip_resource_flags(argv):
    """Execution-resource flags do not affect results and are excluded from the
    manifest identity (outputs must be byte-identical at any thread count)."""
    out = []
    skip = False
    for tok in argv:
        if skip:
            skip = False
            continue
        if tok == "--threads":
            skip = True
            continue
        if tok.startswith("--threads="):
            continue
        out.append(tok)
    return out


def _writer(args, argv):
    out = getattr(args, "out", None)
    out_dir = os.path.dirname(out) if out else None
    return RunWriter(
        ["yamcap"] + _strip_resource_flags(list(argv)),
        scene_path=getattr(args, "scene", None),
        config_path=getattr(args, "cfg", None),
        out_dir=out_dir or os.environ.get("YAMCAP_OUT_DIR", "."),
    )


def _out_name(args, default):
    out = getattr(args, "out", None)
    return os.path.basename(out) if out else default


# ---------------------------------------------------------------------------


def cmd_cap_estimate(args, argv):
    spec, grid, _ = _scene_and_grid(args)
    _, cap_cfg = _load_cfgs(args.cfg)
    res = estimate_capacity(spec, grid, cap_cfg)
    writer = _writer(args, argv)
    doc = {
        "value": res.value,
        "meshSpacing": res.mesh_spacing,
        "iterations": res.iterations,
        "constraintViolation": res.constraint_violation,
        "converged": res.converged,
        "coarseRasterization": res.coarse,
    }
    writer.add_json(_out_name(args, "result.json"), doc)
    if args.dump_extremal:
        writer.add_field_dump(args.dump_extremal, res.extremal)
    writer.finish()
    if not res.converged or res.constraint_violation > 1e-6:
        raise NumericalFailure(doc)
    return 0


def cmd_cap_cutoff(args, argv):
    spec, grid, _ = _scene_and_grid(args)
    _, cap_cfg = _load_cfgs(args.cfg)
    expo = Exponents.for_dimension(spec.dimension)
    m = args.m if args.m is not None else (expo.n + 2) / 2.0
    pair = build_cutoff(spec, m, grid, cap_cfg)
    writer = _writer(args, argv)
    doc = {
        "m": pair.m,
        "hessianBudget": pair.hessian_budget,
        "capacityValue": pair.capacity.value,
        "budgetRatio": pair.budget_ratio,
        "meshSpacing": grid.h,
    }
    writer.add_json(_out_name(args, "cutoff.json"), doc)
    if args.dump_phi:
        writer.add_field_dump(args.dump_phi, pair.phi)
    writer.finish()
    return 0


def cmd_pde_dirichlet(args, argv):
    spec, grid, _ = _scene_and_grid(args)
    pde_cfg, _ = _load_cfgs(args.cfg)
    radius = grid.radius_field()
    d = spec.as_primitive().signed_distance(grid.ambient_centers()) if not spec.is_empty \
        else np.full(grid.shape, np.inf)
    rmax = 0.98 * float(radius.max())
    domain = (radius < rmax) & (d > 0.0)
    boundary = np.where(~domain, args.value, 0.0)
    sol = solve_dirichlet(grid, domain, boundary, pde_cfg)
    writer = _writer(args, argv)
    name = _out_name(args, "sol.bin")
    writer.add_field_dump(name, sol.u, {"residual": sol.residual_norm, "kind": sol.kind})
    writer.finish()
    if sol.flags.get("converged") is False and sol.residual_norm > 1e-6:
        raise NumericalFailure({"residual": sol.residual_norm, **sol.flags})
    return 0


def cmd_pde_large(args, argv):
    spec, grid, _ = _scene_and_grid(args)
    pde_cfg, _ = _load_cfgs(args.cfg)
    if spec.is_empty:
        raise SceneError("blow-up solve needs a nonempty scene", "/primitives")
    from .geometry import rasterize

    kmask = rasterize(spec, grid).mask
    radius = grid.radius_field()
    dist = spec.as_primitive().signed_distance(grid.ambient_centers())
    domain = (radius < 0.98 * float(radius.max())) & ~kmask & (dist > 0.0)
    sol = solve_large(grid, domain, kmask, pde_cfg, blowup_distance=dist)
    writer = _writer(args, argv)
    writer.add_field_dump(
        _out_name(args, "sol.bin"), sol.u,
        {"residual": sol.residual_norm, "mode": sol.flags.get("mode"),
         "exhaustionTrace": sol.exhaustion_trace},
    )
    writer.finish()
    if sol.flags.get("exhaustion_not_cauchy") and not sol.flags.get("levels_capped_at_saturation"):
        raise NumericalFailure(sol.flags)
    return 0


def cmd_pde_maximal(args, argv):
    spec, grid, _ = _scene_and_grid(args)
    pde_cfg, _ = _load_cfgs(args.cfg)
    sol = maximal_solution(spec, grid, pde_cfg)
    writer = _writer(args, argv)
    writer.add_field_dump(
        _out_name(args, "sol.bin"), sol.u,
        {"residual": sol.residual_norm, "farFieldCoefficient": sol.far_field_coefficient},
    )
    writer.finish()
    if sol.flags.get("nonmonotone_in_radius"):
        raise NumericalFailure(sol.flags)
    return 0


def cmd_pde_verify(args, argv):
    spec, grid, _ = _scene_and_grid(args)
    pde_cfg, cap_cfg = _load_cfgs(args.cfg)
    writer = _writer(args, argv)
    if args.which == "pointwise":
        out = verify_pointwise_estimate(spec, grid, grid, pde_cfg, cap_cfg)
        row = ["pointwise", args.scene, out["lowerRatio"], out["upperRatio"], out["capacity"]]
        header = ["check", "scene", "lowerRatio", "upperRatio", "capacity"]
    else:
        out = verify_integral_estimate(spec, grid, pde_cfg, cap_cfg)
        row = ["integral", args.scene, out["ratio"], out["integral"], out["capacity"]]
        header = ["check", "scene", "ratio", "integral", "capacity"]
    line = ",".join(str(v) for v in row)
    print(line)
    writer.add_csv(_out_name(args, "verify.csv"), [row], header=header)
    writer.finish()
    return 0


def cmd_wiener_test(args, argv):
    spec, grid, catalog = _scene_and_grid(args)
    _, cap_cfg = _load_cfgs(args.cfg)
    expo = Exponents.for_dimension(spec.dimension)
    p = _parse_point(args.point, spec.dimension)
    catalog_verdict = None
    if catalog is not None:
        catalog_verdict = catalog_to_thinness(classify_catalog(catalog))
    oracle = None
    if args.oracle == "catalog":
        scale_exp = float(expo.capacity_scale_exp)

        def oracle(piece, is_ball):
            return closed_form_capacity("ball", expo.n, r=min(piece.bounding_radius(), 1.0))

    rep = wiener_terms(
        spec, p, (1, args.jmax), grid, cap_cfg, expo,
        catalog_verdict=catalog_verdict, oracle=oracle,
    )
    writer = _writer(args, argv)
    doc = {
        "basePoint": list(rep.base_point),
        "verdict": rep.verdict,
        "catalogVerdict": rep.catalog_verdict,
        "tailSlope": rep.tail_slope,
        "partialSums": rep.partial_sums,
        "terms": [
            {"j": t.j, "r": t.r_j, "capRatio": t.cap_ratio, "term": t.term,
             "missing": t.missing, "atFloor": t.at_floor}
            for t in rep.terms
        ],
        "notes": rep.notes,
    }
    writer.add_json(_out_name(args, "wiener.json"), doc)
    writer.add_csv(
        "wiener_terms.csv",
        [(t.j, t.r_j, t.cap_ratio if t.cap_ratio is not None else "",
          t.term if t.term is not None else "") for t in rep.terms],
        header=["j", "r_j", "capRatio", "term"],
    )
    writer.finish()
    return 0


def cmd_wiener_classify(args, argv):
    shape = load_shape(args.shape)
    verdict = classify_catalog(shape)
    kind = shape.get("kind")
    criteria = {
        "submanifold": "k > (n-2)/2",
        "density_set": "Hausdorff d-content >= C r^d at small scales with d > (n-2)/2",
        "finite_measure_set": "finite H^((n-2)/2) forces zero capacity",
        "cusp": "profile integral criterion by dimension branch",
    }
    print(f"{verdict} [{kind}: {criteria.get(kind, '')}]")
    return 0


def cmd_wiener_bridge(args, argv):
    with open(args.samples, "r", encoding="utf-8") as fh:
        samples = json.load(fh)
    res = dyadic_bridge(np.asarray(samples, dtype=float), args.kappa, args.J)
    doc = {
        "lowerSum": res.lower_sum, "upperSum": res.upper_sum,
        "integralEstimate": res.integral_estimate, "divergent": res.divergent,
        "lowerConstant": res.lower_constant, "upperConstant": res.upper_constant,
        "partialSums": res.partial_sums,
    }
    writer = _writer(args, argv)
    writer.add_json(_out_name(args, "bridge.json"), doc)
    writer.finish()
    print(json.dumps({k: doc[k] for k in ("lowerSum", "integralEstimate", "upperSum", "divergent")},
                     default=str))
    return 0


def _probe_grids(spec, grid):
    h = grid.h
    if grid.reduction == "radial1d":
        base = GridSpec.radial(4.0, int(round(4.0 / h)), spec.dimension)
    elif grid.reduction == "axisym2d":
        base = GridSpec.axisym(4.0, -4.0, 4.0, int(round(4.0 / h)), spec.dimension)
    else:
        base = GridSpec.cube(4.0, int(round(8.0 / h / 2) * 2), spec.dimension)
    return base, base.refined(2)


def cmd_probe_completeness(args, argv):
    spec, grid, catalog = _scene_and_grid(args)
    pde_cfg, cap_cfg = _load_cfgs(args.cfg)
    p = _parse_point(args.point, spec.dimension)
    g1, g2 = _probe_grids(spec, grid)
    verdict, details = completeness_probe(
        spec, p, (g1, g2), grid, pde_cfg, cap_cfg, j_range=(1, args.jmax),
    )
    writer = _writer(args, argv)
    bounds = details["shell_bounds"]
    doc = {
        "verdict": verdict,
        "rayLengths": details["ray_lengths"],
        "shellBoundPartialSums": bounds.partial_sums,
        "catalog": catalog,
        "flags": details["flags"],
    }
    writer.add_json(_out_name(args, "completeness.json"), doc)
    writer.add_csv(
        "shell_bounds.csv",
        [(j, b, s) for (j, b), s in zip(bounds.terms, bounds.partial_sums)],
        header=["j", "b_j", "partialSum"],
    )
    probe = details["probes"][-1]
    writer.add_csv(
        "ray_lengths.csv",
        [(int(i), rep.total_length) for i, rep in sorted(probe.ray_lengths.items())],
        header=["directionId", "rayLength"],
    )
    writer.finish()
    if details["flags"]:
        raise NumericalFailure(details["flags"])
    return 0


def cmd_probe_ray(args, argv):
    spec, grid, _ = _scene_and_grid(args)
    pde_cfg, _ = _load_cfgs(args.cfg)
    p = _parse_point(args.point, spec.dimension)
    direction = _parse_point(args.direction, spec.dimension)
    g1, _ = _probe_grids(spec, grid)
    sol = maximal_solution(spec, g1, pde_cfg)
    curve = ray_curve(p, direction, length=args.length, h=g1.h)
    rep = conformal_length(sol, curve, p=p)
    writer = _writer(args, argv)
    writer.add_json(
        _out_name(args, "ray.json"),
        {
            "length": rep.total_length, "divergent": rep.divergent,
            "cutoffRadius": rep.cutoff_radius,
            "perShell": [{"j": j, "contribution": c} for j, c in rep.per_shell],
        },
    )
    writer.finish()
    return 0


# ---------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(prog="yamcap", description=__doc__)
    parser.add_argument("--threads", type=int, default=1, help="cap on worker threads")
    sub = parser.add_subparsers(dest="group", required=True)

    def common(p, scene=True, out=True):
        if scene:
            p.add_argument("--scene", required=True)
        p.add_argument("--cfg", default=None)
        if out:
            p.add_argument("--out", default=None)

    cap = sub.add_parser("cap").add_subparsers(dest="op", required=True)
    p = cap.add_parser("estimate")
    common(p)
    p.add_argument("--grid", type=int, default=None, help="full-grid cells per axis override")
    p.add_argument("--dump-extremal", default=None)
    p.set_defaults(func=cmd_cap_estimate)
    p = cap.add_parser("cutoff")
    common(p)
    p.add_argument("--grid", type=int, default=None)
    p.add_argument("--m", type=float, default=None)
    p.add_argument("--dump-phi", default=None)
    p.set_defaults(func=cmd_cap_cutoff)

    pde = sub.add_parser("pde").add_subparsers(dest="op", required=True)
    p = pde.add_parser("dirichlet")
    common(p)
    p.add_argument("--value", type=float, default=1.0)
    p.set_defaults(func=cmd_pde_dirichlet)
    p = pde.add_parser("large")
    common(p)
    p.set_defaults(func=cmd_pde_large)
    p = pde.add_parser("maximal")
    common(p)
    p.set_defaults(func=cmd_pde_maximal)
    p = pde.add_parser("verify")
    p.add_argument("which", choices=["pointwise", "integral"])
    common(p)
    p.set_defaults(func=cmd_pde_verify)

    wie = sub.add_parser("wiener").add_subparsers(dest="op", required=True)
    p = wie.add_parser("test")
    common(p)
    p.add_argument("--point", required=True)
    p.add_argument("--jmax", type=int, default=8)
    p.add_argument("--oracle", choices=["variational", "catalog"], default="variational")
    p.set_defaults(func=cmd_wiener_test)
    p = wie.add_parser("classify")
    p.add_argument("--shape", required=True)
    p.set_defaults(func=cmd_wiener_classify)
    p = wie.add_parser("bridge")
    p.add_argument("--samples", required=True)
    p.add_argument("--kappa", type=float, required=True)
    p.add_argument("--J", type=int, default=0)
    p.add_argument("--out", default=None)
    p.add_argument("--cfg", default=None)
    p.set_defaults(func=cmd_wiener_bridge)

    probe = sub.add_parser("probe").add_subparsers(dest="op", required=True)
    p = probe.add_parser("completeness")
    common(p)
    p.add_argument("--point", required=True)
    p.add_argument("--jmax", type=int, default=6)
    p.set_defaults(func=cmd_probe_completeness)
    p = probe.add_parser("ray")
    common(p)
    p.add_argument("--point", required=True)
    p.add_argument("--direction", required=True)
    p.add_argument("--length", type=float, default=1.0)
    p.set_defaults(func=cmd_probe_ray)
    return parser


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, argv)
    except SceneError as exc:
        sys.stderr.write(f"schema error at {exc.pointer or '/'}: {exc.message}\n")
        return 2
    except NumericalFailure as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
