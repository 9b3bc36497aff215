"""Command-line interface.

Subcommands: beta, beta-constancy, slice-profile, blowup, verify,
validate-gauge, calibrate-dinf.  Every output embeds the fully-resolved
configuration (defaults included) so runs are reproducible; identical
argv + seed gives byte-identical files.  Flags may be preset through
environment variables with the CARNOTPERIM_ prefix (command-line values win).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import federer, gauges, groups, slices, surfaces, verify
from .beta import beta, beta_constancy
from .exceptions import CarnotPerimError

ENV_PREFIX = "CARNOTPERIM_"


def _env_default(name, fallback, cast):
    raw = os.environ.get(ENV_PREFIX + name.upper().replace("-", "_"))
    if raw is None:
        return fallback
    return cast(raw)


def _add_common(p, samples_default):
    p.add_argument("--group", default=_env_default("group", "heisenberg:1", str),
                   help="group spec: heisenberg:n, abelian:m or a model file")
    p.add_argument("--gauge", default=_env_default("gauge", "koranyi", str),
                   help="gauge spec, e.g. koranyi | dinf:eps2=2 | starball:rho=0.5")
    p.add_argument("--seed", type=int, default=_env_default("seed", 7, int))
    p.add_argument("--samples", type=float, default=_env_default("samples", samples_default, float),
                   help="Monte-Carlo samples per estimate")
    p.add_argument("--workers", type=int, default=_env_default("workers", 1, int),
                   help="concurrency cap; results are identical for any value")
    p.add_argument("--out", default=None, help="output file (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), default=None)


def _parse_nu(text, model):
    return groups.direction(model, np.array([float(v) for v in text.split(",")]))


def _parse_point(text, model):
    return model.conform(np.array([float(v) for v in text.split(",")]))


def _parse_radii(text):
    t0, _, k = text.partition(":")
    return float(t0), int(k)


def _resolved_config(args, skip=("out", "format", "func")):
    cfg = {}
    for k, v in sorted(vars(args).items()):
        if k in skip or k.startswith("_"):
            continue
        cfg[k] = v
    return cfg


def _emit(args, meta, header, rows, json_obj):
    fmt = args.format or getattr(args, "_default_format", "csv")
    if fmt == "json":
        payload = {"config": meta, "result": json_obj}
        text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    else:
        lines = ["# %s=%s" % (k, v) for k, v in sorted(meta.items())]
        lines.append(",".join(header))
        for row in rows:
            lines.append(",".join(_fmt(v) for v in row))
        text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _fmt(v):
    if isinstance(v, float):
        return repr(float(v))  # shortest round-trip form, plain for numpy scalars
    return str(v)


# --- subcommands ------------------------------------------------------------------


def cmd_slice_profile(args):
    model = groups.parse_group(args.group)
    gauge = gauges.parse_gauge(model, args.gauge)
    nu = _parse_nu(args.nu, model)
    profile = slices.slice_profile(
        gauge, nu, grid_size=args.grid, n_samples=int(args.samples),
        seed=args.seed, workers=args.workers,
    )
    meta = _resolved_config(args)
    meta["support"] = profile.support
    rows = [
        (float(t), a.value, a.stderr, a.n_samples)
        for t, a in zip(profile.grid, profile.areas)
    ]
    json_obj = {
        "support": profile.support,
        "grid": profile.grid.tolist(),
        "areas": [a.as_dict() for a in profile.areas],
    }
    _emit(args, meta, ("t", "area", "stderr", "n_samples"), rows, json_obj)
    return 0


def _guard_gauge(args, gauge):
    """Refuse to run estimators on gauges that fail validation.

    dinf gauges additionally need a calibration file covering their eps2
    (the triangle inequality holds only below a group-specific constant).
    --force acknowledges and skips both guards.
    """
    if args.force:
        return
    if gauge.kind == "dinf" and gauge.model.step == 2:
        if not args.calibration:
            raise CarnotPerimError(
                "the dinf gauge needs a calibration file (run calibrate-dinf and pass "
                "--calibration FILE, or override with --force)"
            )
        with open(args.calibration, "r", encoding="utf-8") as fh:
            calib = json.load(fh)
        eps_max = float(calib["result"]["eps2"])
        if gauge.eps2 > eps_max + 1e-12:
            raise CarnotPerimError(
                "eps2=%g exceeds the calibrated maximum %g in %s"
                % (gauge.eps2, eps_max, args.calibration)
            )
        return
    report = gauges.validate(gauge, samples=4000, seed=args.seed)
    if not report.passed:
        raise CarnotPerimError(
            "gauge %r fails validation (worst violation %.3g); inspect with "
            "validate-gauge or acknowledge with --force"
            % (gauge.spec_string(), report.worst_violation)
        )


def cmd_beta(args):
    model = groups.parse_group(args.group)
    gauge = gauges.parse_gauge(model, args.gauge)
    _guard_gauge(args, gauge)
    nu = _parse_nu(args.nu, model)
    result = beta(
        gauge, nu, n_samples=int(args.samples), grid_size=args.grid,
        seed=args.seed, workers=args.workers,
    )
    meta = _resolved_config(args)
    rows = [
        (
            result.argmax_t, result.value.value, result.value.stderr,
            result.method, result.omega, result.c_qm1,
        )
    ]
    args._default_format = "json"
    _emit(args, meta, ("argmax_t", "beta", "stderr", "method", "omega", "c_qm1"),
          rows, result.as_dict())
    return 0


def cmd_beta_constancy(args):
    model = groups.parse_group(args.group)
    gauge = gauges.parse_gauge(model, args.gauge)
    _guard_gauge(args, gauge)
    report = beta_constancy(
        gauge, n_directions=args.directions, n_samples=int(args.samples),
        seed=args.seed, workers=args.workers,
    )
    meta = _resolved_config(args)
    meta["max_pairwise_dev"] = report.max_pairwise_dev
    meta["constant_within_tolerance"] = report.constant_within_tolerance
    rows = [
        (",".join(repr(float(c)) for c in r.nu), r.value.value, r.value.stderr)
        for r in report.results
    ]
    _emit(args, meta, ("direction", "beta", "stderr"), rows, report.as_dict())
    return 0


def cmd_blowup(args):
    model = groups.parse_group(args.group)
    gauge = gauges.parse_gauge(model, args.gauge)
    point = _parse_point(args.point, model) if args.point else None
    spec = surfaces.parse_surface(model, args.surface, x=point)
    t0, halvings = _parse_radii(args.radii)
    sched = federer.DensitySchedule(
        tuple(t0 * 2.0**-k for k in range(halvings + 1)),
        multistart_count=args.multistart,
        local_steps=args.local_steps,
        samples_per_ball=int(args.samples),
        seed=args.seed,
    )
    report = federer.federer_density(spec, gauge, sched=sched, workers=args.workers)
    meta = _resolved_config(args)
    meta["extrapolated_theta"] = report.extrapolated_theta.value
    meta["extrapolated_stderr"] = report.extrapolated_theta.stderr
    rows = [
        (r.t, r.ratio, r.stderr, r.centered_ratio, r.centered_stderr)
        for r in report.records
    ]
    _emit(args, meta, ("t", "ratio", "stderr", "centered_ratio", "centered_stderr"),
          rows, report.as_dict())
    return 0


def cmd_verify(args):
    model = groups.parse_group(args.group)
    gauge = gauges.parse_gauge(model, args.gauge)
    nu = np.zeros(model.m1)
    nu[0] = 1.0
    if args.suite == "all":
        reports = verify.run_all(model, gauge, seed=args.seed,
                                 samples=int(min(args.samples, 20000)),
                                 profile_samples=int(args.samples), workers=args.workers)
    elif args.suite == "convexity":
        reports = [verify.convexity_check(gauge, int(args.samples), args.seed)]
    elif args.suite == "symmetry":
        reports = [verify.symmetry_check(gauge, samples=int(args.samples), seed=args.seed)]
    elif args.suite == "busemann":
        reports = [verify.busemann_suite(gauge, nu, n_samples=int(args.samples),
                                         seed=args.seed, workers=args.workers)]
    else:  # blowup
        plane = surfaces.vertical_plane(model, nu)
        sched = federer.default_schedule(t0=0.4, halvings=3, samples_per_ball=int(args.samples), seed=args.seed)
        reports = [verify.blowup_suite([plane], gauge, sched=sched, seed=args.seed,
                                       beta_samples=int(args.samples), workers=args.workers)]

    meta = _resolved_config(args)
    lines = []
    for rep in reports:
        lines.append("suite %-10s outcome %s" % (rep.suite, rep.outcome))
        for c in rep.checks:
            lines.append(
                "  [%s] %-38s observed=%.6g target=%.6g tol=%.6g"
                % ("ok" if c.passed else "XX", c.name, c.observed, c.target, c.tolerance)
            )
    table = "\n".join(lines) + "\n"
    payload = {"config": meta, "reports": [r.as_dict() for r in reports]}
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        sys.stdout.write(table)
    else:
        if (args.format or "json") == "json":
            sys.stdout.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        else:
            sys.stdout.write(table)
    return 0 if all(r.passed for r in reports) else 1


def cmd_validate_gauge(args):
    model = groups.parse_group(args.group)
    gauge = gauges.parse_gauge(model, args.gauge)
    report = gauges.validate(gauge, samples=int(args.samples), seed=args.seed)
    meta = _resolved_config(args)
    args._default_format = "json"
    rows = [
        (name, c["violations"], c["worst"], c["tolerance"])
        for name, c in report.checks.items()
    ]
    _emit(args, meta, ("check", "violations", "worst", "tolerance"), rows, report.as_dict())
    return 0


def cmd_calibrate_dinf(args):
    model = groups.parse_group(args.group)
    grid = [float(v) for v in args.eps_grid.split(",")]
    result = gauges.calibrate_dinfty(model, grid, samples=int(args.samples), seed=args.seed)
    meta = _resolved_config(args)
    args._default_format = "json"
    rows = [(e, e in result.passed) for e in result.grid]
    _emit(args, meta, ("eps2", "passed"), rows, result.as_dict())
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="carnotperim",
        description="slice-area constants and perimeter blow-up densities for "
        "homogeneous balls on step-2 stratified groups",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("slice-profile", help="sample the vertical slice-area profile")
    _add_common(p, 100_000)
    p.add_argument("--nu", default="1,0", help="horizontal direction, comma separated")
    p.add_argument("--grid", type=int, default=_env_default("grid", 41, int))
    p.set_defaults(func=cmd_slice_profile, _default_format="csv")

    p = sub.add_parser("beta", help="maximal vertical slice area for one direction")
    _add_common(p, 100_000)
    p.add_argument("--nu", default="1,0")
    p.add_argument("--grid", type=int, default=_env_default("grid", 41, int))
    p.add_argument("--calibration", default=None, help="calibration file for dinf gauges")
    p.add_argument("--force", action="store_true", help="skip the calibration guard")
    p.set_defaults(func=cmd_beta, _default_format="json")

    p = sub.add_parser("beta-constancy", help="beta over random horizontal directions")
    _add_common(p, 100_000)
    p.add_argument("--directions", type=int, default=_env_default("directions", 8, int))
    p.add_argument("--calibration", default=None)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_beta_constancy, _default_format="csv")

    p = sub.add_parser("blowup", help="blow-up density of a surface perimeter")
    _add_common(p, 200_000)
    p.add_argument("--surface", default="tplane", help="vplane:nu=... | tplane | expr:<formula>")
    p.add_argument("--point", default=None, help="base point, comma separated")
    p.add_argument("--radii", default=_env_default("radii", "0.4:6", str), help="t0:halvings")
    p.add_argument("--multistart", type=int, default=5)
    p.add_argument("--local-steps", dest="local_steps", type=int, default=24)
    p.set_defaults(func=cmd_blowup, _default_format="csv")

    p = sub.add_parser("verify", help="run verification suites")
    _add_common(p, 50_000)
    p.add_argument("--suite", choices=("all", "convexity", "symmetry", "busemann", "blowup"),
                   default="all")
    p.set_defaults(func=cmd_verify, _default_format="json")

    p = sub.add_parser("validate-gauge", help="sampled homogeneous-distance axioms")
    _add_common(p, 100_000)
    p.set_defaults(func=cmd_validate_gauge, _default_format="json")

    p = sub.add_parser("calibrate-dinf", help="grid-search the dinf vertical constant")
    _add_common(p, 20_000)
    p.add_argument("--eps-grid", dest="eps_grid", default="4,2,1,0.5,0.25")
    p.set_defaults(func=cmd_calibrate_dinf, _default_format="json")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CarnotPerimError as exc:
        sys.stderr.write("error: %s\n" % exc)
        return 1
    except (OSError, ValueError) as exc:
        sys.stderr.write("error: %s\n" % exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
