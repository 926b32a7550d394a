"""Command-line front end.

Exit codes: 0 success (or CERTIFIED), 1 certification not achieved,
2 invalid input.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import cone as cone_mod
from . import converter as conv
from . import region as region_mod
from .bcnf import BcnfError, BcnfParams, check_conditions
from .certify import CERTIFIED, CertifyOptions, certify
from .partition import INF, PartitionError, classify_plane, covering_check, partition_profile, preimage_lines

REFERENCE_PQ = (6, 8, 2, 3)


class InputError(Exception):
    pass


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: malformed JSON ({exc})") from exc


def load_params(path) -> BcnfParams:
    """A BCNF parameter file, or converter parameters (mapped to their
    normal-form values)."""
    if path is None:
        raise InputError("--params is required")
    d = _read_json(path)
    if isinstance(d, dict) and "lambda1" in d:
        return conv.converter_bcnf_params(conv.ConverterParams.from_dict(d))
    return BcnfParams.from_dict(d)


def _converter_params(args, omega=None) -> conv.ConverterParams:
    if args.converter_params:
        cp = conv.ConverterParams.from_dict(_read_json(args.converter_params))
    else:
        cp = conv.ConverterParams.standard()
    return cp.with_omega(omega) if omega is not None else cp


def _range(text: str, n_parts: int = 2):
    parts = text.split(":")
    if len(parts) != n_parts:
        raise InputError(f"expected {n_parts} ':'-separated numbers, got {text!r}")
    try:
        return [float(p) for p in parts]
    except ValueError as exc:
        raise InputError(f"bad range {text!r}") from exc


def _emit(args, text: str) -> None:
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def _dump(obj) -> str:
    return json.dumps(obj, indent=2)


def cmd_check(args) -> int:
    rep = check_conditions(load_params(args.params), args.i_max)
    out = rep.to_dict()
    out["i_max"] = args.i_max
    _emit(args, _dump(out))
    return 0


def cmd_profile(args) -> int:
    params = load_params(args.params)
    prof = partition_profile(params)
    out = prof.summary()
    if args.lines:
        out["lines_L"] = [ln.to_dict() for ln in preimage_lines(params, "L", args.lines)]
        out["lines_R"] = [ln.to_dict() for ln in preimage_lines(params, "R", args.lines)]
    if args.covering:
        out["covering"] = {}
        for side in ("L", "R"):
            rep = covering_check(params, side, args.covering, seed=args.seed)
            lo, hi = rep.allowed
            out["covering"][side] = {
                "ok": rep.ok, "violations": len(rep.violations),
                "allowed": [lo, "inf" if hi == INF else hi],
                "observed": [rep.observed_min, rep.observed_max],
            }
    _emit(args, _dump(out))
    return 0


def cmd_plane(args) -> int:
    if args.resolution < 2:
        raise InputError("resolution must be at least 2")
    if not args.out:
        raise InputError("plane needs --out FILE.csv")
    grid = classify_plane(_range(args.tau), _range(args.delta), args.resolution, args.side,
                          i_max=args.i_max)
    grid.write_csv(args.out)
    return 0


def cmd_cone(args) -> int:
    params = load_params(args.params)
    bounds = [int(v) for v in args.bounds.split(",")] if args.bounds else None
    if bounds is None or len(bounds) != 4:
        raise InputError("--bounds p_min,p_max,q_min,q_max is required")
    fam = cone_mod.matrix_family(params, *bounds)
    if args.theta is not None:
        t0, t1 = _range(args.theta)
        cert = cone_mod.verify_cone(fam, cone_mod.Cone(t0, t1), args.inclusion_margin)
    else:
        found = cone_mod.find_cone(fam, args.angle_resolution, args.margin, args.inclusion_margin)
        if found is None:
            _emit(args, _dump({"found": False}))
            return 1
        cert = found[1]
    out = cert.to_dict()
    out["found"] = True
    if cert.c > 1:
        b = cone_mod.lyapunov_lower_bound(cert.c, bounds[1], bounds[3])
        out["lyapunov_lower_bound"] = b.bcnf
        out["lyapunov_robust_bound"] = b.robust
    _emit(args, _dump(out))
    return 0 if cert.certified else 1


def cmd_region(args) -> int:
    params = load_params(args.params)
    if args.region:
        reg = region_mod.RegionUnion.from_json(json.dumps(_read_json(args.region)))
    else:
        seed = region_mod.bbox_seed(params) if args.bbox_seed else region_mod.patch_seed(params, args.seed_size)
        reg = region_mod.invariant_closure(params, seed, args.max_iter, args.inflate)
    rep = region_mod.verify_trapping(params, reg, args.shrink, samples=args.samples, seed=args.seed)
    if args.region_out:
        with open(args.region_out, "w") as fh:
            fh.write(reg.to_json() + "\n")
    if args.csv:
        reg.write_csv(args.csv)
    out = rep.to_dict()
    out["pieces"] = len(reg)
    out["meta"] = reg.meta
    _emit(args, _dump(out))
    return 0


def cmd_converter(args) -> int:
    sub = args.experiment
    if sub == "bifurcation":
        lo, hi, n = _range(args.omega, 3)
        cp = _converter_params(args)
        data = conv.bifurcation_scan(cp, conv.omega_grid(lo, hi, int(n)), args.iters,
                                     args.transient, args.record, threads=args.threads)
        if not args.out:
            raise InputError("bifurcation needs --out FILE.csv")
        data.write_csv(args.out)
    elif sub == "lyapunov":
        cp = _converter_params(args, float(args.omega))
        res = conv.lyapunov_estimate(cp, (0.5, 0.5), args.n, args.burn_in,
                                     args.tol if args.tol else conv.BOUNDARY_TOL)
        _emit(args, _dump({"omega": cp.omega, "lyapunov": res.exponent,
                           "iterations": res.iterations, "burn_in": res.burn_in,
                           "boundary_hits": res.boundary_hits}))
    elif sub == "attractor":
        cp = _converter_params(args, float(args.omega))
        data = conv.attractor_export(args.source, cp, args.n, args.discard)
        if data.phi_nonpositive:
            print(f"warning: {data.phi_nonpositive} points with phi <= 0", file=sys.stderr)
        if not args.out:
            raise InputError("attractor needs --out FILE.csv")
        data.write_csv(args.out)
    elif sub == "timeseries":
        cp = _converter_params(args, float(args.omega))
        ts = conv.simulate_time_series(cp, _range(args.w0), args.intervals, args.samples)
        if not args.out:
            raise InputError("timeseries needs --out FILE.csv")
        ts.write_csv(args.out)
    return 0


def cmd_certify(args) -> int:
    opts = CertifyOptions(i_max=args.i_max, seed=args.seed, inflate=args.inflate,
                          shrink=args.shrink, cap=args.cap, samples=args.samples)
    coeffs = None
    source = {"kind": "bcnf"}
    if args.converter:
        # the normal-form parameters do not depend on omega
        cp = _converter_params(args, args.omega)
        if args.omega_at_bcb or args.omega is None:
            cp = cp.with_omega(conv.omega_bcb(cp))
        params = conv.converter_bcnf_params(cp)
        coeffs = conv.converter_pwl_coeffs(cp)
        source = {"kind": "converter", "converter_params": cp.to_dict(),
                  "omega_bcb": conv.omega_bcb(cp)}
        if not args.converter_params:
            opts.expected_pq = REFERENCE_PQ
    else:
        params = load_params(args.params)
    if args.expected_pq:
        opts.expected_pq = tuple(int(v) for v in args.expected_pq.split(","))
    region = None
    if args.region:
        region = region_mod.RegionUnion.from_json(json.dumps(_read_json(args.region)))
        source["region_input"] = args.region
    cert = certify(params, opts, region, coeffs)
    cert.source = source
    if args.region_out and cert.region is not None:
        with open(args.region_out, "w") as fh:
            fh.write(cert.region.to_json() + "\n")
        cert.region_path = args.region_out
    _emit(args, cert.to_json())
    return 0 if cert.verdict == CERTIFIED else 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--params", help="JSON parameter file")
    common.add_argument("--seed", type=int, default=0, help="seed for all random sampling")
    common.add_argument("--out", help="output file (default stdout for JSON)")
    common.add_argument("--tol", type=float, default=None, help="numerical tolerance override")
    common.add_argument("--threads", type=int, default=1)

    p = argparse.ArgumentParser(prog="bcnfchaos", description=__doc__)
    sp = p.add_subparsers(dest="command", required=True)

    c = sp.add_parser("check", parents=[common], help="check the parameter conditions")
    c.add_argument("--i-max", type=int, default=1000)
    c.set_defaults(func=cmd_check)

    c = sp.add_parser("profile", parents=[common], help="partition indices p*, q*, q**")
    c.add_argument("--lines", type=int, default=0, help="also list this many preimage lines")
    c.add_argument("--covering", type=int, default=0, help="sampled covering check with N points")
    c.set_defaults(func=cmd_profile)

    c = sp.add_parser("plane", parents=[common], help="classify a (tau, delta) grid")
    c.add_argument("--side", choices=["L", "R"], required=True)
    c.add_argument("--tau", required=True, help="lo:hi (write --tau=-3:3 for a negative lo)")
    c.add_argument("--delta", required=True, help="lo:hi")
    c.add_argument("--resolution", type=int, required=True)
    c.add_argument("--i-max", type=int, default=1000)
    c.set_defaults(func=cmd_plane)

    c = sp.add_parser("cone", parents=[common], help="find or verify an invariant expanding cone")
    c.add_argument("--bounds", help="p_min,p_max,q_min,q_max")
    c.add_argument("--theta", help="theta0:theta1 to verify instead of searching")
    c.add_argument("--margin", type=float, default=cone_mod.DEFAULT_ENLARGEMENT)
    c.add_argument("--angle-resolution", type=int, default=64)
    c.add_argument("--inclusion-margin", type=float, default=cone_mod.DEFAULT_INCLUSION_MARGIN)
    c.set_defaults(func=cmd_cone)

    c = sp.add_parser("region", parents=[common], help="build and verify a trapping region")
    c.add_argument("--region", help="region JSON to verify instead of building one")
    c.add_argument("--bbox-seed", action="store_true", help="seed with the attractor bounding box")
    c.add_argument("--seed-size", type=float, default=2.5e-3)
    c.add_argument("--inflate", type=float, default=1e-4)
    c.add_argument("--shrink", type=float, default=0.0)
    c.add_argument("--max-iter", type=int, default=500)
    c.add_argument("--samples", type=int, default=10_000)
    c.add_argument("--region-out", help="write the region JSON here")
    c.add_argument("--csv", help="write region vertices as CSV")
    c.set_defaults(func=cmd_region)

    c = sp.add_parser("converter", parents=[common], help="power-converter experiments")
    c.add_argument("experiment", choices=["bifurcation", "lyapunov", "attractor", "timeseries"])
    c.add_argument("--converter-params", help="ConverterParams JSON (default: standard values)")
    c.add_argument("--omega", default="5.45", help="value, or lo:hi:n for bifurcation")
    c.add_argument("--iters", type=int, default=100_000)
    c.add_argument("--transient", type=int, default=1000)
    c.add_argument("--record", type=int, default=200)
    c.add_argument("--n", type=int, default=10_000)
    c.add_argument("--burn-in", type=int, default=1000)
    c.add_argument("--discard", type=int, default=100)
    c.add_argument("--source", choices=["strobo", "bcnf"], default="strobo")
    c.add_argument("--intervals", type=int, default=30)
    c.add_argument("--samples", type=int, default=50, help="samples per unit interval")
    c.add_argument("--w0", default="0.5:0.5")
    c.set_defaults(func=cmd_converter)

    c = sp.add_parser("certify", parents=[common], help="full robust-chaos certificate")
    c.add_argument("--converter", action="store_true", help="use the converter's normal form")
    c.add_argument("--converter-params", help="ConverterParams JSON (default: standard values)")
    c.add_argument("--omega-at-bcb", action="store_true")
    c.add_argument("--omega", type=float, default=None)
    c.add_argument("--region", help="region JSON to certify instead of building one")
    c.add_argument("--region-out", help="write the region JSON here and reference it")
    c.add_argument("--expected-pq", help="reference p_min,p_max,q_min,q_max to compare against")
    c.add_argument("--i-max", type=int, default=1000)
    c.add_argument("--inflate", type=float, default=1e-4)
    c.add_argument("--shrink", type=float, default=0.0)
    c.add_argument("--cap", type=int, default=200)
    c.add_argument("--samples", type=int, default=10_000)
    c.set_defaults(func=cmd_certify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        return args.func(args)
    except (InputError, BcnfError, conv.ConverterError, cone_mod.ConeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (PartitionError, region_mod.RegionError, conv.DivergenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
