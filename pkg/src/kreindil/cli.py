"""Batch front-end: load a model, run certification suites, build dilations,
emit machine-readable reports.

Exit codes: 0 pass, 1 usage or I/O error, 2 hypothesis failure,
3 certification failure, 4 dilation failure.  Reports are JSON on stdout
(human summary on stderr); traces are CSV.  Every random draw flows from
the single seed recorded in the report.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time

import numpy as np

from .errors import (ArgumentError, HypothesisError, RegularityError)
from .gform import MetricContext, build_H, polar_parts
from .kernels import (check_condition_iii, check_majorization,
                      check_translation_bound, finite_support_function, s_f,
                      s_k)
from .numerics import QuadratureSpec
from .operators import (OperatorSpec, check_derivative_identity, semigroup)
from .sectors import (check_numerical_range_in_sector, check_sectorial,
                      dissipative_margin, find_beta, generate_instance,
                      Sector)
from .dilation import dilate_with_metric, run_dilation, signature_trace

DEFAULT_THETA = np.pi / 4
GROWTH_TOL = 1e-9
DERIV_TOL = 1e-6
MIN_POINT_SPACING = 1e-6

TOLERANCES = {
    "growth_bound_rel": GROWTH_TOL,
    "derivative_residual": DERIV_TOL,
    "margin": 1e-10,
    "majorization_slack": 1e-9,
    "condition_iii_rel": 1e-6,
    "translation_rel": 1e-8,
    "route_agreement_rel": 1e-7,
    "compression": 1e-8,
}


# ---------------------------------------------------------------------------
# model files
# ---------------------------------------------------------------------------

def _matrix_from(doc, key, dim):
    re_key, im_key = f"{key}_re", f"{key}_im"
    if re_key not in doc:
        return None
    re = np.asarray(doc[re_key], dtype=float)
    im = np.asarray(doc.get(im_key, np.zeros_like(re)), dtype=float)
    M = re + 1j * im
    if M.shape != (dim, dim):
        raise ArgumentError(f"{key} must be {dim}x{dim}, got {M.shape}")
    return M


def load_model(path):
    """Read a model file and validate it into an OperatorSpec."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if "dim" not in doc or "A_re" not in doc:
        raise ArgumentError("model file needs at least 'dim' and 'A_re'")
    dim = int(doc["dim"])
    A = _matrix_from(doc, "A", dim)
    metric = _matrix_from(doc, "metric", dim)
    spec = OperatorSpec(A=A, metric=metric)
    return spec, doc.get("beta"), doc.get("theta")


def save_model(path, spec: OperatorSpec, beta=None, theta=None):
    doc = {
        "dim": spec.dim,
        "A_re": spec.A.real.tolist(),
        "A_im": spec.A.imag.tolist(),
    }
    if spec.metric is not None:
        doc["metric_re"] = spec.metric.real.tolist()
        doc["metric_im"] = spec.metric.imag.tolist()
    if beta is not None:
        doc["beta"] = float(beta)
    if theta is not None:
        doc["theta"] = float(theta)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


# ---------------------------------------------------------------------------
# report plumbing
# ---------------------------------------------------------------------------

class Report:
    """Accumulates named checks and serializes to flat JSON."""

    def __init__(self, command, args, seed=None):
        self.doc = {
            "command": command,
            "args": {k: v for k, v in sorted(vars(args).items())
                     if k != "func"},
            "seed": seed,
            "tolerances": dict(TOLERANCES),
            "checks": [],
        }
        self._t0 = time.time()

    def add(self, name, passed, value=None, bound=None, detail=None,
            replay=None):
        entry = {"name": name, "passed": bool(passed)}
        if value is not None:
            entry["value"] = value
        if bound is not None:
            entry["bound"] = bound
        if value is not None and bound is not None and np.isscalar(value):
            try:
                entry["slack"] = float(bound) - float(value)
            except (TypeError, ValueError):
                pass
        if detail:
            entry["detail"] = detail
        if replay:
            entry["replay"] = replay
        self.doc["checks"].append(entry)
        return bool(passed)

    def finish(self, exit_code, out=None, extra=None):
        self.doc["timing_s"] = round(time.time() - self._t0, 3)
        self.doc["result"] = "pass" if exit_code == 0 else "fail"
        self.doc["exit_code"] = exit_code
        if extra:
            self.doc.update(extra)
        text = json.dumps(self.doc, indent=2, sort_keys=True, default=_json_default)
        if out:
            with open(out, "w", encoding="utf-8") as fh:
                fh.write(text + "\n")
        print(text)
        n_fail = sum(not c["passed"] for c in self.doc["checks"])
        print(f"[{self.doc['command']}] {len(self.doc['checks'])} checks, "
              f"{n_fail} failed, exit {exit_code}", file=sys.stderr)
        return exit_code


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON-serializable: {type(obj)}")


def _serialize_h(h):
    return {
        "points": h.points.tolist(),
        "vectors_re": h.vectors.real.tolist(),
        "vectors_im": h.vectors.imag.tolist(),
    }


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------

def _operator_norm(X, ctx):
    if ctx is None or ctx.is_identity:
        return np.linalg.norm(X, 2)
    return np.linalg.norm(ctx.Mhalf @ X @ ctx.Minvhalf, 2)


def run_analyze(spec: OperatorSpec, theta, beta, report: Report,
                seed=0):
    """All hypothesis checks; returns (ok, beta, theta)."""
    use_metric = spec.metric is not None
    ctx = MetricContext.for_spec(spec)
    metric_arg = spec.metric if use_metric else None
    if beta is None:
        try:
            beta = find_beta(spec, theta, metric=metric_arg)
            report.add("beta_search", True, value=beta)
        except HypothesisError as exc:
            report.add("beta_search", False, detail=str(exc))
            return False, None, theta
    nr = check_numerical_range_in_sector(
        spec, Sector(vertex=max(beta, 0.0), semi_angle=theta),
        metric=metric_arg)
    ok = report.add("numerical_range_in_sector", nr.inside, value=nr.margin,
                    bound=0.0)
    sect = check_sectorial(spec, beta, theta)
    ok &= report.add("spectrum_in_sector", sect.spectrum_in_sector,
                     detail="; ".join(sect.notes) or None)
    report.add("resolvent_sup_estimates", True,
               value={str(round(p, 6)): v["estimate"]
                      for p, v in sect.resolvent_sup.items()},
               detail="sampled estimate, not a certified sup")
    plain_margin = dissipative_margin(spec, beta, use_metric=False)
    if use_metric:
        metric_margin = dissipative_margin(spec, beta, use_metric=True)
        ok &= report.add("metric_dissipative_margin", metric_margin <= 1e-10,
                         value=metric_margin, bound=0.0)
        report.add("plain_dissipative_margin_informational", True,
                   value=plain_margin)
    else:
        ok &= report.add("plain_dissipative_margin", plain_margin <= 1e-10,
                         value=plain_margin, bound=0.0)
    # growth bound |T(t)| <= e^{beta t} in the active norm
    worst_growth = -np.inf
    growth_ctx = ctx if use_metric else None
    for t in np.arange(0.1, 3.01, 0.29):
        ratio = _operator_norm(semigroup(spec, t), growth_ctx) / np.exp(beta * t)
        worst_growth = max(worst_growth, ratio - 1.0)
    ok &= report.add("growth_bound", worst_growth <= GROWTH_TOL,
                     value=worst_growth, bound=GROWTH_TOL)
    # derivative identities d^n/dt^n T = A^n T
    for order in (1, 2):
        rep = check_derivative_identity(spec, t=0.7, order=order)
        good = (rep.residual_fine <= DERIV_TOL
                and (rep.residual_coarse <= 1e-12
                     or 1.8 <= rep.convergence_order <= 2.2))
        ok &= report.add(f"derivative_identity_order_{order}", good,
                         value=rep.residual_fine, bound=DERIV_TOL,
                         detail=f"richardson_slope={rep.convergence_order:.3f}")
    # sampled holomorphic contractivity of e^{-beta z} T(z) in the sector
    if ok:
        rng = np.random.default_rng(seed)
        B = spec.A - beta * np.eye(spec.dim)
        half = np.pi / 2 - theta - 0.05
        worst = -np.inf
        if half > 0:
            for _ in range(100):
                r = rng.uniform(0.05, 2.0)
                psi = rng.uniform(-half, half)
                z = r * np.exp(1j * psi)
                Tz = _holo_exp(B, z)
                worst = max(worst, _operator_norm(Tz, growth_ctx) - 1.0)
            ok &= report.add("holomorphic_contractivity", worst <= GROWTH_TOL,
                             value=worst, bound=GROWTH_TOL)
    return ok, beta, theta


def _holo_exp(B, z):
    from .numerics import expm
    return expm(z * B)


def cmd_analyze(args):
    report = Report("analyze", args)
    try:
        spec, mbeta, mtheta = load_model(args.model)
    except (OSError, ValueError, ArgumentError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    theta = args.theta if args.theta is not None else \
        (mtheta if mtheta is not None else DEFAULT_THETA)
    beta = args.beta if args.beta is not None else mbeta
    ok, beta, theta = run_analyze(spec, theta, beta, report)
    extra = {"beta": beta, "theta": theta, "dim": spec.dim,
             "has_metric": spec.metric is not None,
             "holomorphy_semi_angle": np.pi / 2 - theta}
    return report.finish(0 if ok else 2, out=args.out, extra=extra)


# ---------------------------------------------------------------------------
# certify
# ---------------------------------------------------------------------------

def _draw_support(rng, max_points, span, dim):
    for _ in range(100):
        npts = int(rng.integers(1, max_points + 1))
        pts = np.sort(rng.uniform(-span, span, size=npts))
        if len(pts) < 2 or np.diff(pts).min() > MIN_POINT_SPACING:
            break
    vecs = rng.normal(size=(npts, dim)) + 1j * rng.normal(size=(npts, dim))
    return finite_support_function(pts, vecs)


def cmd_certify(args):
    report = Report("certify", args, seed=args.seed)
    try:
        spec, mbeta, mtheta = load_model(args.model)
    except (OSError, ValueError, ArgumentError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    theta = args.theta if args.theta is not None else \
        (mtheta if mtheta is not None else DEFAULT_THETA)
    beta = args.beta if args.beta is not None else mbeta
    ok, beta, theta = run_analyze(spec, theta, beta, report)
    if not ok and not args.force:
        return report.finish(2, out=args.out)
    ctx = MetricContext.for_spec(spec)
    decomp = polar_parts(build_H(spec, ctx), beta, ctx)
    quad = QuadratureSpec()
    streams = np.random.SeedSequence(args.seed).spawn(max(args.trials, 1))
    maj_slacks, ratio_devs, trans_gaps, route_gaps = [], [], [], []
    for k in range(args.trials):
        rng = np.random.default_rng(streams[k])
        h = _draw_support(rng, args.max_points, args.span, spec.dim)
        replay = {"h": _serialize_h(h), "trial": k}
        maj = check_majorization(spec, decomp, h, quad, ctx=ctx)
        maj_slacks.append(maj.slack)
        if not maj.passed:
            report.add(f"majorization_trial_{k}", False, value=maj.slack,
                       replay=replay)
        sf = s_f(spec, h, quad, decomp=decomp, ctx=ctx)
        sk = s_k(spec, decomp, h, quad, ctx=ctx)
        gap = abs(sf.double_sum - sf.v_integral) + abs(sk.double_sum
                                                       - sk.v_integral)
        scale = max(1.0, abs(sf.value), abs(sk.value))
        route_gaps.append(gap / scale)
        if not (sf.routes_agree and sk.routes_agree):
            report.add(f"route_agreement_trial_{k}", False, value=gap / scale,
                       replay=replay)
        if sk.value > 1e-9:
            rep = check_condition_iii(spec, decomp, h, quad, ctx=ctx)
            ratio_devs.append(rep.max_pairwise_deviation)
            if rep.max_pairwise_deviation > TOLERANCES["condition_iii_rel"]:
                report.add(f"condition_iii_trial_{k}", False,
                           value=rep.max_pairwise_deviation,
                           bound=TOLERANCES["condition_iii_rel"],
                           detail=f"ratio={rep.ratio:.9f}", replay=replay)
        xi = float(rng.uniform(-1.0, 1.0))
        tr = check_translation_bound(spec, decomp, h, xi, beta, quad, ctx=ctx)
        trans_gaps.append((tr.value_at_xi - tr.bound)
                          / max(1.0, abs(tr.bound)))
        if not tr.passed:
            report.add(f"translation_trial_{k}", False, value=tr.value_at_xi,
                       bound=tr.bound, replay={**replay, "xi": xi})
    def summary(vals):
        if not vals:
            return None
        arr = np.array(vals)
        return {"min": float(arr.min()), "max": float(arr.max()),
                "mean": float(arr.mean()), "count": len(arr)}

    report.add("majorization_suite", not any(s < -1e-9 for s in maj_slacks),
               value=summary(maj_slacks))
    report.add("route_agreement_suite",
               all(g <= TOLERANCES["route_agreement_rel"] for g in route_gaps),
               value=summary(route_gaps))
    report.add("condition_iii_suite",
               all(d <= TOLERANCES["condition_iii_rel"] for d in ratio_devs),
               value=summary(ratio_devs))
    report.add("translation_suite",
               all(g <= TOLERANCES["translation_rel"] for g in trans_gaps),
               value=summary(trans_gaps))
    hard_fail = any(not c["passed"] for c in report.doc["checks"])
    return report.finish(3 if hard_fail else 0, out=args.out,
                         extra={"beta": beta, "theta": theta,
                                "trials": args.trials})


# ---------------------------------------------------------------------------
# dilate
# ---------------------------------------------------------------------------

def cmd_dilate(args):
    report = Report("dilate", args)
    try:
        spec, mbeta, mtheta = load_model(args.model)
    except (OSError, ValueError, ArgumentError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    theta = mtheta if mtheta is not None else DEFAULT_THETA
    ok, beta, theta = run_analyze(spec, theta, mbeta, report)
    if not ok and not args.force:
        return report.finish(2, out=args.out)
    try:
        if spec.metric is not None:
            section, dil = dilate_with_metric(spec, args.delta, args.m,
                                              args.cutoff, beta=beta)
            gate_error = max(dil.max_compression_error,
                             dil.max_compression_error_similarity)
        else:
            section, dil = run_dilation(spec, args.delta, args.m, args.cutoff)
            gate_error = dil.max_compression_error
    except (RegularityError, ArgumentError) as exc:
        report.add("section_build", False, detail=str(exc))
        return report.finish(4, out=args.out)
    report.add("section_build", True,
               value={"signature": list(dil.signature),
                      "spectral_gap": list(dil.spectral_gap)})
    ok_d = report.add("compression", gate_error <= TOLERANCES["compression"],
                      value=gate_error, bound=TOLERANCES["compression"],
                      detail={str(j): e for j, e in
                              sorted(dil.compression_errors.items())})
    ok_d &= report.add("shift_isometry", dil.shift_isometry_defect <= 1e-10,
                       value=dil.shift_isometry_defect, bound=1e-10)
    ok_d &= report.add("base_embedding_isometry",
                       dil.iota_isometry_error <= 1e-9,
                       value=dil.iota_isometry_error, bound=1e-9)
    ok_d &= report.add("gram_consistency",
                       dil.gram_consistency_error <= 1e-9,
                       value=dil.gram_consistency_error, bound=1e-9)
    if dil.metric_path and dil.max_compression_error_plain is not None:
        report.add("plain_compression_informational", True,
                   value=dil.max_compression_error_plain,
                   detail="; ".join(dil.notes) or None)
        report.add("sandwich", dil.sandwich["passed"], value=dil.sandwich)
    if args.trace:
        _write_trace(args.trace, spec, args)
        report.add("trace_written", True, value=args.trace)
    extra = {"delta": args.delta, "m": args.m, "cutoff": args.cutoff,
             "signature": list(dil.signature),
             "signature_trace": dil.signature_trace}
    return report.finish(0 if ok_d else 4, out=args.out, extra=extra)


def _write_trace(path, spec, args):
    rows = []
    for m in range(args.m + 1):
        _, dil = run_dilation(spec, args.delta, m, args.cutoff, trials=2)
        n_plus, n_minus, n_zero = dil.signature
        rows.append([m, n_plus, n_minus, n_zero, dil.max_compression_error])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["m", "n_plus", "n_minus", "n_zero",
                         "max_compression_error"])
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v
                             for v in row])


# ---------------------------------------------------------------------------
# gen
# ---------------------------------------------------------------------------

def cmd_gen(args):
    if not 0 < args.theta < np.pi / 2:
        print("error: theta must lie in (0, pi/2)", file=sys.stderr)
        return 1
    try:
        spec = generate_instance(args.dim, args.theta, args.beta,
                                 with_metric=args.metric, seed=args.seed)
        save_model(args.out, spec, beta=args.beta, theta=args.theta)
    except (OSError, ArgumentError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(json.dumps({"command": "gen", "out": args.out, "dim": args.dim,
                      "theta": args.theta, "beta": args.beta,
                      "metric": args.metric, "seed": args.seed}))
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(
        prog="kreindil",
        description="Construct and certify indefinite-metric unitary "
                    "dilations of matrix semigroups.")
    sub = p.add_subparsers(dest="cmd", required=True)

    pa = sub.add_parser("analyze", help="hypothesis checks for a model")
    pa.add_argument("--model", required=True)
    pa.add_argument("--theta", type=float, default=None)
    pa.add_argument("--beta", type=float, default=None)
    pa.add_argument("--out", default=None)
    pa.set_defaults(func=cmd_analyze)

    pc = sub.add_parser("certify", help="randomized kernel-hypothesis suite")
    pc.add_argument("--model", required=True)
    pc.add_argument("--trials", type=int, required=True)
    pc.add_argument("--seed", type=int, required=True)
    pc.add_argument("--max-points", dest="max_points", type=int, default=5)
    pc.add_argument("--span", type=float, default=1.5)
    pc.add_argument("--theta", type=float, default=None)
    pc.add_argument("--beta", type=float, default=None)
    pc.add_argument("--force", action="store_true")
    pc.add_argument("--out", default=None)
    pc.set_defaults(func=cmd_certify)

    pd = sub.add_parser("dilate", help="finite-section dilation build")
    pd.add_argument("--model", required=True)
    pd.add_argument("--delta", type=float, required=True)
    pd.add_argument("--m", type=int, required=True)
    pd.add_argument("--cutoff", type=float, default=1e-10)
    pd.add_argument("--trace", default=None)
    pd.add_argument("--force", action="store_true")
    pd.add_argument("--out", default=None)
    pd.set_defaults(func=cmd_dilate)

    pg = sub.add_parser("gen", help="generate a model satisfying the "
                                    "dilation hypotheses")
    pg.add_argument("--dim", type=int, required=True)
    pg.add_argument("--theta", type=float, required=True)
    pg.add_argument("--beta", type=float, required=True)
    pg.add_argument("--metric", action="store_true")
    pg.add_argument("--seed", type=int, required=True)
    pg.add_argument("--out", required=True)
    pg.set_defaults(func=cmd_gen)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
