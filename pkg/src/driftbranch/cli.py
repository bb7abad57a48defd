"""Command-line entry point.

Subcommands: simulate, threshold, renewal, soluble, validate, compare.
Inputs are JSON (inline or files), outputs are CSV or JSON written atomically;
an existing output file is only replaced with --force. Every result carries
the seed that produced it, and floats are printed with full round-trip
precision so reruns can be compared byte for byte.

Exit codes: 0 success, 1 input error, 2 numerical non-convergence.

JSON schemas
------------
kernel        {"type": "product_gamma", "k": 0, "a": 1.0}
              {"type": "product", "p": <intensity>}
              {"type": "phi_product", "sigma": 4.0}
              {"type": "tabulated", "x": [...], "values": [[...]]}
intensity     {"type": "exponential", "rate": 1.0, "weight": 1.0}
              {"type": "uniform", "lo": 0.0, "hi": 1.0, "weight": 1.0}
              {"type": "gamma", "shape": 2.0, "rate": 1.0, "weight": 1.0}
              {"type": "tabulated", "x": [...], "y": [...]}
init          {"type": "poisson", "intensity": <intensity>}
              {"type": "fixed", "traits": [...]}
weight        {"type": "h_m", "m": 1.0}
              {"type": "h_varsigma_alpha", "varsigma": 0.5, "alpha": 3.0}
              {"type": "power_moment", "l": 2}
              {"type": "phi_sigma_product", "sigma": 3.0}
run spec      {"kernel": ..., "init": ..., "m": 0.5, "T": 20.0,
               "record_grid": [...], "n_max": 1000000, "branching": true,
               "weights": [...], "replicas": 10000, "seed": 42}
"""

from __future__ import annotations

import argparse
import io
import json
import os
import sys
import tempfile

import numpy as np

from . import _svg, renewal, soluble, validate
from .core import InitialStateSpec
from .intensities import IntensityError, intensity_from_json
from .kernels import EnvelopeError, KernelError, kernel_from_json
from .renewal import RenewalError
from .simulator import ModelParams, SimulationError, run_ensemble, run_replica
from .thresholds import build_report, compute_m1, sigma_scan


class _InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # input problems exit with code 1, not argparse's default 2
    def error(self, message):
        self.exit(1, f"{self.prog}: error: {message}\n")


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _parse_json_text(text, what):
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise _InputError(f"malformed JSON in {what}: line {e.lineno} column {e.colno}: {e.msg}")


def _json_arg(value, what):
    """Inline JSON, or @path to read it from a file."""
    if value is None:
        return None
    if value.startswith("@"):
        path = value[1:]
        try:
            with open(path) as f:
                return _parse_json_text(f.read(), path)
        except OSError as e:
            raise _InputError(f"cannot read {path}: {e}")
    return _parse_json_text(value, what)


def _resolve_out(path):
    if path is None:
        return None
    base = os.environ.get("DRIFTBRANCH_OUT")
    if base and not os.path.isabs(path):
        return os.path.join(base, path)
    return path


def _write_atomic(path, text, force):
    path = _resolve_out(path)
    if path is None:
        sys.stdout.write(text)
        return
    if os.path.exists(path) and not force:
        raise _InputError(f"refusing to overwrite {path} (pass --force)")
    d = os.path.dirname(path) or "."
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-driftbranch-")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header_comment, columns, rows):
    buf = io.StringIO()
    if header_comment:
        buf.write(f"# {header_comment}\n")
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue()


def _json_text(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _floats_arg(text, what):
    try:
        vals = [float(v) for v in text.split(",") if v.strip() != ""]
    except ValueError:
        raise _InputError(f"{what} must be a comma-separated list of numbers, got {text!r}")
    if not vals:
        raise _InputError(f"{what} is empty")
    return vals


def _build_run(args):
    spec = {}
    if getattr(args, "spec", None):
        spec = _json_arg("@" + args.spec, "run spec")
    merged = dict(spec)
    if args.kernel is not None:
        merged["kernel"] = _json_arg(args.kernel, "--kernel")
    if args.init is not None:
        merged["init"] = _json_arg(args.init, "--init")
    for flag, key in (("m", "m"), ("T", "T"), ("n_max", "n_max"), ("replicas", "replicas"), ("seed", "seed")):
        v = getattr(args, flag, None)
        if v is not None:
            merged[key] = v
    if getattr(args, "grid", None) is not None:
        merged["record_grid"] = _floats_arg(args.grid, "--grid")
    if getattr(args, "no_branching", False):
        merged["branching"] = False
    if "kernel" not in merged:
        raise _InputError("a kernel is required (flag --kernel or spec file)")
    if "init" not in merged:
        raise _InputError("an initial state is required (flag --init or spec file)")
    params = ModelParams.from_json(merged)
    init = InitialStateSpec.from_json(merged["init"])
    replicas = int(merged.get("replicas", 1000))
    seed = int(merged.get("seed", 0))
    return params, init, replicas, seed


def _cmd_simulate(args):
    params, init, replicas, seed = _build_run(args)
    ens = run_ensemble(params, init, replicas, seed, jobs=args.jobs)
    summ = ens.summary()
    columns = ["time", "mean_N", "se_N"]
    for lab in summ.weight_labels:
        columns += [f"mean_{lab}", f"se_{lab}"]
    columns += ["capped_fraction", "extinct_fraction"]
    rows = []
    for j, t in enumerate(summ.times):
        row = [t, summ.mean_N[j], summ.se_N[j]]
        for wi in range(len(summ.weight_labels)):
            row += [summ.mean_h[wi, j], summ.se_h[wi, j]]
        row += [summ.capped_fraction[j], summ.extinct_fraction[j]]
        rows.append(row)
    if args.format == "json":
        out = {
            "seed": seed,
            "n_replicas": replicas,
            "params": params.to_json(),
            "summary": {
                "times": summ.times.tolist(),
                "mean_N": summ.mean_N.tolist(),
                "se_N": summ.se_N.tolist(),
                "mean_h": summ.mean_h.tolist(),
                "se_h": summ.se_h.tolist(),
                "weight_labels": list(summ.weight_labels),
                "capped_fraction": summ.capped_fraction.tolist(),
                "extinct_fraction": summ.extinct_fraction.tolist(),
            },
        }
        _write_atomic(args.output, _json_text(out), args.force)
    else:
        _write_atomic(args.output, _csv_text(f"seed={seed} replicas={replicas}", columns, rows), args.force)
    if args.emit_svg:
        svg = _svg.line_plot(
            [("mean_N", summ.times.tolist(), summ.mean_N.tolist(), "#1f77b4")],
            xlabel="t",
            ylabel="mean population size",
            title="Monte Carlo mean",
        )
        _write_atomic(args.emit_svg, svg, args.force)
    if args.event_log:
        rng = np.random.default_rng(int(ens.seeds[0]))
        from .core import sample_initial

        tr = run_replica(params, sample_initial(init, rng), int(ens.seeds[0]), collect_events=True)
        ev_rows = [(t, int(c), int(n)) for t, c, n in tr.events]
        text = _csv_text(f"seed={int(ens.seeds[0])} replica=0", ["time", "event", "N_after"], ev_rows)
        _write_atomic(args.event_log, text, args.force)
    return 0


def _cmd_threshold(args):
    kernel = kernel_from_json(_json_arg(args.kernel, "--kernel"))
    if args.scan_sigma:
        rows = sigma_scan(kernel)
        if args.format == "json":
            out = {"scan": [{"sigma": s, "b_star": b, "m1": m1} for s, b, m1 in rows]}
            _write_atomic(args.output, _json_text(out), args.force)
        else:
            _write_atomic(args.output, _csv_text(None, ["sigma", "b_star", "m1"], rows), args.force)
        return 0
    report = build_report(kernel, sigma=args.sigma, target=args.target)
    if args.format == "table":
        _write_atomic(args.output, report.to_table() + "\n", args.force)
    else:
        _write_atomic(args.output, _json_text(report.to_json()), args.force)
    return 0


def _cmd_renewal(args):
    kernel = kernel_from_json(_json_arg(args.kernel, "--kernel"))
    kappa0 = intensity_from_json(_json_arg(args.init, "--init"))
    if args.check:
        sol, err = renewal.solve_checked(kappa0, kernel, args.m, args.T, args.dt)
    else:
        sol = renewal.solve(kappa0, kernel, args.m, args.T, args.dt)
    stride = max(1, int(round((args.out_dt or sol.dt) / sol.dt)))
    rows = list(zip(sol.times[::stride], sol.u[::stride], sol.M[::stride]))
    _write_atomic(args.output, _csv_text(f"m={_fmt(args.m)} dt={_fmt(sol.dt)}", ["t", "u", "M"], rows), args.force)
    if args.emit_svg:
        svg = _svg.line_plot(
            [("M(t)", sol.times.tolist(), sol.M.tolist(), "#1f77b4"),
             ("u(t)", sol.times.tolist(), sol.u.tolist(), "#d62728")],
            xlabel="t",
            ylabel="mean size / boundary flux",
            title="first-moment solution",
        )
        _write_atomic(args.emit_svg, svg, args.force)
    return 0


def _cmd_soluble(args):
    kappa0 = intensity_from_json(_json_arg(args.init, "--init"))
    times = _floats_arg(args.times, "--times")
    if args.moments:
        rows = []
        for t in times:
            for l in (0, 1, 2):
                n_t, n_0, ok = soluble.moment_bound_check(kappa0, t, l)
                rows.append((t, l, n_t, n_0, ok))
        _write_atomic(args.output, _csv_text(None, ["t", "l", "N_l_t", "N_l_0", "pass"], rows), args.force)
        return 0
    xs = _floats_arg(args.xs, "--xs") if args.xs else np.linspace(0, 10, 101).tolist()
    rows = []
    for t in times:
        state = soluble.evolve(kappa0, t)
        vals = state.values_on_grid(xs)
        rows += [(t, x, v) for x, v in zip(xs, vals)]
    _write_atomic(args.output, _csv_text(None, ["t", "x", "kappa"], rows), args.force)
    return 0


def _cmd_validate(args):
    kernel = kernel_from_json(_json_arg(args.kernel, "--kernel"))
    props = {}

    half = kernel.half_mass_quadrature()
    props["normalization"] = {"pass": abs(half - 1.0) < 1e-6, "half_mass": half}

    from .kernels import fit_envelope

    env = None
    try:
        env = fit_envelope(kernel, args.sigma)
        props["envelope"] = {"pass": env.residual <= 0, "b_star": env.b_star, "residual": env.residual}
    except EnvelopeError as e:
        props["envelope"] = {"pass": False, "error": str(e)}

    alphas = [0.25, 0.5, 1.0, 2.0, 4.0]
    ups = [
        abs(validate.upsilon(1.0 - bh, a, kernel))
        for a in alphas
        for bh in [kernel.beta_hat(a)]
        if bh < 1.0  # varsigma = 1 - beta_hat must be positive
    ]
    props["upsilon_zero"] = {"pass": bool(ups) and max(ups) < 1e-12, "max_abs": max(ups, default=None)}

    bh = [kernel.beta_hat(a) for a in [0.0] + alphas]
    props["beta_hat_monotone"] = {"pass": all(x > y for x, y in zip(bh, bh[1:])), "values": bh}

    if env is not None and props["envelope"]["pass"]:
        m1 = compute_m1(args.sigma, env.b_star)
        m = args.m if args.m is not None else m1 + 0.01
        suite = validate.lyapunov_suite(kernel, args.sigma, m, n_configs=args.configs, seed=args.seed)
        props["lyapunov_drift"] = dict(
            {"pass": suite.n_violations == 0, "m": m, "m1": m1}, **suite.to_json()
        )

    out = {"seed": args.seed, "kernel": kernel.to_json(), "sigma": args.sigma,
           "properties": props, "pass": all(p.get("pass", False) for p in props.values())}
    _write_atomic(args.output, _json_text(out), args.force)
    return 0


def _cmd_compare(args):
    params, init, replicas, seed = _build_run(args)
    if init.intensity is None:
        raise _InputError("compare needs a Poisson initial state (the oracle works on intensities)")
    ens = run_ensemble(params, init, replicas, seed, jobs=args.jobs)
    summ = ens.summary()
    sol = renewal.solve(init.intensity, params.kernel, params.m, params.horizon, args.dt)
    _u, m_ref = sol.at(summ.times)
    rows = list(zip(summ.times, summ.mean_N, summ.se_N, m_ref))
    text = _csv_text(f"seed={seed} replicas={replicas}", ["t", "mc_mean", "mc_se", "renewal_M"], rows)
    _write_atomic(args.output, text, args.force)
    if args.emit_svg:
        svg = _svg.line_plot(
            [("mc_mean", summ.times.tolist(), summ.mean_N.tolist(), "#1f77b4"),
             ("renewal_M", summ.times.tolist(), list(m_ref), "#d62728")],
            xlabel="t",
            ylabel="mean population size",
            title="Monte Carlo vs first-moment oracle",
        )
        _write_atomic(args.emit_svg, svg, args.force)
    return 0


def _add_common(p, fmt_choices=("csv", "json"), default_fmt="csv"):
    p.add_argument("-o", "--output", help="output file (default: stdout; DRIFTBRANCH_OUT prefixes relative paths)")
    p.add_argument("--force", action="store_true", help="allow overwriting the output file")
    p.add_argument("--format", choices=fmt_choices, default=default_fmt)


def _add_run_inputs(p):
    p.add_argument("--spec", help="JSON run spec file; flags override its fields")
    p.add_argument("--kernel", help="kernel JSON (inline or @file)")
    p.add_argument("--init", help="initial state JSON (inline or @file)")
    p.add_argument("--m", type=float, help="death rate")
    p.add_argument("--T", type=float, help="time horizon")
    p.add_argument("--grid", help="comma-separated record times")
    p.add_argument("--n-max", dest="n_max", type=int, help="population cap")
    p.add_argument("--no-branching", action="store_true", help="soluble mode: absorb at the edge")
    p.add_argument("--replicas", type=int, help="number of replicas")
    p.add_argument("--seed", type=int, help="base seed (replica i uses the i-th splitmix64 output)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for replicas")
    p.add_argument("--emit-svg", help="also write a line plot SVG to this path")


def build_parser():
    top = _Parser(prog="driftbranch", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a Monte Carlo ensemble and summarize it")
    _add_run_inputs(p)
    _add_common(p)
    p.add_argument("--event-log", help="write the event log of replica 0 to this CSV")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("threshold", help="compute kernel thresholds (m1, alpha, m2, m_star)")
    p.add_argument("--kernel", required=True)
    p.add_argument("--sigma", type=float, default=3.0)
    p.add_argument("--target", type=float, default=0.5, help="target value for beta_hat(alpha)")
    p.add_argument("--scan-sigma", action="store_true", help="scan sigma over a coarse grid")
    _add_common(p, fmt_choices=("table", "json", "csv"), default_fmt="table")
    p.set_defaults(func=_cmd_threshold)

    p = sub.add_parser("renewal", help="solve the first-moment flux equation")
    p.add_argument("--kernel", required=True)
    p.add_argument("--init", required=True, help="initial intensity JSON")
    p.add_argument("--m", type=float, required=True)
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--dt", type=float)
    p.add_argument("--out-dt", type=float, help="thin output rows to this spacing")
    p.add_argument("--check", action="store_true", help="verify convergence by step halving")
    p.add_argument("--emit-svg")
    _add_common(p)
    p.set_defaults(func=_cmd_renewal)

    p = sub.add_parser("soluble", help="closed-form drift-only evolution")
    p.add_argument("--init", required=True, help="initial intensity JSON")
    p.add_argument("--times", required=True, help="comma-separated times")
    p.add_argument("--xs", help="comma-separated trait grid")
    p.add_argument("--moments", action="store_true", help="emit moment-bound checks instead of values")
    _add_common(p)
    p.set_defaults(func=_cmd_soluble)

    p = sub.add_parser("validate", help="run the analytic property suite for a kernel")
    p.add_argument("--kernel", required=True)
    p.add_argument("--sigma", type=float, default=3.0)
    p.add_argument("--target", type=float, default=0.5)
    p.add_argument("--m", type=float, help="death rate for the drift check (default m1 + 0.01)")
    p.add_argument("--configs", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    _add_common(p, fmt_choices=("json",), default_fmt="json")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("compare", help="overlay Monte Carlo means with the renewal oracle")
    _add_run_inputs(p)
    p.add_argument("--dt", type=float, help="renewal grid step")
    _add_common(p)
    p.set_defaults(func=_cmd_compare)

    return top


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _InputError as e:
        print(f"driftbranch: error: {e}", file=sys.stderr)
        return 1
    except (IntensityError, KernelError, SimulationError, ValueError) as e:
        print(f"driftbranch: error: {e}", file=sys.stderr)
        return 1
    except (RenewalError, EnvelopeError) as e:
        print(f"driftbranch: numerical failure: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
