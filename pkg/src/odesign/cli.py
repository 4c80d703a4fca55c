"""Command-line front end.

Every output starts with ``# key: value`` manifest lines (command, seed,
model, version, timestamp) followed by CSV or plain text.  The timestamp is
taken from SOURCE_DATE_EPOCH when set, so reruns can be byte-identical.

Exit codes: 0 success, 2 input error, 3 request exceeds a dimension cap,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import shlex
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import __version__, exact, expansion, formats, sampler
from .divided_differences import dd_exp_recursive, dd_exp_signed_log, dd_exp_taylor
from .errors import CapacityError
from .pmr import cycles, decompose, is_stoquastic, recompose, stoquasticize

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_NUMERIC = 0, 2, 3, 4
MAX_DENSE_DIM = 3**8
SWEEP_PARAMS = {"phi": "PHI", "epsilon": "EPS", "gamma": "GAMMA", "beta": None}
ESTIMATORS = ("exact", "series", "sample")


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    start: float
    stop: float
    points: int
    fixed: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.parameter not in SWEEP_PARAMS:
            raise ValueError(f"unknown sweep parameter {self.parameter!r}")
        if self.points < 2:
            raise ValueError("a sweep needs at least 2 points")
        if not self.start < self.stop:
            raise ValueError("sweep range needs start < stop")

    def grid(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.points)


@dataclass(frozen=True)
class RunManifest:
    command: str
    seed: int | None
    model: str
    version: str = __version__
    timestamp: str = ""

    @classmethod
    def for_run(cls, argv: Sequence[str], seed, model: str) -> "RunManifest":
        epoch = os.environ.get("SOURCE_DATE_EPOCH")
        t = time.gmtime(int(epoch)) if epoch else time.gmtime()
        return cls(
            "odesign " + shlex.join(argv),
            seed,
            model,
            __version__,
            time.strftime("%Y-%m-%dT%H:%M:%SZ", t),
        )

    def header(self) -> str:
        lines = [
            f"# command: {self.command}",
            f"# seed: {'' if self.seed is None else self.seed}",
            f"# model: {self.model}",
            f"# version: {self.version}",
            f"# timestamp: {self.timestamp}",
        ]
        return "\n".join(lines) + "\n"


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _csv(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def _threads(args) -> int:
    env = os.environ.get("ODESIGN_THREADS")
    n = int(env) if env else args.threads
    return max(1, n)


def _model(spec: str):
    h = formats.parse_model_spec(spec)
    if h.dim > MAX_DENSE_DIM:
        raise CapacityError(f"dimension {h.dim} exceeds the cap of {MAX_DENSE_DIM}")
    return h


def _series(h, beta, args):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res = expansion.series_partition(h, beta, args.qmax, args.tail_tol)
    return res, [str(w.message) for w in caught]


# -- subcommands -------------------------------------------------------------


def cmd_dd_eval(args) -> tuple[str, str]:
    xs = formats.parse_real_list(args.inputs)
    if args.method == "sum":
        sign, logmag = dd_exp_signed_log(xs, args.beta)
        value = sign * math.exp(logmag) if sign else 0.0
    elif args.method == "recursion":
        value = dd_exp_recursive(xs, args.beta)
        logmag = math.log(abs(value)) if value else -math.inf
    else:
        value = dd_exp_taylor(xs, args.beta)
        logmag = math.log(abs(value)) if value else -math.inf
    return f"{value!r} {logmag!r}\n", ""


def cmd_decompose(args) -> tuple[str, str]:
    if args.model.startswith("file:"):
        m = formats.read_dense_matrix(args.model[5:])
        h = decompose(m, args.tol)
    else:
        h = _model(args.model)
        m = recompose(h)
    resid = float(np.max(np.abs(recompose(h) - m)))
    out = [f"dimension: {h.dim}", f"M = {h.n_terms}", "D0: " + " ".join(repr(float(e)) for e in h.d0)]
    for j, t in enumerate(h.terms):
        cyc = "".join("(" + " ".join(map(str, c)) + ")" for c in cycles(t.perm))
        diag = " ".join(_complex(x) for x in t.diag)
        out.append(f"term {j}: permutation {cyc} diagonal [{diag}]")
    out.append(f"round-trip residual: {resid!r}")
    return "\n".join(out) + "\n", args.model


def _complex(z: complex) -> str:
    z = complex(z)
    return f"{z.real!r}{'+' if z.imag >= 0 else '-'}{abs(z.imag)!r}j"


def cmd_exact(args) -> tuple[str, str]:
    h = _model(args.model)
    m = recompose(h)
    z = exact.trace_exp(m, args.beta)
    zs = exact.trace_exp(recompose(stoquasticize(h)), args.beta)
    sign = exact.exact_sign(h, args.beta)
    gs = exact.ground_state_sign_class(m).value
    return _csv(["model", "beta", "Z", "Z_stoq", "sign", "gs_class"], [[args.model, args.beta, z, zs, sign, gs]]), args.model


def cmd_spectrum(args) -> tuple[str, str]:
    h = _model(args.model)
    w = exact.diagonalize(recompose(h), args.tol).eigenvalues
    return "".join(f"{float(x)!r}\n" for x in w), args.model


def cmd_series_sign(args) -> tuple[str, str]:
    h = _model(args.model)
    res, notes = _series(h, args.beta, args)
    if res.abs_sum == 0:
        raise ZeroDivisionError("all weights vanish; the average sign is undefined")
    for n in notes:
        print(f"warning: {n}", file=sys.stderr)
    row = [args.model, args.beta, res.achieved_q, res.z, res.abs_sum, res.z / res.abs_sum]
    return _csv(["model", "beta", "qmax_achieved", "Z", "abs_sum", "sign"], [row]), args.model


def cmd_enumerate(args) -> tuple[str, str]:
    h = _model(args.model)
    rows = []
    for c in expansion.enumerate_closed(h, args.qmax):
        w = expansion.weight(h, c, args.beta)
        rows.append([c.z0, " ".join(map(str, c.sequence)), c.q, w.real_weight, w.sign])
    return _csv(["z0", "sequence", "q", "weight", "sign"], rows), args.model


def _sampler_params(args, beta: float) -> sampler.SamplerParams:
    return sampler.SamplerParams(
        beta=beta,
        n_samples=args.samples,
        n_chains=args.chains,
        burn_in=args.burn_in,
        seed=args.seed,
        q_cap=args.qcap,
    )


def cmd_sample(args) -> tuple[str, str]:
    h = _model(args.model)
    params = _sampler_params(args, args.beta)
    obs = {}
    if args.observable:
        kind, _, path = args.observable.partition(":")
        if kind != "diag" or not path:
            raise ValueError("--observable expects diag:<file>")
        obs["A"] = formats.read_diagonal(path, h.dim)
    trace_file = open(args.trace, "w", newline="") if args.trace else None
    try:
        on_sample = None
        if trace_file is not None:
            tw = csv.writer(trace_file, lineterminator="\n")
            tw.writerow(["chain", "sweep", "q", "sign", "log_abs_weight"])

            def on_sample(chain, step, q, s, logw):
                tw.writerow([chain, step, q, s, repr(logw)])

        with warnings.catch_warnings(record=True):
            warnings.simplefilter("always")
            res = sampler.run(h, params, obs, workers=_threads(args), on_sample=on_sample)
    finally:
        if trace_file is not None:
            trace_file.close()
    for n in res.warnings:
        print(f"warning: {n}", file=sys.stderr)
    header = ["model", "beta", "sign_mean", "sign_stderr", "cap_hits", "chains"]
    row = [args.model, args.beta, res.sign.mean, res.sign.std_error, res.cap_hits, params.n_chains]
    if obs:
        header += ["observable_mean", "observable_stderr"]
        row += [res.observables["A"].mean, res.observables["A"].std_error]
    return _csv(header, [row]), args.model


def _sweep_point(task):
    model, beta, estimator, value, opts = task
    h = _model(model)
    if estimator == "exact":
        return [value, beta, estimator, exact.exact_sign(h, beta), None]
    if estimator == "series":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return [value, beta, estimator, expansion.series_sign(h, beta, opts["qmax"], opts["tail_tol"]), None]
    params = sampler.SamplerParams(
        beta=beta,
        n_samples=opts["samples"],
        n_chains=opts["chains"],
        burn_in=opts["burn_in"],
        seed=opts["seed"],
        q_cap=opts["qcap"],
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        est = sampler.run(h, params).sign
    return [value, beta, estimator, est.mean, est.std_error]


def cmd_sweep(args) -> tuple[str, str]:
    start, stop, points = _parse_range(args.range)
    spec = SweepSpec(args.param, start, stop, points)
    estimators = [e.strip() for e in args.estimators.split(",") if e.strip()]
    for e in estimators:
        if e not in ESTIMATORS:
            raise ValueError(f"unknown estimator {e!r}")
    token = SWEEP_PARAMS[spec.parameter]
    if token is not None and token not in args.model:
        raise ValueError(f"model spec must contain the placeholder {token} for --param {spec.parameter}")
    grid = [float(v) for v in spec.grid()]
    if spec.parameter == "beta":
        points = [(v, v) for v in grid]
    else:
        if not args.beta:
            raise ValueError("--beta is required unless sweeping beta")
        # beta-major: one full parameter curve per beta
        points = [(v, b) for b in formats.parse_real_list(args.beta) for v in grid]
    opts = {
        "qmax": args.qmax,
        "tail_tol": args.tail_tol,
        "samples": args.samples,
        "chains": args.chains,
        "burn_in": args.burn_in,
        "seed": args.seed,
        "qcap": args.qcap,
    }
    tasks = []
    for v, beta in points:
        model = args.model if token is None else args.model.replace(token, repr(v))
        for e in estimators:
            tasks.append((model, beta, e, v, opts))
    _model(tasks[0][0])
    workers = _threads(args)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_point, tasks))
    else:
        rows = [_sweep_point(t) for t in tasks]
    return _csv(["parameter_value", "beta", "estimator", "sign", "stderr"], rows), args.model


def _parse_range(text: str) -> tuple[float, float, int]:
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError("--range expects start:stop:points")
    try:
        points = int(parts[2])
    except ValueError:
        raise ValueError("--range point count must be an integer") from None
    return formats.parse_angle(parts[0]), formats.parse_angle(parts[1]), points


def cmd_report(args) -> tuple[str, str]:
    h = _model(args.model)
    m = recompose(h)
    beta = args.beta
    notes: list[str] = []
    lines = [f"model: {args.model}", f"beta: {beta!r}", f"dimension: {h.dim}", f"M (off-diagonal terms): {h.n_terms}"]
    for j, t in enumerate(h.terms):
        nz = int(np.count_nonzero(t.diag))
        lines.append(f"  term {j}: cycles {len(cycles(t.perm))}, non-zero entries {nz}")
    lines.append("stoquastic" if is_stoquastic(m, args.tol) else "non-stoquastic")
    lines.append(f"exact sign (trace ratio): {exact.exact_sign(h, beta)!r}")
    res, sn = _series(h, beta, args)
    notes += sn
    if res.abs_sum > 0:
        lines.append(f"series sign: {res.z / res.abs_sum!r} (q reached {res.achieved_q})")
    else:
        notes.append("all series weights vanish; series sign undefined")
    if args.samples > 0:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            sres = sampler.run(h, _sampler_params(args, beta), workers=_threads(args))
        lines.append(f"sampled sign: {sres.sign.mean!r} +/- {sres.sign.std_error!r}")
        notes += sres.warnings
    lines.append(f"ground-state sign class: {exact.ground_state_sign_class(m).value}")
    lines.append("warnings: " + ("; ".join(notes) if notes else "none"))
    return "\n".join(lines) + "\n", args.model


# -- argument parsing --------------------------------------------------------


def _global_flags(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--output", default=d(None), help="output path (default stdout)")
    p.add_argument("--tol", type=float, default=d(1e-12), help="Hermiticity/stoquasticity tolerance")
    p.add_argument("--seed", type=int, default=d(0), help="sampler seed")
    p.add_argument("--threads", type=int, default=d(1), help="worker processes (ODESIGN_THREADS overrides)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="odesign", description="Average-sign diagnostics via the off-diagonal series.")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        _global_flags(p, suppress=True)
        p.set_defaults(func=func)
        return p

    def series_flags(p):
        p.add_argument("--qmax", type=int, default=expansion.DEFAULT_QMAX)
        p.add_argument("--tail-tol", type=float, default=expansion.DEFAULT_TAIL_TOL)

    def sample_flags(p, samples):
        p.add_argument("--samples", type=int, default=samples)
        p.add_argument("--chains", type=int, default=8)
        p.add_argument("--burn-in", type=int, default=2000)
        p.add_argument("--qcap", type=int, default=30)

    p = add("dd-eval", cmd_dd_eval, "divided difference of exp(-beta x)")
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--inputs", required=True, help="comma-separated x0,x1,...")
    p.add_argument("--method", choices=("sum", "recursion", "taylor"), default="sum")

    p = add("decompose", cmd_decompose, "permutation-matrix form of a model")
    p.add_argument("--model", required=True)

    p = add("exact", cmd_exact, "exact traces and trace-ratio sign")
    p.add_argument("--model", required=True)
    p.add_argument("--beta", type=float, required=True)

    p = add("spectrum", cmd_spectrum, "eigenvalues, one per line")
    p.add_argument("--model", required=True)

    p = add("series-sign", cmd_series_sign, "truncated-series sign")
    p.add_argument("--model", required=True)
    p.add_argument("--beta", type=float, required=True)
    series_flags(p)

    p = add("enumerate", cmd_enumerate, "list closed configurations and weights")
    p.add_argument("--model", required=True)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--qmax", type=int, required=True)

    p = add("sample", cmd_sample, "Monte Carlo estimate of the sign")
    p.add_argument("--model", required=True)
    p.add_argument("--beta", type=float, required=True)
    sample_flags(p, 100_000)
    p.add_argument("--observable", help="diag:<file> with one value per basis state")
    p.add_argument("--trace", help="write per-sample chain trace CSV here")

    p = add("sweep", cmd_sweep, "sign over a parameter grid")
    p.add_argument("--model", required=True, help="spec with PHI/EPS/GAMMA placeholder")
    p.add_argument("--param", choices=tuple(SWEEP_PARAMS), required=True)
    p.add_argument("--range", required=True, help="start:stop:points (inclusive)")
    p.add_argument("--beta", help="comma-separated inverse temperatures")
    p.add_argument("--estimators", default="exact")
    series_flags(p)
    sample_flags(p, 100_000)

    p = add("report", cmd_report, "human-readable summary for one model")
    p.add_argument("--model", required=True)
    p.add_argument("--beta", type=float, required=True)
    series_flags(p)
    sample_flags(p, 20_000)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        body, model = args.func(args)
    except CapacityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, LookupError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    seed = args.seed if args.command in ("sample", "sweep", "report") else None
    manifest = RunManifest.for_run(argv, seed, model)
    if args.output:
        with open(args.output, "w", newline="") as fh:
            fh.write(manifest.header() + body)
    elif args.command == "dd-eval":
        sys.stdout.write(body)
    else:
        sys.stdout.write(manifest.header() + body)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
