"""Command-line entry point ``bhlab``.

Exit codes:

* 0: success (for ``certify`` and ``kernel-table``: the check passed)
* 1: configuration error (bad file, missing key, invalid parameter)
* 2: runtime error (quadrature did not converge, scheme diverged)
* 3: ``certify`` or ``kernel-table`` ran to completion but the check failed

A simulation that stops on the slope criterion is a successful run and
exits 0.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .errors import BHLabError, ConfigurationError

log = logging.getLogger("bhlab")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_FAILED = 0, 1, 2, 3


def _outdir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(args) -> int:
    from . import io, solver

    cfg = io.load_config(args.config)
    out = _outdir(args.out or cfg.output_dir)
    with io.CsvSink(out / "records.csv") as sink:
        report = solver.run(cfg.sim, sink)
    io.write_summary(out, report)
    if cfg.final_field:
        io.write_field(out / "final_field.txt", report.final_state.u)
    if cfg.plot:
        io.plot_run(out, report, cfg.sim.grid)
    print(report.summary(), end="")
    if report.stop_reason == "scheme_divergence":
        return EXIT_RUNTIME
    return EXIT_OK


# ---------------------------------------------------------------------------
# certify


def _finish(out, name, reports) -> int:
    from . import io

    ok = all(r.passed if hasattr(r, "passed") else r.satisfied for r in reports)
    lines = []
    for i, r in enumerate(reports):
        if len(reports) > 1:
            lines.append(f"[field {i}]")
        lines += r.lines()
    worst = min((r.worst_margin for r in reports if hasattr(r, "worst_margin")), default=None)
    head = [f"check = {name}", f"fields = {len(reports)}", f"overall = {'PASS' if ok else 'FAIL'}"]
    if worst is not None:
        head.append(f"overall_worst_margin = {worst:.17g}")
    text = "\n".join(head + [""] + lines) + "\n"
    (out / "cert_report.txt").write_text(text)
    print("\n".join(head))
    if len(reports) == 1:
        print("\n".join(reports[0].lines()))
    return EXIT_OK if ok else EXIT_FAILED


def cmd_certify(args) -> int:
    from . import inequalities as iq
    from . import io
    from .solver import RationalFamily
    from .spectral import GridSpec, RealField

    out = _outdir(args.out)
    which = args.which
    if which == "threshold":
        if args.a is None or args.b is None:
            raise ConfigurationError("threshold needs --a and --b")
        rep = iq.threshold_check(args.a, args.b, args.variant)
        return _finish(out, "threshold", [rep])

    rng = np.random.default_rng(args.seed)
    reports = []
    if which == "lemma22":
        fields = []
        if args.field:
            fields.append(io.read_field(args.field))
        else:
            grid = GridSpec(args.n, args.L)
            fields = [iq.random_bandlimited_field(rng, grid, args.kmax) for _ in range(args.n_fields)]
            if args.rational:
                v = RationalFamily(1.0, 1.0)(grid.nodes, grid.domain_length)
                fields.append(RealField(grid, v - v.mean()))
        for i, u in enumerate(fields):
            r = iq.lemma22_certify(u, args.tol)
            if not r.passed:
                io.write_field(out / f"failing_field_{i}.txt", u)
            reports.append(r)
        return _finish(out, "lemma22", reports)

    if args.alpha is None or args.p is None:
        raise ConfigurationError(f"{which} needs --alpha and --p")
    for i in range(args.n_fields):
        if args.dim == 1:
            f = iq.random_gaussian_sum(rng)
            sample = iq.FieldSample1D(GridSpec(args.n, args.L), f)
        else:
            amp = float(rng.uniform(0.5, 2.0))
            w = float(rng.uniform(0.4, 1.2))
            sample = iq.FieldSample2D(min(args.n, 512), args.L, iq.RadialBump2D((amp,), ((0.0, 0.0),), (w,)))
        if which == "appendix":
            r = iq.appendix_certify(sample, args.alpha, args.p, args.tol, constant=args.constant)
        else:
            r = iq.gns_certify(sample, args.alpha, args.p, args.tol)
        reports.append(r)
    return _finish(out, which, reports)


# ---------------------------------------------------------------------------
# kernel table


def cmd_kernel_table(args) -> int:
    from .kernels import WeightParams, kernel_table

    wp = WeightParams(args.q, args.p, args.alpha)
    if not 0 < args.x_min < args.x_max:
        raise ConfigurationError("need 0 < x_min < x_max")
    out = _outdir(args.out)
    tab = kernel_table(wp, args.x_min, args.x_max, args.per_decade)
    tab.to_csv(out / "kernel.csv")
    a, q = wp.alpha, wp.q
    lines = [f"q = {q:.17g}", f"p = {wp.p:.17g}", f"alpha = {a:.17g}"]
    ok = True
    for label, fit, target in (("small_x", tab.small_fit, -(q + a)), ("large_x", tab.large_fit, -(2 + a))):
        if fit is None:
            lines.append(f"{label}_fit = none (range not covered)")
            continue
        lo, hi = fit.ci95()
        good = abs(fit.exponent - target) <= 0.05
        ok &= good
        lines += [f"{label}_exponent = {fit.exponent:.17g}", f"{label}_ci95 = {lo:.17g}, {hi:.17g}",
                  f"{label}_target = {target:.17g}", f"{label}_verdict = {'PASS' if good else 'FAIL'}"]
    for k, v in tab.constants.items():
        lines.append(f"{k} = {v:.17g}")
    lines.append(f"max_abs_I = {float(np.max(np.abs(tab.values))):.17g}")
    text = "\n".join(lines) + "\n"
    (out / "kernel_fit.txt").write_text(text)
    print(text, end="")
    return EXIT_OK if ok else EXIT_FAILED


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bhlab", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run the solver from an INI config")
    s.add_argument("config")
    s.add_argument("--out", help="override [output] directory")
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("certify", help="numerical certification of an inequality")
    c.add_argument("which", choices=["lemma22", "appendix", "gns", "threshold"])
    c.add_argument("--out", default="cert_out")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--tol", type=float, default=1e-6)
    c.add_argument("--n-fields", type=int, default=100)
    c.add_argument("--n", type=int, default=512, help="grid points per direction")
    c.add_argument("--L", type=float, default=20.0, help="period / box side")
    c.add_argument("--kmax", type=int, default=8)
    c.add_argument("--rational", action="store_true", help="lemma22: also check the a = b = 1 rational field")
    c.add_argument("--field", help="lemma22: certify a single field file instead of random fields")
    c.add_argument("--a", type=float)
    c.add_argument("--b", type=float)
    c.add_argument("--variant", choices=["strict_hilbert", "strict_amplitude"], default="strict_hilbert")
    c.add_argument("--alpha", type=float)
    c.add_argument("--p", type=float)
    c.add_argument("--dim", type=int, choices=[1, 2], default=1)
    c.add_argument("--constant", type=float, help="appendix: override C(alpha, p, n)")
    c.set_defaults(func=cmd_certify)

    k = sub.add_parser("kernel-table", help="tabulate the I kernel and fit its exponents")
    k.add_argument("--p", type=float, required=True)
    k.add_argument("--q", type=float, required=True)
    k.add_argument("--alpha", type=float, required=True)
    k.add_argument("--x-min", type=float, default=1e-3)
    k.add_argument("--x-max", type=float, default=1e3)
    k.add_argument("--per-decade", type=int, default=10)
    k.add_argument("--out", default="kernel_out")
    k.set_defaults(func=cmd_kernel_table)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:  # argparse usage errors are configuration errors
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BHLabError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except FloatingPointError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
