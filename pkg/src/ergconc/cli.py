"""Command line interface: experiment orchestration and file emission.

Subcommands: check, carre, deviations, bounds, figure, simulate.  All
outputs land in an output directory (--out, default from the config);
CSV files carry a fixed header plus a `#` metadata line, and reruns with
the same configuration are byte-identical regardless of --threads.

Exit codes: 0 success, 1 configuration error, 2 runtime divergence,
3 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import BoundParams, bound_curves
from .config import ConfigError, ExperimentConfig, RunSetup
from .model import (
    CarreSourceObservable,
    GeneratorObservable,
    GradPhiNormSquaredObservable,
    SigmaNormSquaredObservable,
    carre_source_gradient,
    estimate_confluence_alpha,
    innovation_moment_report,
    theta_lipschitz_bound,
)
from .montecarlo import RngPolicy, deviation_curve, sample_deviations
from .simulate import (
    GENERATOR_OBSERVABLE,
    DivergenceError,
    Observable,
    estimate_invariant_average,
    run_path,
)
from .steps import partial_sums, validate_theta
from .svgchart import Series, render_line_chart

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DIVERGENCE = 2
EXIT_IO = 3

#: Stream index reserved for diagnostics so it can never collide with a
#: Monte Carlo replicate index.
_DIAGNOSTIC_STREAM = 1 << 62


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on usage errors, which would collide
    # with the divergence exit code; usage errors are config errors here.
    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _fmt(value) -> str:
    if value is None:
        return "nan"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    if value == 0.0:
        value = 0.0  # normalize -0.0
    return repr(value)


def _metadata_line(meta: dict) -> str:
    fields = ",".join(f"{k}={meta[k]}" for k in ("n", "theta", "gamma1", "mc", "seed", "model"))
    return f"# {fields}"


def _write_csv(path: Path, meta: dict, header: list[str], rows: list[list]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [_metadata_line(meta), ",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _bound_params(setup: RunSetup) -> tuple[BoundParams, BoundParams, float]:
    gamma_n = partial_sums(setup.schedule, setup.config.n, (1.0,))[1.0]
    params = BoundParams.from_proxies(setup.proxies, gamma_n)
    params_sigma = BoundParams.from_proxies(setup.proxies, gamma_n, sigma_variant=True)
    return params, params_sigma, gamma_n


def _compute_deviation_rows(setup: RunSetup, threads: int):
    cfg = setup.config
    policy = RngPolicy(master_seed=cfg.seed)
    samples = sample_deviations(
        setup.model,
        setup.pack,
        setup.schedule,
        cfg.n,
        cfg.mc,
        policy,
        innovation_law=setup.innovation,
        initial_law=setup.initial,
        threads=threads,
        replicate_block=cfg.replicate_block,
        step_chunk=cfg.step_chunk,
    )
    return deviation_curve(samples, cfg.a_grid.values(), metadata=setup.metadata())


def cmd_check(setup: RunSetup, args) -> int:
    cfg = setup.config
    verdict = validate_theta(setup.schedule, cfg.regularity_mode())
    estimate = estimate_confluence_alpha(setup.model, setup.proxies.p_confluence)
    if setup.source_lip is not None:
        source_lip = setup.source_lip
        source_origin = "exact"
    else:
        grid = np.linspace(-10.0, 10.0, 200_001).reshape(-1, setup.model.d)
        grads = carre_source_gradient(setup.model, setup.pack, grid)
        source_lip = float(np.sqrt(np.einsum("...i,...i->...", grads, grads)).max())
        source_origin = "grid-estimated"
    alpha_for_bound = setup.proxies.alpha if setup.source_lip is not None else estimate.alpha
    lip_bound = (
        theta_lipschitz_bound(source_lip, alpha_for_bound)
        if alpha_for_bound > 0.0
        else float("nan")
    )
    moments = innovation_moment_report(
        setup.innovation,
        setup.model.r,
        RngPolicy(cfg.seed).stream(_DIAGNOSTIC_STREAM),
        samples=args.moment_samples,
    )
    report = {
        "theta_accepted": verdict.accepted,
        "theta": verdict.theta,
        "theta_lower_bound": verdict.lower_bound,
        "theta_reason": verdict.reason,
        "p_confluence": setup.proxies.p_confluence,
        "alpha_hat": estimate.alpha,
        "alpha_certified": estimate.certified,
        "source_lip": source_lip,
        "source_lip_origin": source_origin,
        "poisson_gradient_bound": lip_bound,
        "innovation": cfg.innovation,
        "innovation_max_abs_z": moments["max_abs_z"],
    }
    if args.json:
        print(json.dumps(report, indent=2, sort_keys=True))
    else:
        print(f"theta check        : {'accept' if verdict.accepted else 'REJECT'} ({verdict.reason})")
        print(f"contraction alpha  : {estimate.alpha!r} at p={setup.proxies.p_confluence}"
              f" ({'certified' if estimate.certified else 'NOT certified'})")
        print(f"source Lipschitz   : {source_lip!r} ({source_origin})")
        print(f"Poisson grad bound : {lip_bound!r}")
        print(f"innovation moments : max |z| = {moments['max_abs_z']:.3f} over "
              f"{moments['samples']} samples ({cfg.innovation})")
    return EXIT_OK


def cmd_carre(setup: RunSetup, args) -> int:
    cfg = setup.config
    observables = [
        Observable("carre", CarreSourceObservable(setup.model, setup.pack)),
        Observable("sigma2", SigmaNormSquaredObservable(setup.model)),
        Observable("gradphi2", GradPhiNormSquaredObservable(setup.pack)),
    ]
    estimates = estimate_invariant_average(
        setup.model,
        setup.schedule,
        observables,
        cfg.n,
        args.paths,
        cfg.seed,
        innovation_law=setup.innovation,
        initial_law=setup.initial,
        step_chunk=cfg.step_chunk,
    )
    labels = {
        "carre": "nu(|sigma^T grad phi|^2)",
        "sigma2": "nu(|sigma|_F^2)       ",
        "gradphi2": "nu(|grad phi|^2)      ",
    }
    for name in ("carre", "sigma2", "gradphi2"):
        mean, se = estimates[name]
        print(f"{labels[name]} = {mean:.6f} +- {se:.6f}  ({args.paths} paths, n={cfg.n})")
    if args.write_proxies:
        payload = {
            "nu_carre": estimates["carre"][0],
            "nu_sigma2": estimates["sigma2"][0],
        }
        path = Path(args.write_proxies)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        print(f"wrote proxies to {path}")
    return EXIT_OK


DEVIATION_HEADER = ["a", "p_hat", "ci_low", "ci_high", "g_n"]
BOUND_HEADER = ["a", "S", "S_sup", "S_sigma", "P_rho0", "P_rhoinf", "P_n_0_inf", "P_n", "P_n_sigma"]


def cmd_deviations(setup: RunSetup, args) -> int:
    curve = _compute_deviation_rows(setup, args.threads)
    rows = [[r.a, r.p_hat, r.ci_low, r.ci_high, r.g_n] for r in curve.rows]
    out = Path(args.out) / "deviations.csv"
    _write_csv(out, curve.metadata, DEVIATION_HEADER, rows)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_bounds(setup: RunSetup, args) -> int:
    params, params_sigma, _ = _bound_params(setup)
    cols = bound_curves(
        params, params_sigma, setup.config.a_grid.values(), setup.config.rho_grid_steps
    )
    rows = [[cols[name][i] for name in BOUND_HEADER] for i in range(len(cols["a"]))]
    out = Path(args.out) / "bounds.csv"
    _write_csv(out, setup.metadata(), BOUND_HEADER, rows)
    print(f"wrote {out}")
    return EXIT_OK


FIGURE_HEADER = DEVIATION_HEADER + BOUND_HEADER[1:]

#: Curves drawn in the overlay chart, keyed by joined-CSV column.
FIGURE_CURVES = ["g_n", "S", "S_sup", "S_sigma", "P_n", "P_n_0_inf", "P_n_sigma"]


def cmd_figure(setup: RunSetup, args) -> int:
    curve = _compute_deviation_rows(setup, args.threads)
    params, params_sigma, _ = _bound_params(setup)
    a_values = setup.config.a_grid.values()
    cols = bound_curves(params, params_sigma, a_values, setup.config.rho_grid_steps)

    out_dir = Path(args.out)
    dev_rows = [[r.a, r.p_hat, r.ci_low, r.ci_high, r.g_n] for r in curve.rows]
    _write_csv(out_dir / "deviations.csv", curve.metadata, DEVIATION_HEADER, dev_rows)
    bound_rows = [[cols[name][i] for name in BOUND_HEADER] for i in range(len(a_values))]
    _write_csv(out_dir / "bounds.csv", setup.metadata(), BOUND_HEADER, bound_rows)

    joined = [
        [r.a, r.p_hat, r.ci_low, r.ci_high, r.g_n] + [cols[name][i] for name in BOUND_HEADER[1:]]
        for i, r in enumerate(curve.rows)
    ]
    _write_csv(out_dir / "figure.csv", curve.metadata, FIGURE_HEADER, joined)

    series = []
    for name in FIGURE_CURVES:
        if name == "g_n":
            ys = [r.g_n for r in curve.rows]
        else:
            ys = list(cols[name])
        series.append(Series(label=name, x=list(a_values), y=ys))
    svg = render_line_chart(
        series,
        title="Deviation log-probability vs concentration bounds",
        x_label="a",
        y_label="log probability / bound exponent",
    )
    svg_path = out_dir / "figure.svg"
    svg_path.parent.mkdir(parents=True, exist_ok=True)
    with open(svg_path, "w", newline="\n") as fh:
        fh.write(svg)
    print(f"wrote {out_dir / 'figure.csv'} and {svg_path}")
    return EXIT_OK


def cmd_simulate(setup: RunSetup, args) -> int:
    cfg = setup.config
    observables = [
        Observable(GENERATOR_OBSERVABLE, GeneratorObservable(setup.model, setup.pack))
    ]
    result = run_path(
        setup.model,
        setup.schedule,
        cfg.n,
        observables,
        RngPolicy(cfg.seed).stream(0),
        innovation_law=setup.innovation,
        initial_law=setup.initial,
        collect_trace=True,
    )
    header = ["k", "gamma_k"] + [f"x_{i + 1}" for i in range(setup.model.d)]
    rows = [[k, gam] + list(x) for k, gam, x in result.trace]
    out = Path(args.out) / "trace.csv"
    _write_csv(out, setup.metadata(), header, rows)
    print(f"wrote {out} (deviation {result.deviation!r})")
    return EXIT_OK


COMMANDS = {
    "check": cmd_check,
    "carre": cmd_carre,
    "deviations": cmd_deviations,
    "bounds": cmd_bounds,
    "figure": cmd_figure,
    "simulate": cmd_simulate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ergconc", description=__doc__)
    parser.add_argument("--version", action="version", version=f"ergconc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=str, default=None, help="JSON config path")
        p.add_argument("--out", type=str, default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument(
            "--threads",
            type=int,
            default=None,
            help="worker processes; 0 = auto (ERGCONC_THREADS or CPU count)",
        )
        if name == "check":
            p.add_argument("--json", action="store_true", help="emit a JSON report")
            p.add_argument("--moment-samples", type=int, default=1_000_000)
        if name == "carre":
            p.add_argument("--paths", type=int, default=32)
            p.add_argument("--write-proxies", type=str, default=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        config = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
        if args.seed is not None:
            config = ExperimentConfig.from_dict({**config.to_dict(), "seed": args.seed})
        if args.threads is not None:
            config = ExperimentConfig.from_dict({**config.to_dict(), "threads": args.threads})
        setup = config.resolve()
        args.threads = config.threads
        args.out = args.out if args.out is not None else config.out_dir
        return COMMANDS[args.command](setup, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
