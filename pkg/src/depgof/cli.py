"""Command-line entry point.

Verbs map onto pipeline stages so each can be rerun independently from
the artifacts of the previous one:

    depgof generate  -c cfg --seed S      synthesize a panel CSV
    depgof estimate  -c cfg               self-copulas and Psi from a panel
    depgof kernel    -c cfg               covariance kernel (Psi-based or analytic)
    depgof law       -c cfg --seed S      Monte-Carlo statistic distributions
    depgof test      -c cfg               per-series GoF results (JSONL)
    depgof pipeline  -c cfg               all stages in one run
    depgof reproduce fig2|fig3 -c cfg     the synthetic benchmark experiments

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical error.
"""

import argparse
import os
import sys
from dataclasses import replace

from . import kernels, limit_law, runner
from .errors import ConfigError, DataError, NumericalError, ParameterError
from .grid import QuantileGrid


def _add_common(sub, seed_required=False):
    sub.add_argument("-c", "--config", required=True, help="key=value config file")
    sub.add_argument("--outdir", help="override the configured output directory")
    sub.add_argument("--seed", type=int, required=seed_required,
                     help="master seed" + (" (required)" if seed_required else ""))


def _load(args):
    config = runner.load_config(args.config)
    if args.outdir:
        config = replace(config, outdir=args.outdir)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    os.makedirs(config.outdir, exist_ok=True)
    return config


def _panel(config):
    if config.model == "empirical":
        if not config.input:
            raise ConfigError("empirical model requires input=<panel.csv>")
        return runner.standardize(runner.ingest_csv(config.input))
    path = os.path.join(config.outdir, "panel.csv")
    if not os.path.exists(path):
        raise DataError(f"no generated panel at {path}; run `depgof generate` first")
    return runner.ingest_csv(path)


def cmd_generate(args):
    config = _load(args)
    panel = runner.generate_panel(config)
    runner._write_panel(os.path.join(config.outdir, "panel.csv"), panel)
    print(f"wrote {config.outdir}/panel.csv ({panel.values.shape[0]}x{len(panel.names)})")


def cmd_estimate(args):
    config = _load(args)
    panel = _panel(config)
    psi = runner.estimate_psi(panel, config, outdir=config.outdir)
    print(f"wrote {config.outdir}/psi.csv (t_max={psi.t_max})")


def cmd_kernel(args):
    config = _load(args)
    psi = None
    if config.model == "empirical":
        from .copulas import PsiSurface

        path = os.path.join(config.outdir, "psi.csv")
        if not os.path.exists(path):
            raise DataError(f"no Psi surface at {path}; run `depgof estimate` first")
        _, m, lag, values = runner.read_matrix(path)
        # n is not consumed by the Psi-based kernel; lag+1 satisfies the type
        psi = PsiSurface(grid=QuantileGrid(m), values=values, n=lag + 1, t_max=lag)
    kernel = runner.build_kernel(config, config.n, psi=psi)
    runner.write_matrix(os.path.join(config.outdir, "kernel.csv"), "kernel",
                        kernel.values, config.grid_m)
    print(f"wrote {config.outdir}/kernel.csv")


def cmd_law(args):
    config = _load(args)
    path = os.path.join(config.outdir, "kernel.csv")
    if not os.path.exists(path):
        raise DataError(f"no kernel at {path}; run `depgof kernel` first")
    _, m, _, values = runner.read_matrix(path)
    kernel = kernels.KernelMatrix(grid=QuantileGrid(m), values=values)
    spectrum = kernels.eigendecompose(kernel)
    runner.write_matrix(os.path.join(config.outdir, "spectrum_eigvals.csv"),
                        "eigenvalues", spectrum.eigenvalues[None, :], m)
    runner.write_matrix(os.path.join(config.outdir, "spectrum_eigvecs.csv"),
                        "eigenvectors", spectrum.eigenvectors, m)
    dist_ks, dist_cm = limit_law.simulate_statistic_distribution(
        spectrum, config.n_trials, config.seed, n_threads=runner._n_threads(config))
    runner.write_distribution(os.path.join(config.outdir, "law_ks.csv"), dist_ks)
    runner.write_distribution(os.path.join(config.outdir, "law_cm.csv"), dist_cm)
    print(f"wrote {config.outdir}/law_ks.csv and law_cm.csv ({config.n_trials} trials)")


def cmd_test(args):
    config = _load(args)
    panel = _panel(config)
    paths = [os.path.join(config.outdir, f"law_{k}.csv") for k in ("ks", "cm")]
    if not all(os.path.exists(p) for p in paths):
        raise DataError(f"missing laws in {config.outdir}; run `depgof law` first")
    dist_ks, dist_cm = (runner.read_distribution(p) for p in paths)
    results = runner.test_panel(panel, config, dist_ks, dist_cm, outdir=config.outdir)
    rejected = sum(1 for r in results if r.cm_p < 0.05)
    print(f"wrote {config.outdir}/results.jsonl "
          f"({len(results)} series, {rejected} CM rejections at 5%)")


def cmd_pipeline(args):
    config = _load(args)
    results = runner.run_pipeline(config)
    print(f"pipeline complete: {len(results)} series tested, artifacts in {config.outdir}")


def cmd_reproduce(args):
    config = _load(args)
    summary = runner.reproduce(args.experiment, config)
    for key in sorted(summary):
        print(f"{key}: {summary[key]}")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="depgof",
        description="goodness-of-fit tests that stay valid for dependent observations")
    subs = parser.add_subparsers(dest="verb", required=True)
    for verb, fn, seed_required in (
        ("generate", cmd_generate, True),
        ("estimate", cmd_estimate, False),
        ("kernel", cmd_kernel, False),
        ("law", cmd_law, True),
        ("test", cmd_test, False),
        ("pipeline", cmd_pipeline, False),
    ):
        sub = subs.add_parser(verb)
        _add_common(sub, seed_required=seed_required)
        sub.set_defaults(fn=fn)
    sub = subs.add_parser("reproduce")
    sub.add_argument("experiment", choices=["fig2", "fig3"])
    _add_common(sub)
    sub.set_defaults(fn=cmd_reproduce)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.fn(args)
    except (ConfigError, ParameterError) as exc:
        print(f"depgof: configuration error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"depgof: data error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"depgof: numerical error: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
