"""Command-line surface: synth, estimate, density, mle1d and bench
subcommands operating on CSV/JSON files.

Exit codes: 0 success, 1 malformed input, 2 estimation produced no modes.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict, replace
from pathlib import Path

from . import bench, density, mle1d, perturb
from .model import (
    Hyperparameters,
    add_noise,
    load_model,
    load_samples,
    save_samples,
    synthesize,
)

_HP_FLAGS = {
    "p_tilde": "--p-tilde",
    "gamma": "--gamma",
    "tau": "--tau",
    "beta_factor": "--beta-factor",
    "T": "--pseudo-t",
    "sigma_ratio": "--sigma-ratio",
    "alpha": "--alpha",
    "cadzow_iters": "--cadzow-iters",
    "lattice_dim": "--lattice-dim",
}


def _add_hp_flags(parser: argparse.ArgumentParser) -> None:
    types = {"p_tilde": int, "T": int, "cadzow_iters": int, "lattice_dim": int}
    for name, flag in _HP_FLAGS.items():
        parser.add_argument(flag, dest=f"hp_{name}", type=types.get(name, float))


def _hyperparameters(args) -> Hyperparameters:
    overrides = {
        name: getattr(args, f"hp_{name}")
        for name in _HP_FLAGS
        if getattr(args, f"hp_{name}") is not None
    }
    return replace(Hyperparameters(), **overrides)


def _resolve_sigma(args, samples) -> float:
    if args.sigma is not None:
        return args.sigma
    if samples.sigma > 0:
        return samples.sigma
    raise ValueError("sigma not given and not recorded in the input sidecar")


def _cmd_synth(args) -> int:
    model = load_model(args.model)
    signal = synthesize(model, args.n, args.delta)
    signal = add_noise(signal, args.sigma, args.seed)
    save_samples(signal, args.output)
    print(f"wrote {args.output} (n={signal.n}, sigma={signal.sigma})")
    return 0


def _cmd_estimate(args) -> int:
    samples = load_samples(args.input)
    sigma = _resolve_sigma(args, samples)
    hp = _hyperparameters(args)
    report = perturb.estimate(samples.a, sigma, hp, args.seed)
    text = report.to_json()
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return 0 if report.p_ott > 0 else 2


def _cmd_density(args) -> int:
    samples = load_samples(args.input)
    sigma = _resolve_sigma(args, samples)
    hp = _hyperparameters(args)
    grid = density.condensed_density(samples.a, hp, sigma)
    regions = density.extract_regions(grid, hp.tau)
    outdir = Path(args.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    density.save_grid(grid, outdir / "density.csv")
    density.save_regions(regions, outdir / "regions.json")
    print(f"wrote {outdir}/density.csv and regions.json (p_N={regions.p_n})")
    return 0


def _cmd_mle1d(args) -> int:
    outdir = Path(args.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    mle1d.save_curve(
        mle1d.curve_pn(args.rho, args.sigma, args.n), outdir / "pn_curve.csv"
    )
    mle1d.save_curve(
        mle1d.curve_pinf(args.rho, args.sigma), outdir / "pinf_curve.csv"
    )
    rows = [
        ("pn", str(args.n), mle1d.mse_by_quadrature(args.rho, args.sigma, args.n)),
        ("pinf", "inf", mle1d.mse_by_quadrature(args.rho, args.sigma, None)),
    ]
    if args.montecarlo:
        curve, mc_mse = mle1d.montecarlo_rho_ml(
            args.rho, args.sigma, args.n, args.montecarlo, args.seed
        )
        mle1d.save_curve(curve, outdir / "mc_density.csv")
        rows.append(("montecarlo", str(args.n), mc_mse))
    lines = ["density,n,mse"] + [f"{k},{n},{v:.17g}" for k, n, v in rows]
    (outdir / "mse.csv").write_text("\n".join(lines) + "\n")
    print(f"wrote curves and mse.csv to {outdir}")
    return 0


def _cmd_bench(args) -> int:
    if args.config:
        doc = json.loads(Path(args.config).read_text())
        config = bench.config_from_doc(doc)
    else:
        config = bench.default_config()
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.replications is not None:
        overrides["replications"] = args.replications
    if overrides:
        config = replace(config, **overrides)
    report = bench.run_bench(config, args.output_dir)
    for row in report["table"]:
        mse = "-" if row["mse"] is None else f"{row['mse']:.3f}"
        print(
            f"{row['method']:>9}  SNR={row['snr']:<5g} MSE={mse:<8} "
            f"N_sigma={row['n_sigma']}/{row['replications']}"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="modalkit",
        description="Estimate weighted sums of complex exponentials from "
        "noisy samples.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="synthesize samples from a model JSON")
    p.add_argument("--model", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("estimate", help="run the automatic estimator")
    p.add_argument("--input", required=True)
    p.add_argument("--sigma", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output")
    _add_hp_flags(p)
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("density", help="condensed density grid and regions")
    p.add_argument("--input", required=True)
    p.add_argument("--sigma", type=float)
    p.add_argument("--output-dir", default=".")
    _add_hp_flags(p)
    p.set_defaults(func=_cmd_density)

    p = sub.add_parser("mle1d", help="1-D estimator density curves and MSE")
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--montecarlo", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output-dir", default=".")
    p.set_defaults(func=_cmd_mle1d)

    p = sub.add_parser("bench", help="Monte Carlo benchmark of both methods")
    p.add_argument("--config")
    p.add_argument("--output-dir", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--replications", type=int)
    p.set_defaults(func=_cmd_bench)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
