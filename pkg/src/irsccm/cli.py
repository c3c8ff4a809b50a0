"""Command-line front end.

Subcommands: sweep-snr / sweep-frames / sweep-slots run a Monte Carlo sweep
and write a CSV (plus figures unless --no-plot); estimate runs a single
seeded trial and can dump the estimated generator; selftest runs the quick
invariant suite. Exit codes: 0 success, 1 configuration or I/O problem,
2 solver hard failure (including a failing selftest).
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ExperimentConfig, load_config
from .estimator import AdmmConfig, EstimatorError, estimate_ccm
from .metrics import rem_metric
from .channel import pathloss_scenario, true_ccm
from .sweep import emit_csv, run_sweep, trial_rngs
from .training import build_sensing_matrix, noise_var_for_snr, simulate_frames

_SWEEP_COMMANDS = {
    "sweep-snr": "snr",
    "sweep-frames": "frames",
    "sweep-slots": "slots",
}


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors by default; this contract reserves 2
    for solver failures, so usage problems exit 1 instead."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="PATH", help="TOML experiment config")
    parser.add_argument("--seed", type=int, metavar="U64", help="override master seed")
    parser.add_argument("--trials", type=int, metavar="N", help="override trial count")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="irsccm", description=__doc__)
    parser.add_argument("--version", action="version", version=f"irsccm {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    for command, sweep_name in _SWEEP_COMMANDS.items():
        p = sub.add_parser(
            command, help=f"Monte Carlo sweep over the {sweep_name} grid"
        )
        _add_common(p)
        p.add_argument("--out", metavar="PATH", help="CSV output path")
        p.add_argument(
            "--threads", type=int, default=1, metavar="N",
            help="worker processes (default 1; results identical for any N)",
        )
        p.add_argument(
            "--no-plot", action="store_true",
            help="skip rendering figures next to the CSV",
        )

    p = sub.add_parser("estimate", help="single seeded trial, printed summary")
    _add_common(p)
    p.add_argument(
        "--dump-ccm", metavar="PATH",
        help="write the estimated generator as lag1,lag2,lag3,re,im rows",
    )

    sub.add_parser("selftest", help="run the quick invariant suite")
    return parser


def _resolve_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if getattr(args, "seed", None) is not None:
        cfg = dataclasses.replace(cfg, master_seed=args.seed)
    if getattr(args, "trials", None) is not None:
        cfg = dataclasses.replace(cfg, trials=args.trials)
    return cfg


def _run_sweep_command(args, sweep_name: str) -> int:
    cfg = _resolve_config(args)
    if args.threads is not None and args.threads < 1:
        raise ConfigError("--threads must be at least 1")
    result = run_sweep(cfg, sweep_name, threads=args.threads)
    out = Path(args.out) if args.out else Path(cfg.out)
    emit_csv(result, out)
    print(f"wrote {out}")
    if not args.no_plot:
        from .figures import render_sweep_figures

        for fig_path in render_sweep_figures(result, out):
            print(f"wrote {fig_path}")
    if any(row.failures >= cfg.trials for row in result.rows):
        print("error: a grid point had no successful trials", file=sys.stderr)
        return 2
    return 0


def _dump_generator(gen: np.ndarray, path: Path) -> None:
    dims = tuple((s + 1) // 2 for s in gen.shape)
    lines = ["lag1,lag2,lag3,re,im"]
    for index in np.ndindex(gen.shape):
        lags = tuple(i - (d - 1) for i, d in zip(index, dims))
        value = gen[index]
        lines.append(
            f"{lags[0]},{lags[1]},{lags[2]},"
            f"{value.real:.17g},{value.imag:.17g}"
        )
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="ascii")


def _run_estimate(args) -> int:
    cfg = _resolve_config(args)
    sc, es = cfg.scenario, cfg.estimator
    geom = sc.geometry
    rngs = trial_rngs(cfg.master_seed, 0)
    paths = pathloss_scenario(
        sc.bs_position, sc.irs_position, sc.user_position, sc.rician_db,
        rngs[0], n_bs_irs_paths=sc.n_bs_irs_paths,
        n_irs_user_paths=sc.n_irs_user_paths, shadow_std_db=sc.shadow_std_db,
    )
    truth = true_ccm(paths, geom)
    sensing = build_sensing_matrix(geom, cfg.training.j_slots, rngs[1])
    snr_db = cfg.training.snr_db
    if cfg.training.noise_var is not None:
        noise_var = cfg.training.noise_var
    else:
        noise_var = noise_var_for_snr(
            paths, geom, sensing, snr_db, rngs[2],
            trials=cfg.training.snr_calibration_draws,
        )
    frames = simulate_frames(
        sensing, paths, geom, cfg.training.t_frames, noise_var, rngs[3]
    )
    admm = AdmmConfig(
        lam=es.lam, eta=es.eta, rho=es.rho,
        max_iters=es.max_iters, tol=es.tol, lambda_c=es.lambda_c,
    )
    est = estimate_ccm(
        frames.sample_cov, sensing.w, geom.dims, admm,
        t_frames=cfg.training.t_frames,
    )
    diag = est.diagnostics
    rem = rem_metric(truth.rh, est.rh_hat, cfg.rem_rank)
    print(f"snr_db        {snr_db:.9g}")
    print(f"noise_var     {noise_var:.9g}")
    print(f"t_frames      {cfg.training.t_frames}")
    print(f"j_slots       {cfg.training.j_slots}")
    print(f"lambda        {diag.lam:.9g}")
    print(f"iterations    {diag.iterations}")
    print(f"converged     {diag.converged}")
    print(f"rem           {rem:.9g}")
    if args.dump_ccm:
        _dump_generator(est.v_hat.data, Path(args.dump_ccm))
        print(f"wrote {args.dump_ccm}")
    return 0


def _run_selftest() -> int:
    from .selftest import run_selftest

    return 0 if run_selftest(print) else 2


def main(argv=None) -> int:
    logging.basicConfig(
        stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(message)s"
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command in _SWEEP_COMMANDS:
            return _run_sweep_command(args, _SWEEP_COMMANDS[args.command])
        if args.command == "estimate":
            return _run_estimate(args)
        if args.command == "selftest":
            return _run_selftest()
        parser.error(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except EstimatorError as exc:
        print(f"error: solver failure: {exc}", file=sys.stderr)
        return 2
    return 1


if __name__ == "__main__":
    sys.exit(main())
