"""Command-line front end: ``netid {simulate,identify,rank,informativity,benchmark}``.

Exit status is 0 on success, 1 for invalid input and 2 for numerical
failures.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .arx import default_order, fit_arx_step1, residual_covariance
from .exceptions import ModelError, NetIdError, StepError
from .fileio import (BUNDLED_NETWORKS, bundled_network_path, dumps_json, format_dataset,
                     read_dataset, read_network, write_network)
from .informativity import informativity_report
from .netmodel import simulate_experiment
from .pipeline import read_config, run_algorithm1, run_benchmark, write_benchmark
from .topology import DEFAULT_GRID, estimate_rank
from .wnsf import BjOrders


def _network(arg):
    if arg in BUNDLED_NETWORKS and not Path(arg).exists():
        return read_network(bundled_network_path(arg))
    return read_network(arg)


def _emit(text: str, out):
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def cmd_simulate(args):
    model = _network(args.network)
    data = simulate_experiment(model, args.N, args.seed, args.r_variance, args.burn_in)
    _emit(format_dataset(data, include_noise=not args.no_noise), args.out)


def _order(args, N):
    return args.n if args.n is not None else default_order(N)


def cmd_rank(args):
    data = read_dataset(args.dataset)
    _, innov = fit_arx_step1(data, _order(args, data.N))
    lam = residual_covariance(innov)
    rank = estimate_rank(lam, abs_floor=1e-12 * float(data.w.var(axis=0).mean()),
                         reorder=args.reorder)
    _emit(dumps_json({"n": _order(args, data.N), "N": data.N, **rank.to_dict()}) + "\n",
          args.out)


def cmd_identify(args):
    data = read_dataset(args.dataset)
    model = _network(args.network)
    if data.L != model.L or data.K != model.K:
        raise ModelError(f"dataset has L={data.L}, K={data.K} but the network has "
                         f"L={model.L}, K={model.K}")
    orders = BjOrders.from_model(model) if args.orders is None else BjOrders.uniform(*args.orders)
    grid = DEFAULT_GRID if args.grid is None else tuple(args.grid)
    res = run_algorithm1(data, model, _order(args, data.N), args.topology, orders,
                         use_e_true=args.e_true, glasso_grid=grid, glasso_rule=args.glasso_rule,
                         weighted_init=not args.unweighted_init, max_iter=args.max_iter,
                         reorder=args.reorder)
    outdir = Path(args.out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    topo = res.topology.to_dict()
    topo["permutation"] = [i + 1 for i in res.permutation]
    (outdir / "topology.json").write_text(dumps_json(topo) + "\n")
    (outdir / "rank.json").write_text(dumps_json(res.rank.to_dict()) + "\n")
    (outdir / "diagnostics.json").write_text(dumps_json(res.diagnostics) + "\n")
    est = res.network_model(model.R, model.K, name=f"{model.name or 'network'}_estimate")
    write_network(est, outdir / "estimate.net",
                  comment=f"estimated from {Path(args.dataset).name}, N = {data.N}")
    print(f"p_hat = {res.rank.p_hat}, iterations = {res.bj.iterations}, "
          f"wrote {outdir}/{{topology.json, rank.json, diagnostics.json, estimate.net}}")


def cmd_informativity(args):
    model = _network(args.network)
    _emit(dumps_json(informativity_report(model, exhaustive=args.exhaustive)) + "\n", args.out)


def cmd_benchmark(args):
    cfg = read_config(args.config)
    if args.workers is not None:
        cfg.workers = args.workers

    def progress(rec):
        if not args.quiet:
            status = "failed" if rec["failed"] else f"mse={rec.get('mse', float('nan')):.4g}"
            print(f"N={rec['N']} run={rec['run']} {status}", file=sys.stderr)

    result = run_benchmark(cfg, progress)
    paths = write_benchmark(result, args.out_dir)
    for N in cfg.N:
        s = result.summary[N]
        print(f"N={N:6d}  mean MSE={s['mean_mse']:.4g}  improvement={s['mean_improvement']:.4g}"
              f"  failed={s['failed']}/{s['runs']}")
    print("wrote " + ", ".join(str(p) for p in paths.values()))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="netid", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a dataset from a network file")
    p.add_argument("network", help="network file or bundled name (six_node, six_node_rb)")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--r-variance", type=float, default=5.0)
    p.add_argument("--burn-in", type=int, default=500)
    p.add_argument("--no-noise", action="store_true", help="omit the e columns")
    p.add_argument("--out", "-o")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("rank", help="noise rank and node ordering of a dataset")
    p.add_argument("dataset")
    p.add_argument("--n", type=int, help="ARX order (default from N)")
    p.add_argument("--reorder", choices=("ordered", "greedy"), default="ordered")
    p.add_argument("--out", "-o")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("identify", help="full identification of a dataset")
    p.add_argument("dataset")
    p.add_argument("network", help="network file supplying G/R structure, R and orders")
    p.add_argument("--n", type=int)
    p.add_argument("--topology", default="true", choices=("true", "AIC", "BIC", "CV", "GLASSO"))
    p.add_argument("--grid", type=float, nargs="+", help="Glasso penalty grid")
    p.add_argument("--glasso-rule", choices=("min", "1se"), default="min")
    p.add_argument("--orders", type=int, nargs=4, metavar=("ML", "MF", "MC", "MD"))
    p.add_argument("--e-true", action="store_true", help="use the measured noise columns")
    p.add_argument("--unweighted-init", action="store_true")
    p.add_argument("--max-iter", type=int, default=50)
    p.add_argument("--reorder", choices=("ordered", "greedy"), default="ordered")
    p.add_argument("--out-dir", default="identify_out")
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("informativity", help="path-based informativity report")
    p.add_argument("network")
    p.add_argument("--exhaustive", action="store_true")
    p.add_argument("--out", "-o")
    p.set_defaults(func=cmd_informativity)

    p = sub.add_parser("benchmark", help="Monte-Carlo benchmark from a run configuration")
    p.add_argument("config")
    p.add_argument("--out-dir", default="benchmark_out")
    p.add_argument("--workers", type=int)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_benchmark)
    return ap


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, StepError):
        return exit_code(exc.cause)
    return 1 if isinstance(exc, ModelError) else 2


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        args.func(args)
    except NetIdError as exc:
        print(f"netid: error: {exc}", file=sys.stderr)
        return exit_code(exc)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"netid: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
