"""End-to-end identification and Monte-Carlo benchmarking."""
from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .arx import (InnovationEstimate, default_order, fit_arx_step1, fit_arx_step21,
                  refine_step31, residual_covariance)
from .exceptions import FormatError, ModelError, NetIdError, StepError
from .fileio import (BUNDLED_NETWORKS, FORMAT_HEADER, bundled_network_path, iter_records,
                     read_network)
from .netmodel import Dataset, NetworkModel, simulate_experiment
from .topology import (DEFAULT_GRID, RankResult, TopologyEstimate, estimate_rank,
                       estimate_topology, roc_eval)
from .wnsf import BjEstimate, BjOrders, fit_wnsf, true_theta

DEFAULT_N = (300, 1078, 3873, 13916, 50000)
TOPOLOGY_METHODS = ("true", "AIC", "BIC", "CV", "GLASSO")


@dataclass
class RunConfig:
    """Settings of an identification run or a Monte-Carlo benchmark.

    ``network`` is a network-spec path or a bundled name. ``orders`` is
    ``"model"`` (exact orders of the network file) or ``[m_l, m_f, m_c,
    m_d]``. ``topology`` selects how the noise sets are obtained; the listed
    ``roc_methods`` are additionally run and scored in a benchmark.
    """

    network: str = "six_node"
    N: Tuple[int, ...] = DEFAULT_N
    n: Optional[Tuple[int, ...]] = None
    M: int = 100
    seed: int = 0
    r_variance: float = 5.0
    noise_variances: Optional[Tuple[float, ...]] = None
    burn_in: int = 500
    topology: str = "true"
    roc_methods: Tuple[str, ...] = ()
    glasso_grid: Tuple[float, ...] = DEFAULT_GRID
    glasso_rule: str = "min"
    penalize_G: bool = True
    orders: object = "model"
    use_e_true: bool = False
    weighted_init: bool = True
    tol: float = 1e-4
    max_iter: int = 50
    reorder: str = "ordered"
    workers: int = 1

    def __post_init__(self):
        self.N = tuple(int(x) for x in np.atleast_1d(self.N))
        if not self.N or any(x <= 0 for x in self.N) or list(self.N) != sorted(set(self.N)):
            raise ModelError("N values must be positive and strictly increasing")
        if self.M < 1:
            raise ModelError("M must be at least 1")
        if self.n is not None:
            self.n = tuple(int(x) for x in np.atleast_1d(self.n))
            if len(self.n) != len(self.N):
                raise ModelError("n schedule must have one order per N")
        self.roc_methods = tuple(m.upper() for m in self.roc_methods)
        self.topology = self.topology if self.topology == "true" else self.topology.upper()
        for m in (self.topology,) + self.roc_methods:
            if m not in TOPOLOGY_METHODS:
                raise ModelError(f"unknown topology method {m!r}")
        self.glasso_grid = tuple(float(x) for x in self.glasso_grid)
        if self.noise_variances is not None:
            self.noise_variances = tuple(float(x) for x in self.noise_variances)

    def order_for(self, N: int) -> int:
        if self.n is not None and N in self.N:
            return self.n[self.N.index(N)]
        return default_order(N)

    def load_network(self) -> NetworkModel:
        path = bundled_network_path(self.network) if self.network in BUNDLED_NETWORKS \
            else Path(self.network)
        model = read_network(path)
        if self.noise_variances is not None:
            if len(self.noise_variances) != model.p:
                raise ModelError(f"need {model.p} noise variances")
            model = NetworkModel(model.L, model.K, model.p, model.G, model.H, model.R,
                                 np.diag(self.noise_variances), model.name)
        return model

    def bj_orders(self, model: NetworkModel) -> BjOrders:
        if self.orders == "model":
            return BjOrders.from_model(model)
        vals = list(self.orders)
        if len(vals) != 4:
            raise ModelError("orders must be 'model' or [m_l, m_f, m_c, m_d]")
        return BjOrders.uniform(*(int(v) for v in vals))

    def to_dict(self):
        d = asdict(self)
        d["N"] = list(self.N)
        return d


def parse_config(text: str, path=None) -> RunConfig:
    """``key = JSON value`` lines under the format header."""
    known = {f.name for f in fields(RunConfig)}
    kw = {}
    for lineno, key, value in iter_records(text, path):
        if key not in known:
            raise FormatError(f"unknown key {key!r}", path, lineno)
        try:
            kw[key] = json.loads(value)
        except json.JSONDecodeError:
            # bare words such as network names and methods
            kw[key] = value
    try:
        return RunConfig(**kw)
    except (TypeError, ModelError) as exc:
        raise FormatError(str(exc), path) from None


def read_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise FormatError(f"cannot read config: {exc.strerror}", path) from None
    return parse_config(text, path)


def format_config(cfg: RunConfig) -> str:
    lines = [FORMAT_HEADER]
    for f in fields(RunConfig):
        v = getattr(cfg, f.name)
        lines.append(f"{f.name} = {json.dumps(list(v) if isinstance(v, tuple) else v)}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- algorithm

@dataclass
class IdentificationResult:
    rank: RankResult
    topology: TopologyEstimate
    bj: BjEstimate
    permutation: Tuple[int, ...]
    innovation: Optional[InnovationEstimate] = None
    diagnostics: dict = field(default_factory=dict)

    def noise_covariance(self) -> np.ndarray:
        """Sample covariance of the leading innovation channels."""
        ea = self.innovation.window[:, :self.bj.p]
        return ea.T @ ea / max(len(ea), 1)

    def network_model(self, R, K: int, Lambda=None, name: str = "estimate") -> NetworkModel:
        """Estimated network in the original node labels.

        ``R`` is given in the original labels; ``Lambda`` defaults to the
        innovation sample covariance.
        """
        inv = [0] * len(self.permutation)
        for new, old in enumerate(self.permutation):
            inv[old] = new
        R_ord = {(inv[j], k): tf for (j, k), tf in R.items()}
        lam = self.noise_covariance() if Lambda is None else Lambda
        est = self.bj.to_network_model(R_ord, K, lam, name)
        if inv == list(range(len(inv))):
            return est
        return est.permuted(inv)


def _step(name, partial, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except NetIdError as exc:
        raise StepError(name, exc, dict(partial)) from exc
    except (np.linalg.LinAlgError, ValueError, ArithmeticError) as exc:
        raise StepError(name, exc, dict(partial)) from exc


def run_algorithm1(data: Dataset, model: NetworkModel, n: int, topology="true",
                   orders: Optional[BjOrders] = None, use_e_true: bool = False,
                   glasso_grid=DEFAULT_GRID, glasso_rule: str = "min", penalize_G: bool = True,
                   weighted_init: bool = True, tol: float = 1e-4, max_iter: int = 50,
                   reorder: str = "ordered") -> IdentificationResult:
    """Full identification: rank, ordering, noise topology, parametric model.

    ``model`` supplies what is assumed known: the G and R structure, R
    itself, and (for ``topology="true"``) the noise sets. ``topology`` may
    also be a :class:`TopologyEstimate` or one of AIC, BIC, CV, GLASSO. With
    ``use_e_true`` the measured noise replaces the reconstructed
    innovation from Step 2.2 on. Any failing step raises
    :class:`StepError` carrying the artifacts produced so far.
    """
    partial: Dict[str, object] = {}
    diag: Dict[str, dict] = {}

    arx1, innov1 = _step("1", partial, fit_arx_step1, data, n)
    lam = residual_covariance(innov1)
    floor = 1e-12 * float(np.mean(np.var(data.w, axis=0))) if data.N > 1 else 0.0
    rank = _step("1", partial, estimate_rank, lam, abs_floor=floor, reorder=reorder)
    partial["rank"] = rank
    diag["step1"] = dict(arx1.diagnostics["step1"], singular_values=rank.singular_values.tolist(),
                         p_hat=rank.p_hat, permutation=[i + 1 for i in rank.permutation])
    perm = rank.permutation
    p = rank.p_hat
    identity = list(perm) == list(range(data.L))
    d = data if identity else data.permuted(perm)
    m = model if identity else model.permuted(perm)
    if p != m.p and (topology == "true" or use_e_true):
        raise StepError("2.2", ModelError(f"estimated rank {p} differs from the model's "
                                          f"{m.p}; the true topology cannot be used"), partial)

    if use_e_true:
        if data.e_true is None:
            raise StepError("2.1", ModelError("dataset has no measured noise"), partial)
        innov = InnovationEstimate.from_noise(d.e_true)
        diag["step2.1"] = {"skipped": "measured noise used"}
    else:
        arx21, innov = _step("2.1", partial, fit_arx_step21, d, n, p, m.R)
        diag["step2.1"] = arx21.diagnostics["step2.1"]
    partial["innovation"] = innov

    if isinstance(topology, TopologyEstimate):
        topo = topology
    elif topology == "true":
        topo = TopologyEstimate(m.noise_sets, p, "true")
    else:
        topo = _step("2.2", partial, estimate_topology, d, innov, n, topology, m.neighbor_sets,
                     m.R, glasso_grid, penalize_G, glasso_rule)
    if topo.p != p or topo.L != d.L:
        raise StepError("2.2", ModelError("topology does not match the estimated rank"), partial)
    partial["topology"] = topo
    diag["step2.2"] = {"method": topo.method, "V": [[s + 1 for s in v] for v in topo.V],
                       "lambda": {str(j + 1): v for j, v in topo.lambdas.items()}}

    spm, innov3 = _step("3.1", partial, refine_step31, d, innov, m.neighbor_sets, topo.V, n, m.R,
                        update_innovation=not use_e_true)
    partial["structured"] = spm
    diag["step3.1"] = spm.diagnostics

    orders = orders or BjOrders.from_model(m)
    bj = _step("3.2", partial, fit_wnsf, spm, innov3, orders, weighted_init, True, tol, max_iter)
    diag["step3.2"] = {"weighted_init": weighted_init,
                       "gamma": bj.gamma.tolist()}
    diag["step3.3"] = {"iterations": [lg.iterations for lg in bj.logs],
                       "converged": bj.converged, "log": bj.iteration_log()}
    return IdentificationResult(rank, topo, bj, perm, innov3, diag)


def run_step3(data: Dataset, innov: InnovationEstimate, model: NetworkModel, n: int,
              topology: Optional[TopologyEstimate], orders=None, **kw) -> BjEstimate:
    """Steps 3.1 to 3.3 on ordered data; a topology is mandatory."""
    if topology is None:
        raise ModelError("a noise topology (estimated or supplied) is required before step 3")
    spm, innov3 = refine_step31(data, innov, model.neighbor_sets, topology.V, n, model.R)
    return fit_wnsf(spm, innov3, orders or BjOrders.from_model(model), **kw)


# ---------------------------------------------------------------- benchmark

RECORD_FIELDS = ("kind", "N", "n", "run", "failed", "error", "mse", "mse_init", "improvement",
                 "iterations", "iterations_median", "p_hat", "singular_values", "dis")


def run_seed(base: int, N_index: int, run: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([base, N_index, run])


def _one_run(args):
    cfg, model, ni, N, c = args
    n = cfg.order_for(N)
    rec = {"N": N, "n": n, "run": c, "failed": False, "error": ""}
    try:
        data = simulate_experiment(model, N, run_seed(cfg.seed, ni, c), cfg.r_variance,
                                   cfg.burn_in)
    except NetIdError as exc:
        rec.update(failed=True, error=f"simulate: {exc}")
        return rec
    orders = cfg.bj_orders(model)
    th0 = true_theta(model, orders=orders)
    kw = dict(orders=orders, glasso_grid=cfg.glasso_grid, glasso_rule=cfg.glasso_rule,
              penalize_G=cfg.penalize_G, weighted_init=cfg.weighted_init, tol=cfg.tol,
              max_iter=cfg.max_iter, reorder=cfg.reorder)
    try:
        res = run_algorithm1(data, model, n, cfg.topology, use_e_true=cfg.use_e_true, **kw)
    except StepError as exc:
        rec.update(failed=True, error=str(exc))
        rank = exc.partial.get("rank")
        if rank is not None:
            rec.update(p_hat=rank.p_hat, singular_values=rank.singular_values.tolist())
        return rec
    truth = TopologyEstimate.from_model(model.permuted(res.permutation)) \
        if res.rank.p_hat == model.p else None
    same = truth is not None and res.topology.V == truth.V and \
        list(res.permutation) == list(range(model.L))
    rec.update(p_hat=res.rank.p_hat, singular_values=res.rank.singular_values.tolist(),
               iterations=res.bj.iterations,
               iterations_nodes=[lg.iterations for lg in res.bj.logs],
               iterations_median=float(np.median([lg.iterations for lg in res.bj.logs])),
               converged=res.bj.converged)
    if same:
        rec["mse"] = float(np.sum((res.bj.theta_vector() - th0) ** 2))
        rec["mse_init"] = float(np.sum((res.bj.theta_vector(initial=True) - th0) ** 2))
        rec["improvement"] = rec["mse_init"] - rec["mse"]
    else:
        rec["mse_note"] = "estimated structure differs from the true one"
    if cfg.roc_methods and truth is not None:
        rec["roc"] = {}
        d = data if list(res.permutation) == list(range(model.L)) else data.permuted(res.permutation)
        m = model.permuted(res.permutation)
        try:
            innov = fit_arx_step21(d, n, res.rank.p_hat, m.R)[1]
            for meth in cfg.roc_methods:
                if meth == "true":
                    continue
                topo = estimate_topology(d, innov, n, meth, m.neighbor_sets, m.R,
                                         cfg.glasso_grid, cfg.penalize_G, cfg.glasso_rule)
                rec["roc"][meth] = roc_eval(topo, truth).to_dict()
        except NetIdError as exc:
            rec["roc_error"] = str(exc)
    return rec


@dataclass
class BenchResult:
    """Per-run records and per-N aggregates of a benchmark."""

    config: RunConfig
    records: List[dict]
    summary: Dict[int, dict]

    def mean_mse(self) -> List[float]:
        return [self.summary[N]["mean_mse"] for N in self.config.N]

    def to_json(self) -> dict:
        return {"config": self.config.to_dict(),
                "summary": {str(N): s for N, s in self.summary.items()},
                "records": self.records}

    def records_csv(self) -> str:
        """One row per (N, run) followed by one aggregate row per N."""
        buf = io.StringIO()
        buf.write(f"# {FORMAT_HEADER}\n")
        w = csv.DictWriter(buf, fieldnames=RECORD_FIELDS, extrasaction="ignore",
                           lineterminator="\n")
        w.writeheader()
        for r in self.records:
            row = dict(r, kind="record")
            row["singular_values"] = " ".join(f"{x:.6g}" for x in r.get("singular_values", []))
            row["dis"] = " ".join(f"{k}:{v['dis']:.6g}" for k, v in r.get("roc", {}).items())
            w.writerow(row)
        for N in self.config.N:
            s = self.summary[N]
            w.writerow({"kind": "aggregate", "N": N, "n": s["n"], "run": s["runs"],
                        "failed": s["failed"], "mse": s["mean_mse"],
                        "mse_init": s["mean_mse_init"], "improvement": s["mean_improvement"],
                        "iterations": s["median_iterations"],
                        "iterations_median": s["median_node_iterations"],
                        "singular_values": " ".join(f"{x:.6g}" for x in s["mean_singular_values"]),
                        "dis": " ".join(f"{k}:{v:.6g}" for k, v in s["mean_dis"].items())})
        return buf.getvalue()

    def roc_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# {FORMAT_HEADER}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["N", "method", "TPR", "FPR", "dis"])
        for N in self.config.N:
            for meth, v in self.summary[N]["roc"].items():
                w.writerow([N, meth, v["TPR"], v["FPR"], v["dis"]])
        return buf.getvalue()


def _mean(xs):
    xs = [x for x in xs if x is not None and np.isfinite(x)]
    return float(np.mean(xs)) if xs else float("nan")


def summarize(cfg: RunConfig, records: List[dict]) -> Dict[int, dict]:
    out = {}
    for N in cfg.N:
        rs = [r for r in records if r["N"] == N]
        ok = [r for r in rs if not r["failed"]]
        svs = [r["singular_values"] for r in rs if r.get("singular_values")]
        roc = {}
        for meth in cfg.roc_methods:
            pts = [r["roc"][meth] for r in ok if meth in r.get("roc", {})]
            if pts:
                roc[meth] = {k: _mean([p[k] for p in pts]) for k in ("TPR", "FPR", "dis")}
                roc[meth]["perfect_fraction"] = float(np.mean([p["dis"] == 0 for p in pts]))
        out[N] = {
            "n": cfg.order_for(N),
            "runs": len(rs),
            "failed": len(rs) - len(ok),
            "mean_mse": _mean([r.get("mse") for r in ok]),
            "mean_mse_init": _mean([r.get("mse_init") for r in ok]),
            "mean_improvement": _mean([r.get("improvement") for r in ok]),
            "median_iterations": float(np.median([r["iterations"] for r in ok])) if ok else float("nan"),
            "median_node_iterations": float(np.median(
                [k for r in ok for k in r.get("iterations_nodes", [])])) if ok else float("nan"),
            "mean_singular_values": np.mean(svs, axis=0).tolist() if svs else [],
            "p_hat_counts": {str(k): sum(r.get("p_hat") == k for r in rs)
                             for k in sorted({r.get("p_hat") for r in rs if r.get("p_hat")})},
            "roc": roc,
            "mean_dis": {k: v["dis"] for k, v in roc.items()},
        }
    return out


def run_benchmark(cfg: RunConfig, progress=None) -> BenchResult:
    """Monte-Carlo study: M runs for every N, fresh excitation and noise each.

    Run c at the i-th data length uses seed ``SeedSequence([seed, i, c])`` so
    results do not depend on execution order or on ``workers``. Failed runs
    are recorded and left out of the means.
    """
    model = cfg.load_network()
    jobs = [(cfg, model, ni, N, c) for ni, N in enumerate(cfg.N) for c in range(cfg.M)]
    records = []
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as ex:
            for rec in ex.map(_one_run, jobs):
                records.append(rec)
                if progress:
                    progress(rec)
    else:
        for job in jobs:
            rec = _one_run(job)
            records.append(rec)
            if progress:
                progress(rec)
    return BenchResult(cfg, records, summarize(cfg, records))


def write_benchmark(result: BenchResult, outdir) -> Dict[str, Path]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    from .fileio import dumps_json
    paths = {"records": outdir / "benchmark.csv", "summary": outdir / "benchmark.json",
             "roc": outdir / "roc.csv"}
    paths["records"].write_text(result.records_csv())
    paths["summary"].write_text(dumps_json(result.to_json()))
    paths["roc"].write_text(result.roc_csv())
    return paths
