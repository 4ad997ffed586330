import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from netid.arx import InnovationEstimate, fit_arx_step21
from netid.exceptions import DegenerateDataError, InconsistentRankError
from netid.netmodel import check_lambda, impulse_response, simulate_experiment
from netid.topology import (TopologyEstimate, cv_train_length, estimate_rank, estimate_topology,
                            glasso_fit, node_design, reorder_nodes, roc_eval, select_structure,
                            tune_lambda)


def spectrum_matrix(s, seed=0):
    q = np.linalg.qr(np.random.default_rng(seed).standard_normal((len(s), len(s))))[0]
    return q @ np.diag(s) @ q.T


# ---- rank

def test_rank_identity():
    r = estimate_rank(np.eye(6))
    assert r.p_hat == 6 and r.permutation == tuple(range(6)) and r.gap_ratio == np.inf


def test_rank_reported_spectrum():
    lam = spectrum_matrix([0.59, 0.40, 0.39, 0.10, 4.04e-13, 1.24e-13])
    assert estimate_rank(lam).p_hat == 4


def test_rank_exact_square_form(net_all):
    r = estimate_rank(check_lambda(net_all))
    assert r.p_hat == 4
    assert r.permutation == tuple(range(6))


def test_rank_zero_covariance_is_degenerate():
    with pytest.raises(DegenerateDataError):
        estimate_rank(np.zeros((3, 3)))
    with pytest.raises(DegenerateDataError):
        estimate_rank(1e-20 * np.eye(3), abs_floor=1e-15)


@settings(max_examples=30, deadline=None)
@given(st.floats(1e-6, 1e6), st.integers(1, 6), st.integers(0, 1000))
def test_rank_scale_equivariant(c, p, seed):
    s = np.r_[np.random.default_rng(seed).uniform(0.1, 1.0, p), np.zeros(6 - p)]
    lam = spectrum_matrix(s, seed)
    assert estimate_rank(c * lam).p_hat == estimate_rank(lam).p_hat == p


def test_reorder_full_rank_identity():
    assert reorder_nodes(np.eye(4), 4) == (0, 1, 2, 3)


def test_reorder_zero_diagonal_positions():
    lam = np.diag([1.0, 0.0, 2.0, 3.0, 0.0, 1.5])
    assert reorder_nodes(lam, 4)[:4] == (0, 2, 3, 5)
    assert reorder_nodes(lam, 4, method="greedy")[:4] == (0, 2, 3, 5)


def test_reorder_shuffled_square_form(net_all):
    lam = check_lambda(net_all)
    shuffle = [5, 2, 0, 4, 1, 3]
    lam_s = lam[np.ix_(shuffle, shuffle)]
    for method in ("ordered", "greedy"):
        res = estimate_rank(lam_s, reorder=method)
        lead = list(res.permutation[:4])
        assert np.linalg.eigvalsh(lam_s[np.ix_(lead, lead)]).min() > 1e-6


def test_reorder_impossible_rank():
    with pytest.raises(InconsistentRankError):
        reorder_nodes(np.diag([1.0, 0.0, 0.0]), 2, tol=1e-9)


# ---- structure selection

def test_cv_train_length():
    assert cv_train_length(300) == 200


@pytest.fixture(scope="module")
def design_data(net_all):
    d = simulate_experiment(net_all, 4000, seed=31)
    return d, InnovationEstimate.from_noise(d.e_true)


def test_bic_selects_true_set_for_node3(net_all, design_data):
    d, innov = design_data
    V, table = select_structure(d, innov, 15, "BIC", 2, net_all.neighbors(2), net_all.R)
    assert V == (1, 2)
    assert len(table) == 16


def test_selection_prefers_empty_set_without_noise(net_all):
    # node driven by unrelated noise channels: penalties dominate
    rng = np.random.default_rng(0)
    d = simulate_experiment(net_all, 3000, seed=1)
    innov = InnovationEstimate.from_noise(rng.standard_normal((3000, 4)))
    for crit in ("BIC", "AIC"):
        V, _ = select_structure(d, innov, 5, crit, 1, net_all.neighbors(1), net_all.R)
        assert V == ()


def test_tie_break_fewest_edges(net_all, design_data):
    d, innov = design_data
    V, table = select_structure(d, innov, 10, "CV", 0, net_all.neighbors(0), net_all.R)
    best = min(r["score"] for r in table)
    winners = [r for r in table if r["score"] == best]
    assert [s - 1 for s in min(winners, key=lambda r: (len(r["V"]), r["V"]))["V"]] == list(V)


# ---- group lasso on node designs

def test_glasso_lambda_zero_matches_ls(net_all, design_data):
    d, innov = design_data
    design = node_design(d, innov, 8, 2, net_all.neighbors(2), net_all.R)
    fit = glasso_fit(d, innov, 8, 2, 0.0, net_all.neighbors(2), net_all.R, design=design)
    ls = np.linalg.lstsq(design.Phi, design.y, rcond=None)[0]
    assert np.linalg.norm(fit.eta - ls) / np.linalg.norm(ls) < 1e-6


def test_glasso_large_penalty_zeroes_everything(net_all, design_data):
    d, innov = design_data
    fit = glasso_fit(d, innov, 8, 2, 1e9, net_all.neighbors(2), net_all.R)
    assert np.all(fit.eta == 0) and fit.V == ()


def test_tune_lambda_grid_cases(net_all, design_data):
    d, innov = design_data
    lam, V, _ = tune_lambda(d, innov, 8, 2, net_all.neighbors(2), grid=[0], R=net_all.R)
    assert lam == 0
    # every grid point beyond the critical value yields the empty set: largest wins
    lam, V, table = tune_lambda(d, innov, 8, 2, net_all.neighbors(2), grid=[1e8, 2e8, 3e8],
                                R=net_all.R)
    assert lam == 3e8 and V == ()
    assert len({tuple(r["V"]) for r in table}) == 1


def test_glasso_topology_on_measured_noise(net_all, design_data):
    d, innov = design_data
    est = estimate_topology(d, innov, 10, "GLASSO", net_all.neighbor_sets, net_all.R,
                            grid=range(0, 2001, 100))
    pt = roc_eval(est, TopologyEstimate.from_model(net_all))
    assert pt.FP == 0
    # every edge whose strictly proper part is not tiny is found
    for (j, s), tf in net_all.H.items():
        hbar = impulse_response(tf, 10).coeffs[1:]
        if np.linalg.norm(hbar) > 0.2:
            assert s in est.V[j]


# ---- ROC

def test_roc_identity_and_complement(net_all):
    truth = TopologyEstimate.from_model(net_all)
    assert roc_eval(truth, truth).dis == 0
    comp = TopologyEstimate(tuple(tuple(s for s in range(4) if s not in v) for v in truth.V), 4)
    pt = roc_eval(comp, truth)
    assert (pt.TPR, pt.FPR) == (0.0, 1.0) and pt.dis == pytest.approx(np.sqrt(2))


def test_roc_one_miss_one_false(net_all):
    truth = TopologyEstimate.from_model(net_all)
    assert len(truth.edges) == 11
    V = [list(v) for v in truth.V]
    V[0].remove(3)       # miss H14
    V[1].append(0)       # add H21
    pt = roc_eval(TopologyEstimate(tuple(V), 4), truth)
    assert pt.TPR == pytest.approx(10 / 11) and pt.FPR == pytest.approx(1 / 13)
    assert pt.dis == pytest.approx(np.hypot(1 / 13, 1 / 11), abs=1e-12)
    assert pt.dis == pytest.approx(0.119, abs=5e-4)


def test_roc_degenerate_counts_flagged():
    empty = TopologyEstimate(((), ()), 1)
    pt = roc_eval(empty, empty)
    assert pt.TPR == 0.0 and pt.flags


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 24 - 1), st.integers(0, 2 ** 24 - 1))
def test_roc_dis_bounds(a, b):
    def topo(bits):
        return TopologyEstimate(tuple(tuple(s for s in range(4) if bits >> (4 * j + s) & 1)
                                      for j in range(6)), 4)
    pt = roc_eval(topo(a), topo(b))
    assert 0 <= pt.dis <= np.sqrt(2) + 1e-12
    assert pt.TP + pt.FP == len(topo(a).edges)


@pytest.mark.slow
def test_bic_accuracy_grows_with_N(net_all):
    truth = net_all.noise_sets
    acc = []
    for N in (300, 3873, 50000):
        hits = 0
        for seed in range(3):
            d = simulate_experiment(net_all, N, seed=[seed, N])
            n = {300: 10, 3873: 30, 50000: 40}[N]
            _, innov = fit_arx_step21(d, n, 4, net_all.R)
            est = estimate_topology(d, innov, n, "BIC", net_all.neighbor_sets, net_all.R)
            hits += sum(a == b for a, b in zip(est.V, truth))
        acc.append(hits / 18)
    assert acc[0] <= acc[1] <= acc[2]
