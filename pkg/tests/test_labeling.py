import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_bdsp, make_vrptw, random_duals, random_small_instance
from rlhh.labeling import (
    ESPPRC, SPPRC, Label, dominance, enumerate_all_columns, replay_feasible, solve_pricing,
)
from rlhh.network import build_network, modified_costs


def dfs_min(net, cbar, elementary):
    """Independent recursive oracle: minimum modified cost over feasible paths."""
    out = {}
    for e, t in enumerate(net.tails):
        out.setdefault(int(t), []).append(e)
    best = [np.inf]

    def walk(v, res, cost, seen):
        for e in out.get(v, ()):
            j = int(net.heads[e])
            if elementary and j in seen:
                continue
            r = np.maximum(np.where(net.resets[e], 0.0, res) + net.consumption[e], net.lower[j])
            if np.any(r > net.upper[j]):
                continue
            c = cost + cbar[e]
            if j == net.sink:
                best[0] = min(best[0], c)
            else:
                walk(j, r, c, seen | {j})

    walk(0, net.lower[0].copy(), 0.0, {0})
    return best[0]


def one_customer_net():
    return build_network(make_vrptw([(0, 0, 0, 0, 100, 0), (1, 0, 1, 0, 100, 0)]))


def test_no_negative_column():
    net = one_customer_net()
    assert not solve_pricing(net, np.array([1.0, 1.0]))


def test_single_negative_column():
    net = one_customer_net()
    cbar = np.empty(2)
    cbar[net.edge_index[(0, 1)]] = -5.0
    cbar[net.edge_index[(1, 2)]] = 1.0
    res = solve_pricing(net, cbar)
    assert len(res) == 1
    assert res[0].reduced_cost == pytest.approx(-4.0)
    assert res[0].nodes == (1,)


@pytest.mark.parametrize("seed", range(30))
def test_matches_recursive_oracle_vrptw(seed):
    inst = random_small_instance(seed, "VRPTW", n=8)
    net = build_network(inst)
    cbar = modified_costs(net, random_duals(net, seed))
    res = solve_pricing(net, cbar, ESPPRC, eps=-np.inf)
    assert res[0].reduced_cost == pytest.approx(dfs_min(net, cbar, True), abs=1e-9)


@pytest.mark.parametrize("seed", range(30))
def test_matches_recursive_oracle_bdsp(seed):
    inst = random_small_instance(seed, "BDSP", n=9)
    net = build_network(inst)
    cbar = modified_costs(net, random_duals(net, seed))
    res = solve_pricing(net, cbar, SPPRC, eps=-np.inf)
    assert res[0].reduced_cost == pytest.approx(dfs_min(net, cbar, False), abs=1e-9)


@given(st.integers(0, 100_000), st.sampled_from(["VRPTW", "BDSP"]))
@settings(max_examples=60, deadline=None)
def test_dominance_does_not_change_optimum(seed, kind):
    inst = random_small_instance(seed, kind, n=7)
    net = build_network(inst)
    cbar = modified_costs(net, random_duals(net, seed))
    mode = ESPPRC if kind == "VRPTW" else SPPRC
    a = solve_pricing(net, cbar, mode, eps=-np.inf)
    b = solve_pricing(net, cbar, mode, eps=-np.inf, use_dominance=False)
    assert a[0].reduced_cost == pytest.approx(b[0].reduced_cost, abs=1e-9)
    assert a.labels <= b.labels


@given(st.integers(0, 100_000), st.sampled_from(["VRPTW", "BDSP"]))
@settings(max_examples=60, deadline=None)
def test_returned_columns_are_feasible_and_sorted(seed, kind):
    inst = random_small_instance(seed, kind, n=10)
    net = build_network(inst)
    cbar = modified_costs(net, random_duals(net, seed))
    mode = ESPPRC if kind == "VRPTW" else SPPRC
    res = solve_pricing(net, cbar, mode, max_columns=None)
    rcs = [c.reduced_cost for c in res]
    assert rcs == sorted(rcs)
    for col in res:
        assert col.reduced_cost < -1e-6
        assert replay_feasible(net, col)
        assert len(set(col.nodes)) == len(col.nodes)
        assert col.reduced_cost == pytest.approx(cbar[list(col.edges)].sum(), abs=1e-9)
        assert col.cost == pytest.approx(net.costs[list(col.edges)].sum(), abs=1e-9)


@given(st.integers(0, 100_000))
@settings(max_examples=40, deadline=None)
def test_masked_pricing_is_sound(seed):
    inst = random_small_instance(seed, "VRPTW", n=8)
    net = build_network(inst)
    cbar = modified_costs(net, random_duals(net, seed))
    rng = np.random.default_rng(seed)
    mask = rng.random(net.n_edges) < 0.6
    view = net.view(mask)
    full = solve_pricing(net, cbar, eps=-np.inf)
    sub = solve_pricing(view, cbar, eps=-np.inf)
    if sub:
        assert all(mask[e] for e in sub[0].edges)
        assert sub[0].reduced_cost >= full[0].reduced_cost - 1e-9
        oracle = enumerate_all_columns(view, cbar)
        assert sub[0].reduced_cost == pytest.approx(min(c.reduced_cost for c in oracle), abs=1e-9)
    else:
        assert enumerate_all_columns(view, cbar) == []


def test_label_budget_truncates():
    inst = random_small_instance(3, "VRPTW", n=10)
    net = build_network(inst)
    cbar = modified_costs(net, random_duals(net, 3))
    res = solve_pricing(net, cbar, label_budget=5)
    assert res.truncated
    assert res.labels <= 6
    with pytest.raises(ValueError):
        solve_pricing(net, cbar, label_budget=0)


def test_dominance_definition():
    a = Label(3, 1.0, (2.0, 3.0), 0b1001, None, -1)
    same = Label(3, 1.0, (2.0, 3.0), 0b1001, None, -1)
    assert not dominance(a, same)
    dearer = Label(3, 2.0, (2.0, 3.0), 0b1001, None, -1)
    assert dominance(a, dearer) and not dominance(dearer, a)
    more_visited = Label(3, 1.0, (2.0, 3.0), 0b1011, None, -1)
    assert dominance(a, more_visited)
    later = Label(3, 0.5, (2.5, 3.0), 0b1001, None, -1)
    assert not dominance(a, later) and not dominance(later, a)
    with pytest.raises(ValueError):
        dominance(a, Label(4, 0.0, (0.0, 0.0), 0, None, -1))


def test_enumeration_one_customer():
    net = one_customer_net()
    assert len(enumerate_all_columns(net, np.zeros(net.n_edges))) == 1


def test_enumeration_two_compatible_customers():
    net = build_network(make_vrptw([(0, 0, 0, 0, 500, 0), (5, 0, 1, 0, 400, 1), (0, 5, 1, 0, 400, 1)]))
    paths = {c.nodes for c in enumerate_all_columns(net, np.zeros(net.n_edges))}
    assert paths == {(1,), (2,), (1, 2), (2, 1)}


def test_enumeration_size_guard():
    inst = random_small_instance(0, "BDSP", n=13)
    net = build_network(inst)
    with pytest.raises(ValueError, match="refused"):
        enumerate_all_columns(net, np.zeros(net.n_edges))


def test_bdsp_resources_enforced():
    # three back-to-back trips exceed 200 min of continuous driving
    inst = make_bdsp([(0, 80), (90, 170), (180, 260)], max_continuous=200, break_threshold=30)
    net = build_network(inst)
    paths = {c.nodes for c in enumerate_all_columns(net, np.zeros(net.n_edges), SPPRC)}
    assert (1, 2, 3) not in paths and (1, 2) in paths and (1, 3) in paths
