import numpy as np
import pytest
from scipy import stats

from conftest import random_small_instance
from rlhh.agent import (
    DDQNAgent, Hyper, ModelError, QNetwork, ReplayBuffer, RunningNorm, Transition, ddqn_target,
    entropy, feature_length, featurize, greedy_action, load_model, network_features, q_forward,
    save_model, td_loss_and_grads,
)
from rlhh.network import build_network, modified_costs
from rlhh.rmp import init_pool, solve_lp


def small_net(seed=0, hidden=(6, 5), n_in=4, n_out=3):
    return QNetwork(n_in, hidden, n_out, np.random.default_rng(seed))


@pytest.mark.parametrize("seed", range(3))
def test_gradients_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    netw = small_net(seed)
    # nonzero biases keep pre-activations away from the ReLU kink at exactly 0
    for b in netw.biases:
        b[...] = rng.normal(scale=0.5, size=b.shape)
    X = rng.normal(size=(7, 4))
    a = rng.integers(0, 3, size=7)
    y = rng.normal(size=7)
    _, grads = td_loss_and_grads(netw, X, a, y)
    h = 1e-5
    for p, g in zip(netw.params, grads):
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + h
            up, _ = td_loss_and_grads(netw, X, a, y)
            p[idx] = old - h
            down, _ = td_loss_and_grads(netw, X, a, y)
            p[idx] = old
            fd = (up - down) / (2 * h)
            assert abs(fd - g[idx]) <= 1e-4 * max(1.0, abs(fd), abs(g[idx]))


def linear_net(W, b):
    netw = QNetwork(2, (), 2)
    netw.weights = [np.asarray(W, float)]
    netw.biases = [np.asarray(b, float)]
    return netw


def test_ddqn_target_by_hand():
    online = linear_net([[1.0, 2.0], [0.0, -1.0]], [0.0, 0.5])
    target = linear_net([[3.0, -1.0], [1.0, 1.0]], [0.1, 0.0])
    s2 = np.array([[1.0, 1.0], [2.0, 0.0]])
    # online: [1, 1.5] -> action 1; [2, 4.5] -> action 1
    # target: [4.1, 0] and [6.1, -2] -> pick column 1: 0 and -2
    y = ddqn_target([1.0, 0.5], s2, [False, False], online, target, 0.9)
    np.testing.assert_allclose(y, [1.0 + 0.9 * 0.0, 0.5 + 0.9 * -2.0])
    # a plain max over the target network would bootstrap from column 0 instead
    assert not np.allclose(y, [1.0 + 0.9 * 4.1, 0.5 + 0.9 * 6.1])


def test_terminal_and_zero_gamma_targets():
    netw = small_net(1, n_in=2, n_out=2)
    s2 = np.random.default_rng(0).normal(size=(4, 2))
    r = np.array([1.0, -1.0, 0.0, 3.0])
    np.testing.assert_array_equal(ddqn_target(r, s2, [True] * 4, netw, netw, 0.99), r)
    np.testing.assert_array_equal(ddqn_target(r, s2, [False] * 4, netw, netw, 0.0), r)


def test_zero_network_ties_to_first_action():
    netw = small_net()
    for p in netw.params:
        p[...] = 0
    scores = q_forward(netw, np.ones(4))
    np.testing.assert_array_equal(scores, 0)
    assert greedy_action(scores) == 0


def test_final_layer_scaling_keeps_argmax():
    netw = small_net(3)
    X = np.random.default_rng(1).normal(size=(20, 4))
    before = netw.forward(X).argmax(axis=1)
    netw.weights[-1] *= 3.7
    netw.biases[-1] *= 3.7
    np.testing.assert_array_equal(netw.forward(X).argmax(axis=1), before)


def test_zero_error_leaves_weights():
    agent = DDQNAgent(4, Hyper(hidden=(8,), batch_size=4, gamma=0.0), seed=0)
    for p in agent.online.params:
        p[...] = 0
    for k in range(4):
        agent.observe(Transition(np.full(4, k), k % 5, 0.0, np.zeros(4), True))
    before = [p.copy() for p in agent.online.params]
    assert agent.train_step() == 0.0
    for p, q in zip(before, agent.online.params):
        np.testing.assert_allclose(p, q, atol=1e-12)


def test_single_transition_regression():
    # one observation standardizes to the zero vector, so only the biases learn
    agent = DDQNAgent(3, Hyper(hidden=(16, 16), lr=1e-2, batch_size=1, target_sync=10**9), seed=2)
    agent.observe(Transition(np.array([0.5, -1.0, 2.0]), 2, 7.0, np.zeros(3), True))
    losses = np.array([agent.train_step() for _ in range(3000)])
    assert losses[0] == pytest.approx(49.0)
    assert np.all(np.diff(losses) <= 0)
    assert losses[-1] < 1e-8


def test_underfull_buffer_skips():
    agent = DDQNAgent(3, Hyper(batch_size=8), seed=0)
    agent.observe(Transition(np.zeros(3), 0, 1.0, np.zeros(3), True))
    assert agent.train_step() is None


def test_replay_fifo():
    buf = ReplayBuffer(3, 1)
    for k in range(5):
        buf.push(Transition(np.array([k]), 0, float(k), np.array([k]), False))
    assert len(buf) == 3
    assert [t.r for t in buf.contents()] == [2.0, 3.0, 4.0]


def test_epsilon_one_is_uniform():
    agent = DDQNAgent(3, seed=0)
    counts = np.bincount([agent.act(np.zeros(3), 1.0) for _ in range(1000)], minlength=5)
    sigma = np.sqrt(1000 * 0.2 * 0.8)
    assert np.all(np.abs(counts - 200) <= 3 * sigma)


def test_epsilon_one_pooled_chi_square():
    counts = np.zeros(5)
    for seed in range(20):
        agent = DDQNAgent(3, seed=seed)
        counts += np.bincount([agent.act(np.zeros(3), 1.0) for _ in range(1000)], minlength=5)
    assert stats.chisquare(counts).pvalue > 1e-3


def test_epsilon_schedule():
    h = Hyper()
    assert h.epsilon(0, 100) == 1.0
    assert h.epsilon(30, 100) == pytest.approx(0.05)
    assert h.epsilon(99, 100) == pytest.approx(0.05)
    assert h.epsilon(15, 100) == pytest.approx(0.525)


def test_running_norm_matches_numpy():
    rng = np.random.default_rng(0)
    X = rng.normal(3.0, 2.0, size=(50, 4))
    norm = RunningNorm(4)
    for x in X:
        norm.update(x)
    np.testing.assert_allclose(norm.mean, X.mean(axis=0))
    np.testing.assert_allclose(norm.std, X.std(axis=0, ddof=1))
    norm.frozen = True
    norm.update(np.full(4, 1e6))
    np.testing.assert_allclose(norm.mean, X.mean(axis=0))


def test_features():
    inst = random_small_instance(3, "VRPTW", n=8)
    net = build_network(inst)
    lp = solve_lp(init_pool(inst, net))
    f = featurize(lp.x, lp.objective, lp.duals, modified_costs(net, lp.duals), net, lp.objective)
    assert f.shape == (feature_length("VRPTW"),)
    assert f[0] == 1.0
    assert f[1] == 0 and f[2] == 0                 # singleton LP is integral
    const = featurize(lp.x, lp.objective, np.full(net.n, 2.0), net.costs, net, lp.objective)
    assert const[3 + 3] == 0 and const[3 + 4] == 0  # std and entropy of the duals
    assert feature_length("BDSP") == 21
    assert len(network_features(build_network(random_small_instance(3, "BDSP", n=5)))) == 8


def test_entropy():
    assert entropy([1.0, 1.0, 1.0]) == 0.0
    assert entropy(np.arange(10.0)) == pytest.approx(np.log(10))
    assert entropy([]) == 0.0


def trained_agent(kind="VRPTW", seed=4):
    agent = DDQNAgent(feature_length(kind), Hyper(hidden=(16,), batch_size=4), seed=seed, kind=kind)
    rng = np.random.default_rng(seed)
    n = feature_length(kind)
    for k in range(12):
        agent.observe(Transition(rng.normal(size=n), k % 5, float(k), rng.normal(size=n), k == 11))
        agent.train_step()
    agent.freeze()
    return agent


def test_save_load_bitwise(tmp_path):
    agent = trained_agent()
    path = save_model(agent, tmp_path / "m.rlhh.model")
    loaded = load_model(path, kind="VRPTW")
    X = np.random.default_rng(0).normal(size=(10, feature_length("VRPTW")))
    for x in X:
        assert np.array_equal(agent.scores(x), loaded.scores(x))
    # resaving reproduces the file byte for byte
    again = save_model(loaded, tmp_path / "m2.rlhh.model")
    assert path.read_bytes() == again.read_bytes()


def test_load_guards(tmp_path):
    path = save_model(trained_agent("BDSP"), tmp_path / "b.rlhh.model")
    with pytest.raises(ModelError, match="BDSP"):
        load_model(path, kind="VRPTW")
    text = path.read_text()
    pos = text.index('"weights"') + 40
    corrupted = text[:pos] + ("A" if text[pos] != "A" else "B") + text[pos + 1:]
    bad = tmp_path / "bad.rlhh.model"
    bad.write_text(corrupted)
    with pytest.raises(ModelError, match="checksum"):
        load_model(bad)
    other = tmp_path / "other.txt"
    other.write_text("hello\n")
    with pytest.raises(ModelError):
        load_model(other)


def test_agent_seed_determinism():
    a, b = trained_agent(seed=7), trained_agent(seed=7)
    for p, q in zip(a.online.params, b.online.params):
        assert np.array_equal(p, q)
