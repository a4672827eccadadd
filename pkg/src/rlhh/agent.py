"""DDQN heuristic-selection agent.

State features, a small numpy MLP with hand-written backprop and Adam, a FIFO
replay buffer and the double-Q training rule.
"""

from __future__ import annotations

import base64
import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .network import PricingNetwork

N_ACTIONS = 5
MODEL_MAGIC = "RLHH-MODEL v1"
ENTROPY_BINS = 10
FRACTIONAL_TOL = 1e-6


def feature_length(kind: str) -> int:
    return 3 + 3 * 5 + (2 if kind == "VRPTW" else 3)


# --------------------------------------------------------------------------
# State features
# --------------------------------------------------------------------------

def entropy(values) -> float:
    """Shannon entropy (nats) of a 10-bin equal-width histogram."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return 0.0
    counts, _ = np.histogram(values, bins=ENTROPY_BINS)
    p = counts[counts > 0] / values.size
    return float(-(p * np.log(p)).sum()) + 0.0


def _stats(values) -> list[float]:
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return [0.0] * 5
    return [float(values.min()), float(values.max()), float(values.mean()),
            float(values.std()), entropy(values)]


def network_features(net: PricingNetwork) -> list[float]:
    """Dual-independent part: edge-cost statistics and resource CVs."""
    out = _stats(net.costs)
    cvs = []
    for r in range(len(net.resources)):
        col = net.consumption[:, r]
        mean = col.mean() if col.size else 0.0
        cvs.append(float(col.std() / mean) if mean != 0 else 0.0)
    return out + cvs


def featurize(x: np.ndarray, objective: float, duals, cbar, net: PricingNetwork,
              initial_objective: float, net_feats: list[float] | None = None) -> np.ndarray:
    """Fixed-length state vector for the current CG iterate.

    Layout: objective ratio, mean fractional value, fractional share, then
    (min, max, mean, std, entropy) of duals, edge costs and modified costs,
    then one coefficient of variation per resource.
    """
    x = np.asarray(x)
    frac = x[(x > FRACTIONAL_TOL) & (x < 1 - FRACTIONAL_TOL)]
    nf = net_feats if net_feats is not None else network_features(net)
    feats = [
        objective / initial_objective if initial_objective else 0.0,
        float(frac.sum() / frac.size) if frac.size else 0.0,
        float(frac.size / x.size) if x.size else 0.0,
    ]
    feats += _stats(duals)
    feats += nf[:5]
    feats += _stats(cbar)
    feats += nf[5:]
    return np.asarray(feats, dtype=float)


class RunningNorm:
    """Online mean/variance (Welford) used to standardize features."""

    def __init__(self, size: int):
        self.count = 0
        self.mean = np.zeros(size)
        self.m2 = np.zeros(size)
        self.frozen = False

    def update(self, x):
        if self.frozen:
            return
        x = np.asarray(x, dtype=float)
        self.count += 1
        delta = x - self.mean
        self.mean = self.mean + delta / self.count
        self.m2 = self.m2 + delta * (x - self.mean)

    @property
    def std(self) -> np.ndarray:
        if self.count < 2:
            return np.ones_like(self.mean)
        s = np.sqrt(self.m2 / (self.count - 1))
        return np.where(s > 1e-8, s, 1.0)

    def __call__(self, x):
        return (np.asarray(x, dtype=float) - self.mean) / self.std


# --------------------------------------------------------------------------
# MLP Q-function
# --------------------------------------------------------------------------

class QNetwork:
    """ReLU MLP producing one score per action."""

    def __init__(self, n_inputs: int, hidden=(128, 128), n_outputs: int = N_ACTIONS,
                 rng: np.random.Generator | None = None):
        rng = rng if rng is not None else np.random.default_rng(0)
        sizes = [n_inputs, *hidden, n_outputs]
        self.weights = []
        self.biases = []
        for a, b in zip(sizes, sizes[1:]):
            self.weights.append(rng.normal(0.0, np.sqrt(2.0 / a), size=(a, b)))
            self.biases.append(np.zeros(b))

    @property
    def n_inputs(self) -> int:
        return self.weights[0].shape[0]

    @property
    def params(self) -> list[np.ndarray]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    def copy(self) -> "QNetwork":
        other = QNetwork.__new__(QNetwork)
        other.weights = [w.copy() for w in self.weights]
        other.biases = [b.copy() for b in self.biases]
        return other

    def load_from(self, other: "QNetwork"):
        for dst, src in zip(self.params, other.params):
            dst[...] = src

    def forward(self, X, cache: bool = False):
        h = np.atleast_2d(np.asarray(X, dtype=float))
        if h.shape[1] != self.n_inputs:
            raise ValueError(f"expected {self.n_inputs} features, got {h.shape[1]}")
        acts = [h]
        last = len(self.weights) - 1
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ W + b
            if k < last:
                h = np.maximum(h, 0.0)
            acts.append(h)
        return (h, acts) if cache else h

    def backward(self, acts, grad_out) -> list[np.ndarray]:
        """Gradients of ``sum(grad_out * output)`` w.r.t. ``params``."""
        grads = []
        g = grad_out
        for k in range(len(self.weights) - 1, -1, -1):
            grads.append(g.sum(axis=0))               # bias
            grads.append(acts[k].T @ g)               # weight
            if k > 0:
                g = (g @ self.weights[k].T) * (acts[k] > 0)
        grads.reverse()
        return grads


def q_forward(netw: QNetwork, state) -> np.ndarray:
    """Action scores for one state (or a batch)."""
    out = netw.forward(state)
    return out[0] if np.ndim(state) == 1 else out


def greedy_action(scores) -> int:
    return int(np.argmax(scores))  # first maximum wins ties


class Adam:
    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        c1 = 1 - self.beta1 ** self.t
        c2 = 1 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


# --------------------------------------------------------------------------
# Replay and DDQN update
# --------------------------------------------------------------------------

@dataclass
class Transition:
    s: np.ndarray
    a: int
    r: float
    s2: np.ndarray
    terminal: bool


class ReplayBuffer:
    """Fixed-capacity FIFO ring buffer."""

    def __init__(self, capacity: int, n_features: int):
        self.capacity = capacity
        self.s = np.zeros((capacity, n_features))
        self.s2 = np.zeros((capacity, n_features))
        self.a = np.zeros(capacity, dtype=np.int64)
        self.r = np.zeros(capacity)
        self.done = np.zeros(capacity, dtype=bool)
        self.write = 0
        self.size = 0

    def __len__(self):
        return self.size

    def push(self, t: Transition):
        i = self.write
        self.s[i], self.a[i], self.r[i], self.s2[i], self.done[i] = t.s, t.a, t.r, t.s2, t.terminal
        self.write = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator):
        idx = rng.choice(self.size, size=batch_size, replace=False)
        return self.s[idx], self.a[idx], self.r[idx], self.s2[idx], self.done[idx]

    def contents(self) -> list[Transition]:
        """Stored transitions, oldest first."""
        start = self.write if self.size == self.capacity else 0
        order = [(start + k) % self.capacity for k in range(self.size)]
        return [Transition(self.s[i], int(self.a[i]), float(self.r[i]), self.s2[i], bool(self.done[i]))
                for i in order]


def ddqn_target(rewards, next_states, terminal, online: QNetwork, target: QNetwork,
                gamma: float) -> np.ndarray:
    """``r`` for terminal samples, else ``r + gamma * Q_target(s', argmax_a Q_online(s', a))``."""
    rewards = np.asarray(rewards, dtype=float)
    terminal = np.asarray(terminal, dtype=bool)
    best = np.argmax(online.forward(next_states), axis=1)
    boot = target.forward(next_states)[np.arange(len(best)), best]
    return np.where(terminal, rewards, rewards + gamma * boot)


def dqn_target(rewards, next_states, terminal, netw: QNetwork, gamma: float) -> np.ndarray:
    """Plain max-operator target, kept for ablations."""
    boot = netw.forward(next_states).max(axis=1)
    return np.where(np.asarray(terminal, bool), rewards, np.asarray(rewards) + gamma * boot)


def td_loss_and_grads(netw: QNetwork, states, actions, targets):
    """Squared-error loss over the taken actions and its parameter gradients."""
    q, acts = netw.forward(states, cache=True)
    rows = np.arange(len(actions))
    err = q[rows, actions] - targets
    grad_out = np.zeros_like(q)
    grad_out[rows, actions] = 2.0 * err
    return float((err ** 2).sum()), netw.backward(acts, grad_out)


@dataclass
class Hyper:
    gamma: float = 0.99
    hidden: tuple = (128, 128)
    lr: float = 1e-3
    batch_size: int = 64
    buffer_size: int = 100_000
    target_sync: int = 200
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_fraction: float = 0.3
    double: bool = True

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)

    def epsilon(self, episode: int, episodes: int) -> float:
        span = max(1.0, self.eps_fraction * episodes)
        frac = min(1.0, episode / span)
        return self.eps_start + frac * (self.eps_end - self.eps_start)


class DDQNAgent:
    """Online/target Q-networks, replay buffer and feature normalizer."""

    def __init__(self, n_features: int, hyper: Hyper | None = None, seed: int = 0,
                 kind: str = ""):
        self.hyper = hyper or Hyper()
        self.kind = kind
        self.n_features = n_features
        seeds = np.random.SeedSequence(seed).spawn(3)
        self.online = QNetwork(n_features, self.hyper.hidden, rng=np.random.default_rng(seeds[0]))
        self.target = self.online.copy()
        self.optimizer = Adam(self.online.params, lr=self.hyper.lr)
        self.buffer = ReplayBuffer(self.hyper.buffer_size, n_features)
        self.norm = RunningNorm(n_features)
        self.rng = np.random.default_rng(seeds[1])
        self.sample_rng = np.random.default_rng(seeds[2])
        self.grad_steps = 0

    def scores(self, state) -> np.ndarray:
        return q_forward(self.online, self.norm(state))

    def act(self, state, epsilon: float = 0.0) -> int:
        if epsilon > 0 and self.rng.random() < epsilon:
            return int(self.rng.integers(N_ACTIONS))
        return greedy_action(self.scores(state))

    def observe(self, t: Transition):
        self.norm.update(t.s)
        self.buffer.push(t)

    def train_step(self) -> float | None:
        """One gradient step on a uniform mini-batch; ``None`` if the buffer
        holds fewer than a batch. Returns the loss before the update."""
        h = self.hyper
        if len(self.buffer) < h.batch_size:
            return None
        s, a, r, s2, done = self.buffer.sample(h.batch_size, self.sample_rng)
        s, s2 = self.norm(s), self.norm(s2)
        if h.double:
            y = ddqn_target(r, s2, done, self.online, self.target, h.gamma)
        else:
            y = dqn_target(r, s2, done, self.target, h.gamma)
        loss, grads = td_loss_and_grads(self.online, s, a, y)
        self.optimizer.step(self.online.params, grads)
        self.grad_steps += 1
        if self.grad_steps % h.target_sync == 0:
            self.sync_target()
        return loss

    def sync_target(self):
        self.target.load_from(self.online)

    def freeze(self):
        self.norm.frozen = True


def train_step(agent: DDQNAgent) -> float | None:
    return agent.train_step()


# --------------------------------------------------------------------------
# Checkpoints
# --------------------------------------------------------------------------

class ModelError(ValueError):
    pass


def _enc(a: np.ndarray) -> dict:
    a = np.ascontiguousarray(a, dtype="<f8")
    return {"shape": list(a.shape), "data": base64.b64encode(a.tobytes()).decode("ascii")}


def _dec(d: dict) -> np.ndarray:
    return np.frombuffer(base64.b64decode(d["data"]), dtype="<f8").reshape(d["shape"]).copy()


def save_model(agent: DDQNAgent, path: str | Path, extra: dict | None = None) -> Path:
    payload = {
        "kind": agent.kind,
        "n_features": agent.n_features,
        "hyper": asdict(agent.hyper),
        "norm": {"count": agent.norm.count, "mean": _enc(agent.norm.mean), "m2": _enc(agent.norm.m2)},
        "weights": [_enc(w) for w in agent.online.weights],
        "biases": [_enc(b) for b in agent.online.biases],
        "extra": extra or {},
    }
    body = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    digest = hashlib.sha256(body.encode()).hexdigest()
    path = Path(path)
    path.write_text(f"{MODEL_MAGIC}\nsha256 {digest}\n{body}\n")
    return path


def load_model(path: str | Path, kind: str | None = None) -> DDQNAgent:
    """Load a checkpoint; ``kind`` guards against problem-type mismatches."""
    text = Path(path).read_text()
    lines = text.split("\n", 2)
    if len(lines) < 3 or lines[0] != MODEL_MAGIC:
        raise ModelError("not an RLHH model file or unsupported version")
    if not lines[1].startswith("sha256 "):
        raise ModelError("missing checksum line")
    body = lines[2].rstrip("\n")
    if hashlib.sha256(body.encode()).hexdigest() != lines[1][7:]:
        raise ModelError("checksum mismatch: corrupted model file")
    payload = json.loads(body)
    if kind is not None:
        if payload["kind"] and payload["kind"] != kind:
            raise ModelError(f"model trained for {payload['kind']}, not {kind}")
        if payload["n_features"] != feature_length(kind):
            raise ModelError(f"model expects {payload['n_features']} features, "
                             f"{kind} produces {feature_length(kind)}")
    hyper = Hyper(**payload["hyper"])
    agent = DDQNAgent(payload["n_features"], hyper, kind=payload["kind"])
    agent.online.weights = [_dec(w) for w in payload["weights"]]
    agent.online.biases = [_dec(b) for b in payload["biases"]]
    agent.target = agent.online.copy()
    agent.optimizer = Adam(agent.online.params, lr=hyper.lr)
    agent.norm.count = payload["norm"]["count"]
    agent.norm.mean = _dec(payload["norm"]["mean"])
    agent.norm.m2 = _dec(payload["norm"]["m2"])
    agent.freeze()
    agent.extra = payload.get("extra", {})
    return agent
