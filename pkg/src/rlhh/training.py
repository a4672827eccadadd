"""Episode loop that trains the DDQN selector on CG runs."""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .agent import DDQNAgent, Hyper, Transition, feature_length
from .engine import AgentSelector, CgConfig, run_cg
from .instances import Instance, truncate

log = logging.getLogger(__name__)


@dataclass
class EpisodeLog:
    episode: int
    instance: str
    n: int
    objective: float
    obj_frac: float
    gap: float
    epsilon: float
    mean_loss: float | None
    iterations: int
    reward: float

    def as_dict(self) -> dict:
        return asdict(self)


class InstanceSampler:
    """Uniform choice among base instances, optionally truncated to a size
    drawn uniformly from ``n_range`` (inclusive)."""

    def __init__(self, instances: Sequence[Instance], n_range: tuple[int, int] | None = None,
                 seed: int = 0):
        if not instances:
            raise ValueError("no training instances")
        kinds = {inst.kind for inst in instances}
        if len(kinds) != 1:
            raise ValueError("training instances must share one problem kind")
        self.instances = list(instances)
        self.kind = kinds.pop()
        self.n_range = n_range
        self.rng = np.random.default_rng([seed, 3])

    def __call__(self) -> Instance:
        inst = self.instances[int(self.rng.integers(len(self.instances)))]
        if self.n_range is None:
            return inst
        lo, hi = self.n_range
        n = int(self.rng.integers(lo, hi + 1))
        return truncate(inst, min(n, inst.n))


def train(sampler: InstanceSampler | Sequence[Instance], episodes: int, hyper: Hyper | None = None,
          seed: int = 0, cg_config: CgConfig | None = None, time_budget: float | None = None,
          agent: DDQNAgent | None = None,
          on_episode: Callable[[EpisodeLog], None] | None = None) -> tuple[DDQNAgent, list[EpisodeLog]]:
    """Train with epsilon-greedy rollouts and one gradient step per CG iteration."""
    if not isinstance(sampler, InstanceSampler):
        sampler = InstanceSampler(sampler, seed=seed)
    hyper = hyper or Hyper()
    agent = agent or DDQNAgent(feature_length(sampler.kind), hyper, seed=seed, kind=sampler.kind)
    base = cg_config or CgConfig(record_timing=False)
    start = time.perf_counter()
    logs: list[EpisodeLog] = []

    for ep in range(episodes):
        if time_budget is not None and time.perf_counter() - start > time_budget:
            log.warning("training time budget exhausted after %d episodes", ep)
            break
        eps = hyper.epsilon(ep, episodes)
        inst = sampler()
        losses: list[float] = []
        total_reward = 0.0

        def on_transition(t: Transition):
            nonlocal total_reward
            total_reward += t.r
            agent.observe(t)
            loss = agent.train_step()
            if loss is not None:
                losses.append(loss)

        cfg = replace(base, selector="agent", seed=seed * 100_003 + ep)
        result = run_cg(inst, cfg, selector=AgentSelector(agent, eps), on_transition=on_transition)
        term = result.trace.terminal
        entry = EpisodeLog(ep, inst.name, inst.n, term.obj_int, term.obj_frac, term.gap, eps,
                           float(np.mean(losses)) if losses else None, term.iterations, total_reward)
        logs.append(entry)
        if on_episode:
            on_episode(entry)
    agent.freeze()
    return agent, logs
