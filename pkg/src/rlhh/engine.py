"""Column generation driven by a per-iteration heuristic selector."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from . import agent as rl
from .heuristics import ACTIONS, EXHAUSTED, apply_heuristic, fresh_actions
from .instances import Instance, VrptwInstance
from .labeling import DEFAULT_LABEL_BUDGET, ESPPRC, NEG_EPS, SPPRC, solve_pricing
from .network import build_network, modified_costs
from .rmp import IrmpResult, init_pool, solve_irmp, solve_lp

log = logging.getLogger(__name__)

IMPROVE_TOL = 1e-6
SELECTORS = ("full", "be1", "be2", "be3", "bn", "bp", "random", "agent")


@dataclass
class CgConfig:
    selector: str = "full"
    time_limit: float = 600.0
    eps: float = NEG_EPS
    columns_per_iteration: int = 1
    seed: int = 0
    reward_mode: str = "inverse"
    label_budget: int = DEFAULT_LABEL_BUDGET
    irmp_floor: float = 5.0
    record_timing: bool = True

    def __post_init__(self):
        if self.time_limit <= 0:
            raise ValueError("time limit must be positive")
        if self.reward_mode not in ("inverse", "literal"):
            raise ValueError(f"unknown reward mode {self.reward_mode!r}")
        if self.selector not in SELECTORS:
            raise ValueError(f"unknown selector {self.selector!r}")


# --------------------------------------------------------------------------
# Rewards
# --------------------------------------------------------------------------

def step_reward(found: bool, improved: bool) -> int:
    if improved and not found:
        raise ValueError("cannot improve the RMP without finding a column")
    if not found:
        return -1
    return 1 if improved else 0


def gap_reward(obj_int: float, obj_frac: float, mode: str = "inverse") -> float:
    """``100 ** GAP`` (literal) or ``100 ** (1 / GAP)`` (inverse), with
    ``GAP = obj_int / obj_frac``."""
    if obj_frac <= 0:
        raise ValueError("relaxed objective must be positive")
    gap = obj_int / obj_frac
    if mode == "literal":
        return 100.0 ** gap
    if mode == "inverse":
        return 100.0 ** (1.0 / gap)
    raise ValueError(f"unknown reward mode {mode!r}")


def terminal_reward(trace: "EpisodeTrace", mode: str | None = None) -> float:
    t = trace.terminal
    return gap_reward(t.obj_int, t.obj_frac, mode or trace.reward_mode)


# --------------------------------------------------------------------------
# Trace
# --------------------------------------------------------------------------

@dataclass
class IterationRecord:
    iteration: int
    objective: float
    action: str | None
    parameter: float | None
    fallback: bool
    pricing_time: float
    reduced_cost: float | None
    columns_added: int
    step_reward: int | None
    time: float


@dataclass
class TerminalRecord:
    obj_frac: float
    obj_int: float
    gap: float
    total_time: float
    iterations: int
    cg_truncated: bool
    irmp_optimal: bool
    fallbacks: int


@dataclass
class EpisodeTrace:
    instance: str
    kind: str
    n: int
    selector: str
    seed: int
    reward_mode: str
    iterations: list[IterationRecord] = field(default_factory=list)
    terminal: TerminalRecord | None = None

    @property
    def objectives(self) -> list[float]:
        return [r.objective for r in self.iterations]

    def to_jsonl(self) -> str:
        head = {"record": "episode", "instance": self.instance, "kind": self.kind, "n": self.n,
                "selector": self.selector, "seed": self.seed, "reward_mode": self.reward_mode}
        lines = [json.dumps(head)]
        lines += [json.dumps({"record": "iteration", **asdict(r)}) for r in self.iterations]
        if self.terminal is not None:
            lines.append(json.dumps({"record": "terminal", **asdict(self.terminal)}))
        return "\n".join(lines) + "\n"

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(self.to_jsonl())
        return path

    @classmethod
    def from_jsonl(cls, text: str) -> "EpisodeTrace":
        trace = None
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                kind = rec.pop("record")
                if kind == "episode":
                    trace = cls(**rec)
                elif trace is None:
                    raise ValueError("trace must start with an episode record")
                elif kind == "iteration":
                    trace.iterations.append(IterationRecord(**rec))
                elif kind == "terminal":
                    trace.terminal = TerminalRecord(**rec)
                else:
                    raise ValueError(f"unknown record type {kind!r}")
            except (ValueError, TypeError, KeyError) as exc:
                raise ValueError(f"malformed trace at line {lineno}: {exc}") from None
        if trace is None:
            raise ValueError("empty trace")
        return trace

    @classmethod
    def load(cls, path: str | Path) -> "EpisodeTrace":
        return cls.from_jsonl(Path(path).read_text())


# --------------------------------------------------------------------------
# Selectors
# --------------------------------------------------------------------------

class Selector:
    """Chooses a heuristic index per iteration, or ``None`` for the complete network."""

    needs_state = False
    name = "full"

    def __call__(self, state) -> int | None:
        return None


class FixedSelector(Selector):
    def __init__(self, action: int):
        self.action = action
        self.name = ACTIONS[action].lower()

    def __call__(self, state):
        return self.action


class RandomSelector(Selector):
    name = "random"

    def __init__(self, rng: np.random.Generator):
        self.rng = rng

    def __call__(self, state):
        return int(self.rng.integers(len(ACTIONS)))


class AgentSelector(Selector):
    needs_state = True
    name = "agent"

    def __init__(self, agent: rl.DDQNAgent, epsilon: float = 0.0):
        self.agent = agent
        self.epsilon = epsilon

    def __call__(self, state):
        return self.agent.act(state, self.epsilon)


def make_selector(config: CgConfig, agent: rl.DDQNAgent | None = None,
                  epsilon: float = 0.0) -> Selector:
    name = config.selector
    if name == "full":
        return Selector()
    if name == "random":
        return RandomSelector(np.random.default_rng([config.seed, 2]))
    if name == "agent":
        if agent is None:
            raise ValueError("agent selector needs a trained model")
        return AgentSelector(agent, epsilon)
    return FixedSelector(ACTIONS.index(name.upper()))


# --------------------------------------------------------------------------
# Main loop
# --------------------------------------------------------------------------

@dataclass
class CgResult:
    trace: EpisodeTrace
    lp: object
    irmp: IrmpResult
    pool: object


TransitionHook = Callable[[rl.Transition], None]


def run_cg(inst: Instance, config: CgConfig | None = None, agent: rl.DDQNAgent | None = None,
           selector: Selector | None = None, on_transition: TransitionHook | None = None,
           on_iteration: Callable[[IterationRecord], None] | None = None) -> CgResult:
    """Solve the root-node LP by column generation, then the integer RMP.

    Each iteration the selector picks a heuristic; its parameter schedule is
    tried in order on the reduced network, and the complete network is priced
    only when every value fails. CG stops when the complete network has no
    column below ``-eps``.
    """
    config = config or CgConfig()
    selector = selector or make_selector(config, agent)
    clock = time.perf_counter
    start = clock()

    net = build_network(inst)
    mode = ESPPRC if isinstance(inst, VrptwInstance) else SPPRC
    pool = init_pool(inst, net)
    lp = solve_lp(pool)
    initial_obj = lp.objective
    actions = fresh_actions()
    heur_rng = np.random.default_rng([config.seed, 1])
    timing = config.record_timing

    needs_state = selector.needs_state or on_transition is not None
    net_feats = rl.network_features(net) if needs_state else None

    def state_of(lp_state, cbar):
        return rl.featurize(lp_state.x, lp_state.objective, lp_state.duals, cbar, net,
                            initial_obj, net_feats)

    trace = EpisodeTrace(inst.name, inst.kind, inst.n, selector.name, config.seed, config.reward_mode)
    cbar = modified_costs(net, lp.duals)
    state = state_of(lp, cbar) if needs_state else None
    pending: rl.Transition | None = None
    cg_truncated = False
    fallbacks = 0
    it = 0

    def price(view):
        return solve_pricing(view, cbar, mode, config.label_budget, config.eps,
                             config.columns_per_iteration)

    while True:
        if clock() - start > config.time_limit:
            cg_truncated = True
            log.info("%s: CG time limit reached after %d iterations", inst.name, it)
            break
        t0 = clock()
        action = selector(state)
        found = None
        param = None
        if action is not None:
            ha = actions[action]
            while (value := ha.current()) is not EXHAUSTED:
                mask = apply_heuristic(action, net, lp.duals, cbar, value, heur_rng)
                res = price(net.view(mask))
                if res:
                    found, param = res, value
                    break
                ha.fail()
        fallback = found is None
        result = found if found is not None else price(net.full_view())
        fallbacks += fallback
        pricing_time = clock() - t0

        added = sum(pool.add(col) for col in result.columns)
        prev_obj = lp.objective
        converged = added == 0
        if result.columns and not added:
            log.warning("%s: priced columns already in pool; stopping", inst.name)
        if not converged:
            lp = solve_lp(pool, lp)
        improved = prev_obj - lp.objective > IMPROVE_TOL
        # a fallback column may improve the RMP but the selected heuristic still failed
        reward = step_reward(found is not None, improved and found is not None) if action is not None else None

        rec = IterationRecord(
            iteration=it,
            objective=lp.objective,
            action=ACTIONS[action] if action is not None else None,
            parameter=float(param) if param is not None else None,
            fallback=fallback,
            pricing_time=pricing_time if timing else 0.0,
            reduced_cost=result.columns[0].reduced_cost if result.columns else None,
            columns_added=added,
            step_reward=reward,
            time=(clock() - start) if timing else 0.0,
        )
        trace.iterations.append(rec)
        if on_iteration:
            on_iteration(rec)
        it += 1

        if converged:
            if action is not None and needs_state:
                if pending is not None and on_transition:
                    on_transition(pending)
                pending = rl.Transition(state, action, float(reward), state, True)
            break
        cbar = modified_costs(net, lp.duals)
        next_state = state_of(lp, cbar) if needs_state else None
        if action is not None and needs_state:
            if pending is not None and on_transition:
                on_transition(pending)
            pending = rl.Transition(state, action, float(reward), next_state, False)
        state = next_state

    irmp_budget = max(config.time_limit - (clock() - start), config.irmp_floor)
    irmp = solve_irmp(pool, irmp_budget)
    obj_frac = lp.objective
    trace.terminal = TerminalRecord(
        obj_frac=obj_frac,
        obj_int=irmp.objective,
        gap=irmp.objective / obj_frac,
        total_time=(clock() - start) if timing else 0.0,
        iterations=it,
        cg_truncated=cg_truncated,
        irmp_optimal=irmp.optimal,
        fallbacks=fallbacks,
    )
    if pending is not None and on_transition:
        pending.r += terminal_reward(trace)
        pending.terminal = True
        on_transition(pending)
    return CgResult(trace, lp, irmp, pool)
