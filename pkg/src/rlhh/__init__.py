"""Column generation for VRPTW and bus driver scheduling with network-pruning
pricing heuristics chosen per iteration by a DDQN agent."""

from .engine import CgConfig, EpisodeTrace, run_cg, step_reward, terminal_reward
from .instances import (BdspInstance, VrptwInstance, generate_bdsp, load_instance, parse_solomon,
                        save_instance, truncate)
from .network import build_network, modified_costs

__version__ = "0.1.0"
