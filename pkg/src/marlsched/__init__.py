"""Multi-AP downlink scheduling with multi-agent deep RL and baselines."""

from .env import EnvConfig, NetworkEnv
from .dqn import TrainerConfig

__all__ = ["EnvConfig", "NetworkEnv", "TrainerConfig"]
__version__ = "0.1.0"
