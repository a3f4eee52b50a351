"""Budget-gated interactive imitation learning on a 2D bottleneck task.

A robot policy (bootstrapped MLP ensemble) hands control to a supervisor
at states that look novel or risky, learns from the resulting labels, and
tunes its switching thresholds online from an intervention budget. Ships
with classic baselines, a multi-robot fleet simulator, and a TCP gateway
for remote human supervision.
"""

__version__ = "0.1.0"

from .engine import RunConfig, evaluate, run_algorithm  # noqa: F401
from .env import EnvConfig  # noqa: F401
from .presets import default_config, desk_config  # noqa: F401
