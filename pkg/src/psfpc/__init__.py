"""Push-sum frequency and phase consensus for distributed phased arrays,
with per-node Kalman filtering and online-EM covariance learning."""
from .config import ScenarioConfig, load_config, preset
from .kernels import BACKEND
from .oscillator import OscillatorParams
from .simulation import TrialResult, run_scenario

__version__ = "0.1.0"

__all__ = ["BACKEND", "OscillatorParams", "ScenarioConfig", "TrialResult",
           "load_config", "preset", "run_scenario", "__version__"]
