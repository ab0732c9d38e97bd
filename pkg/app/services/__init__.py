from app.services.experiment import compare_modes, run_experiment
from app.services.network import Network

__all__ = ["Network", "compare_modes", "run_experiment"]
