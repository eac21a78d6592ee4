"""
Experiment registry and error translation for the command line.
"""
import logging
from typing import Callable, Dict

from src.cil import HarnessError, NumericFailureError
from src.experiments.bias import exp_bias_check
from src.experiments.cil_runs import exp_ablation, exp_cil_run, exp_oracle
from src.experiments.exceptions import ConfigError, ExperimentError
from src.experiments.toy import exp_toy_gaussian
from src.gradcheck import NonFiniteValueError
from src.metrics import MetricsError
from src.models import RunConfig
from src.norm import NormLayerError
from src.tensor import TensorError

logger = logging.getLogger(__name__)

EXPERIMENTS: Dict[str, Callable[[RunConfig], object]] = {
    "toy-gaussian": exp_toy_gaussian,
    "bias-check": exp_bias_check,
    "cil-run": exp_cil_run,
    "ablation": exp_ablation,
    "oracle": exp_oracle,
}


def run_experiment(config: RunConfig):
    """
    Dispatch ``config.experiment`` to its driver.

    Library errors that stem from the configuration (shapes, group counts,
    split factors) become ConfigError; numeric failures pass through
    unchanged; anything else from the harness becomes ExperimentError.

    Raises:
        ConfigError: Unknown experiment or invalid layer/batch configuration
        NumericFailureError: Training diverged
        ExperimentError: Any other failure inside the experiment
    """
    driver = EXPERIMENTS.get(config.experiment)
    if driver is None:
        raise ConfigError(
            f"Unknown experiment: {config.experiment} (choose from {', '.join(EXPERIMENTS)})"
        )
    logger.info(f"running {config.experiment} with seeds {config.seeds}")
    try:
        return driver(config)
    except (ExperimentError, NumericFailureError, NonFiniteValueError):
        raise
    except (NormLayerError, TensorError) as e:
        logger.error(f"{config.experiment} rejected its configuration: {e}")
        raise ConfigError(str(e)) from e
    except (HarnessError, MetricsError) as e:
        logger.error(f"{config.experiment} failed: {e}")
        raise ExperimentError(str(e)) from e
