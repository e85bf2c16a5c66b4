import logging
from functools import partial
from typing import Any, Dict, Optional

from handlers.dispatch import BaseMiddleware, Handler
from storage.models import ExperimentConfig, RunOutcome
from utils.generators import spawn_generators


class SeedMiddleware(BaseMiddleware):
    """
    Applies a command-line seed override and hands the handler a factory of
    independent random streams derived from the master seed.
    """
    def __init__(self, seed_override: Optional[int] = None):
        self.seed_override = seed_override

    def __call__(self, handler: Handler, config: ExperimentConfig, data: Dict[str, Any]) -> RunOutcome:
        if self.seed_override is not None and self.seed_override != config.seed:
            logging.info(f"Seed overridden: {config.seed} -> {self.seed_override}")
            config.seed = self.seed_override
        data["seed"] = config.seed
        data["streams"] = partial(spawn_generators, config.seed)
        return handler(config, data)
