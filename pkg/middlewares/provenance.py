import hashlib
import json
import logging
from typing import Any, Dict

from handlers.dispatch import BaseMiddleware, Handler
from storage.models import ExperimentConfig, RunOutcome
from storage.results import ResultWriter
from utils.logger import run_context


def config_hash(config: ExperimentConfig) -> str:
    canonical = json.dumps(config.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class ProvenanceMiddleware(BaseMiddleware):
    """
    Stamps the run with its config hash, tool version, seed and tolerances,
    and writes the stamped summary once the handler returns.
    """
    def __init__(self, version: str):
        self.version = version

    def __call__(self, handler: Handler, config: ExperimentConfig, data: Dict[str, Any]) -> RunOutcome:
        provenance = {
            "config_hash": config_hash(config),
            "version": self.version,
            "seed": config.seed,
            "tolerances": dict(config.tolerances),
            "command": config.command,
        }
        writer = data.get("writer") or ResultWriter(config.output_dir)
        data["writer"] = writer
        data["provenance"] = provenance

        with run_context(config.command, provenance["config_hash"]):
            outcome = handler(config, data)

        outcome.summary["provenance"] = provenance
        outcome.summary["passed"] = outcome.passed
        outcome.summary["status"] = outcome.status
        outcome.files.append(writer.write_json("summary.json", outcome.summary))
        logging.info(f"Run '{config.command}' finished: status={outcome.status}, passed={outcome.passed}")
        return outcome
