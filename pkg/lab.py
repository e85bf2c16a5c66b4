import argparse
import json
import logging
import os
import sys

from analysis import __version__
from analysis.errors import ConfigError, FixtureError
from config import LOGS_DIR, LOG_LEVEL, OUTPUT_DIR, THREADS, default_tolerances
from handlers import cz as cz_handler, scatter as scatter_handler, sweep as sweep_handler, \
    weaknorm as weaknorm_handler
from handlers.dispatch import Dispatcher
from middlewares.provenance import ProvenanceMiddleware
from middlewares.seeding import SeedMiddleware
from storage.models import COMMANDS, ExperimentConfig, RunOutcome

from utils.logger import setup_logger

EXIT_INPUT_ERROR = 2


def build_dispatcher(seed_override: int | None = None) -> Dispatcher:
    """
    Wires the command routers and the run middlewares together.
    """
    dp = Dispatcher()

    # --- Register Middlewares ---
    # Seeding runs first so the provenance stamp records the effective seed.
    dp.middleware(SeedMiddleware(seed_override))
    dp.middleware(ProvenanceMiddleware(__version__))

    # --- Register Handlers ---
    dp.include_router(cz_handler.router)
    dp.include_router(weaknorm_handler.router)
    dp.include_router(scatter_handler.router)
    dp.include_router(sweep_handler.router)
    return dp


def load_config(path: str, command: str, out: str | None, threads: int | None) -> ExperimentConfig:
    with open(path, encoding="utf-8") as f:
        payload = json.load(f)
    if not isinstance(payload, dict):
        raise ConfigError(f"{path}: the experiment config must be a JSON object.")
    if payload.get("command", command) != command:
        raise ConfigError(f"{path} describes a '{payload['command']}' run, not '{command}'.")
    payload["command"] = command
    payload.setdefault("output_dir", OUTPUT_DIR)
    payload.setdefault("threads", THREADS)
    if out is not None:
        payload["output_dir"] = out
    if threads is not None:
        payload["threads"] = threads
    return ExperimentConfig.from_dict(payload, defaults=default_tolerances())


def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(prog="lab", description="Operator-measure laboratory.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="JSON experiment document")
    parser.add_argument("--seed", type=int, default=None, help="overrides the seed in the config")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--threads", type=int, default=None)
    return parser.parse_args(argv)


def run(argv: list[str] | None = None) -> int:
    args = parse_args(argv)
    try:
        config = load_config(args.config, args.command, args.out, args.threads)
        outcome: RunOutcome = build_dispatcher(args.seed).feed(config)
    except (ConfigError, FixtureError, OSError, json.JSONDecodeError) as e:
        logging.error(f"Run aborted: {e}", exc_info=True)
        return EXIT_INPUT_ERROR

    if not outcome.passed:
        logging.warning(f"'{outcome.command}' finished with failed invariants; see {outcome.files[-1]}")
    return outcome.exit_code


if __name__ == "__main__":
    os.makedirs(LOGS_DIR, exist_ok=True)
    setup_logger(log_file_path=f"{LOGS_DIR}/lab.log", level=LOG_LEVEL)

    try:
        logging.info("Starting the laboratory...")
        sys.exit(run())
    except KeyboardInterrupt:
        logging.info("Run stopped manually.")
        sys.exit(130)
