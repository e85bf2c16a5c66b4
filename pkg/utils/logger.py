import sys
import logging
from loguru import logger

class InterceptHandler(logging.Handler):
    """
    Reroutes standard logging records (used by the analysis modules) into Loguru.
    """
    def emit(self, record):
        try:
            level = logger.level(record.levelname).name
        except ValueError:
            level = record.levelno

        frame, depth = logging.currentframe(), 2
        while frame.f_code.co_filename == logging.__file__:
            frame = frame.f_back
            depth += 1

        logger.opt(depth=depth, exception=record.exc_info).log(level, record.getMessage())

def setup_logger(log_file_path: str | None, level: str = "INFO", rotation: str = "10 MB", retention: str = "1 month"):
    """
    Configures Loguru with a stderr sink and, when a path is given, a
    rotating file sink for the run log.
    """
    logger.remove()
    logger.configure(extra={"run": "-"})
    logger.add(
        sys.stderr,
        level=level,
        format="<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <level>{level: <8}</level> | <cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> - <level>{message}</level>"
    )

    if log_file_path:
        logger.add(
            log_file_path,
            level=level,
            rotation=rotation,
            retention=retention,
            enqueue=True,
            backtrace=True,
            diagnose=False,
            format="{time} {level} [{extra[run]}] {name}:{function} {message}"
        )

    logging.basicConfig(handlers=[InterceptHandler()], level=0, force=True)
    # joblib is chatty at DEBUG
    logging.getLogger("joblib").setLevel(logging.WARNING)

    logger.debug("Logger configured.")


def run_context(command: str, config_hash: str):
    """Tags every record emitted inside the block with the run it belongs to."""
    return logger.contextualize(run=f"{command}:{config_hash[:8]}")
