# logging_config.py
import logging
from logging.handlers import RotatingFileHandler
from typing import Optional

LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"


def setup_logging(level: str = "INFO", log_file: Optional[str] = None):
    console_handler = logging.StreamHandler()
    console_handler.setLevel(logging.DEBUG)

    formatter = logging.Formatter(LOG_FORMAT)
    console_handler.setFormatter(formatter)

    root_logger = logging.getLogger()
    root_logger.setLevel(getattr(logging, level.upper(), logging.INFO))
    # setup_logging may run more than once in one process (tests, sweeps)
    for handler in list(root_logger.handlers):
        if getattr(handler, "_stt_handler", False):
            root_logger.removeHandler(handler)
            handler.close()

    console_handler._stt_handler = True
    root_logger.addHandler(console_handler)

    if log_file:
        file_handler = RotatingFileHandler(
            log_file, maxBytes=10_000_000, backupCount=3
        )
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(formatter)
        file_handler._stt_handler = True
        root_logger.addHandler(file_handler)

    # numeric stack stays quiet unless something is wrong
    for name in ("matplotlib", "numexpr", "hypothesis"):
        logging.getLogger(name).setLevel(logging.WARNING)
