import logging
import sys

from pythonjsonlogger.json import JsonFormatter

PLAIN_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def configure_logging(level: str = "INFO", json_logs: bool = False) -> None:
    """
    Configure the root logger for batch runs.
    
    Args:
        level: Logging level name
        json_logs: Emit one JSON object per record instead of plain text
    """
    handler = logging.StreamHandler(sys.stderr)
    if json_logs:
        handler.setFormatter(
            JsonFormatter('%(asctime)s %(name)s %(levelname)s %(message)s')
        )
    else:
        handler.setFormatter(logging.Formatter(PLAIN_FORMAT))
    
    root = logging.getLogger()
    for existing in list(root.handlers):
        root.removeHandler(existing)
    root.addHandler(handler)
    root.setLevel(level.upper())
