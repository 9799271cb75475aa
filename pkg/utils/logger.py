import logging
from pathlib import Path

_FMT = "%(asctime)s [%(levelname)s] %(message)s"

TRACE_LOGGER_NAME = "dald.trace"


class _RawMessageFormatter(logging.Formatter):
    """Emit the record message untouched so each trace line stays valid JSON."""

    def format(self, record: logging.LogRecord) -> str:
        return record.getMessage()


def configure_logging(level: str | int = logging.INFO, quiet: bool = False) -> None:
    if quiet:
        level = logging.WARNING
    logging.basicConfig(level=level, format=_FMT)
    logging.getLogger().setLevel(level)


def attach_trace_file(path: str | Path) -> logging.Handler:
    """Route the trace logger to a line-delimited file. Returns the handler so callers can detach it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(path, mode="w", encoding="utf-8")
    handler.setFormatter(_RawMessageFormatter())
    trace_logger = logging.getLogger(TRACE_LOGGER_NAME)
    trace_logger.setLevel(logging.INFO)
    trace_logger.propagate = False
    trace_logger.addHandler(handler)
    return handler


def detach_trace_file(handler: logging.Handler) -> None:
    trace_logger = logging.getLogger(TRACE_LOGGER_NAME)
    trace_logger.removeHandler(handler)
    handler.close()
