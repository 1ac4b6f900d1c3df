import logging

from rich.console import Console
from rich.logging import RichHandler

from udn.config import settings

PACKAGE_LOGGER = "udn"


def configure_logging(level: str | int | None = None) -> logging.Logger:
    """
    Installs a single rich handler on the package logger.

    Calling it again only updates the level.

    Args:
        level: A logging level name or number. Defaults to
        `settings.log_level`.

    Returns:
        logging.Logger: The package logger.
    """
    logger = logging.getLogger(PACKAGE_LOGGER)
    logger.setLevel(level or settings.log_level)
    if not any(isinstance(h, RichHandler) for h in logger.handlers):
        handler = RichHandler(
            console=Console(stderr=True),
            show_path=False,
            rich_tracebacks=True,
        )
        handler.setFormatter(logging.Formatter("%(name)s: %(message)s"))
        logger.addHandler(handler)
        logger.propagate = False
    return logger
