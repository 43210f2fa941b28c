"""Configuration management for pmlbound"""
import os
import logging
from typing import Optional

from dotenv import load_dotenv

load_dotenv()

logger = logging.getLogger(__name__)

DEFAULT_WORKERS = min(8, os.cpu_count() or 1)


def parse_workers(raw: Optional[str]) -> Optional[int]:
    """Integer worker count from an environment string, or None if it is not an integer."""
    try:
        return int(str(raw).strip())
    except ValueError:
        return None


class Config:
    """Application configuration.

    Nothing here changes a numeric result; these settings only control how
    much work runs at once and how much the tool says about it.
    """

    # Sweep orchestration
    WORKERS_SETTING = os.getenv('PMLBOUND_WORKERS', str(DEFAULT_WORKERS))
    WORKERS = parse_workers(WORKERS_SETTING)
    if WORKERS is None:
        WORKERS = DEFAULT_WORKERS

    # Development Settings
    DEBUG = os.getenv('DEBUG', 'False').lower() == 'true'
    LOG_LEVEL = os.getenv('LOG_LEVEL', 'WARNING').upper()

    @classmethod
    def validate(cls):
        """
        Validate configuration.

        Returns:
            bool: False if a setting is unusable, True otherwise
        """
        warnings = []
        errors = []

        if parse_workers(cls.WORKERS_SETTING) is None:
            errors.append(
                f"PMLBOUND_WORKERS must be an integer, got '{cls.WORKERS_SETTING}'; using {cls.WORKERS}."
            )
        if cls.WORKERS < 1:
            errors.append(f"PMLBOUND_WORKERS must be at least 1, got {cls.WORKERS}.")

        if not isinstance(logging.getLevelName(cls.LOG_LEVEL), int):
            errors.append(f"LOG_LEVEL '{cls.LOG_LEVEL}' is not a logging level name.")

        if cls.DEBUG and cls.LOG_LEVEL != 'DEBUG':
            warnings.append("DEBUG is set but LOG_LEVEL is not DEBUG; tracebacks only.")

        for error in errors:
            logger.error(f"Configuration error: {error}")
        for warning in warnings:
            logger.warning(f"Configuration warning: {warning}")

        return len(errors) == 0

    @classmethod
    def log_level(cls) -> int:
        """Numeric logging level, falling back to WARNING for unknown names."""
        level = logging.getLevelName(cls.LOG_LEVEL)
        return level if isinstance(level, int) else logging.WARNING
