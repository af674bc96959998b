"""
Shared utilities for the AS-G1 surface analysis tool.
Provides application constants, numerical tolerances, logging setup and thread resolution.
"""
import logging
import os
from typing import Optional


# Branding / figure palette
ASG1_COLORS = {
    'slate': '#43505B',
    'deep_teal': '#50817C',
    'terracotta': '#CE8365',
    'warm_sand': '#E0A967',
    'off_white': '#F3F4EF',
    'light_slate': '#99A0A4',
    'light_teal': '#87ADA2',
    'beige': '#D5BA98',
    'dark_grey': '#2C3E50',
    'danger': '#962531',
    'warning': '#D18F33',
    'success': '#4A7C59'
}
PATCH_COLORSCALES = ['Teal', 'Peach', 'Blues', 'Greens', 'Oranges', 'Purples', 'Greys', 'Reds']
APP_VERSION = "v1.0.0"
APP_NAME = "AS-G1 Surface Analysis"

# Numerical tolerances (relative unless stated otherwise)
SADDLE_RANK_TOL = 1e-10
NULLSPACE_TOL = 1e-9
FEASIBILITY_TOL = 1e-9
ASG1_TOL = 1e-8
CONFORMITY_TOL = 1e-9
FD_STEP = 1e-5

DEFAULT_REACTION = 1.0
DEFAULT_SAMPLES = 101

THREADS_ENV = "ASG1_THREADS"
LOGGER_NAME = "asg1"


def resolve_threads(flag: Optional[int] = None) -> int:
    """Resolve the worker count: explicit flag, then ``ASG1_THREADS``, then 1.

    Args:
        flag: value given on the command line, if any

    Returns:
        Positive number of workers
    """
    value = flag
    if value is None:
        raw = os.environ.get(THREADS_ENV, "").strip()
        value = int(raw) if raw else 1
    if value < 1:
        raise ValueError(f"thread count must be at least 1, got {value}")
    return int(value)


def configure_logging(verbosity: int = 0) -> logging.Logger:
    """Install a single stream handler on the package logger.

    Args:
        verbosity: -1 quiet, 0 warnings, 1 info, 2 debug

    Returns:
        The configured package logger
    """
    levels = {-1: logging.ERROR, 0: logging.WARNING, 1: logging.INFO}
    logger = logging.getLogger(LOGGER_NAME)
    logger.setLevel(levels.get(verbosity, logging.DEBUG))
    if not logger.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
        logger.addHandler(handler)
    return logger
