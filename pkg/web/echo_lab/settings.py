"""
Django settings for the echo_lab project.

echo_lab is a batch simulator; it has no web surface, so only the pieces a
management-command process needs are configured here: installed apps,
logging, and the few process-level knobs read from the environment.
"""

import logging
from pathlib import Path

from decouple import config as decouple_config


# Helper function to get boolean configuration values
def bool_config(key, default=False):
    return decouple_config(key, default=default, cast=bool)


def list_config(key, default="", separator=","):
    value = decouple_config(key, default=default)
    if isinstance(value, str):
        return [s.strip() for s in value.split(separator) if s.strip()]
    return []


logger = logging.getLogger(__name__)

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = decouple_config(
    "DJANGO_SECRET_KEY", default="echo-lab-has-no-sessions-or-signing"
)

DEBUG = bool_config("ECHO_LAB_DEBUG", default=False)

ALLOWED_HOSTS: list[str] = []

# Application definition
INSTALLED_APPS = [
    "physmodel",
    "pulseshape",
    "ionensemble",
    "protocols",
    "specprep",
    "noisebudget",
    "analysis",
    "experiments",
]

# No models are persisted; every result is written as CSV/JSON artifacts.
DATABASES: dict[str, dict[str, str]] = {}

USE_TZ = True
TIME_ZONE = "UTC"

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"

# =============================================================================
# SIMULATION CONFIGURATION
# =============================================================================

# Worker threads for the Monte-Carlo engines. Results do not depend on it.
ECHO_LAB_THREADS = decouple_config("ECHO_LAB_THREADS", default=1, cast=int)
if ECHO_LAB_THREADS < 1:
    logger.warning(f"ECHO_LAB_THREADS={ECHO_LAB_THREADS} is invalid, using 1")
    ECHO_LAB_THREADS = 1

# Directory holding the bundled experiment configurations.
ECHO_LAB_CONFIG_DIR = BASE_DIR / "experiments" / "configs"

# Default artifact directory when --out is not given.
ECHO_LAB_OUTPUT_DIR = Path(
    decouple_config("ECHO_LAB_OUTPUT_DIR", default=str(BASE_DIR.parent / "runs"))
)

# =============================================================================
# LOGGING CONFIGURATION
# =============================================================================

LOG_LEVEL = decouple_config("ECHO_LAB_LOG_LEVEL", default="INFO")

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "verbose": {
            "format": "{levelname} {asctime} {name} {process:d} {thread:d} {message}",
            "style": "{",
        },
        "simple": {
            "format": "{levelname} {message}",
            "style": "{",
        },
    },
    "handlers": {
        "file": {
            "level": "INFO",
            "class": "logging.FileHandler",
            "filename": decouple_config(
                "ECHO_LAB_LOG_FILE", default="/tmp/echo_lab.log"
            ),
            "formatter": "verbose",
        },
        "console": {
            "level": LOG_LEVEL,
            "class": "logging.StreamHandler",
            "formatter": "simple" if DEBUG else "verbose",
        },
    },
    "loggers": {
        "django": {
            "handlers": ["console"] if DEBUG else ["file", "console"],
            "level": "WARNING",
            "propagate": True,
        },
        "echo_lab": {
            "handlers": ["console"] if DEBUG else ["file", "console"],
            "level": LOG_LEVEL,
            "propagate": True,
        },
        **{
            app: {
                "handlers": ["console"] if DEBUG else ["file", "console"],
                "level": LOG_LEVEL,
                "propagate": False,
            }
            for app in INSTALLED_APPS
        },
    },
}
