"""
Django settings for directed_ggm_project project.

The project has no web surface: Django provides configuration, logging and the
``manage.py`` command line used to run the inference commands.

For the full list of settings and their values, see
https://docs.djangoproject.com/en/5.1/ref/settings/
"""

import math
import os
from pathlib import Path

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = os.environ.get(
    "DJANGO_SECRET_KEY",
    "django-insecure-directed-ggm-local-only",
)

DEBUG = os.environ.get("DJANGO_DEBUG", "0") == "1"

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    "django.contrib.contenttypes",
    "django.contrib.auth",
    "rest_framework",
    "inference",
]

# Nothing is persisted; estimates are written to files by the commands.
DATABASES = {}


# Internationalization
# https://docs.djangoproject.com/en/5.1/topics/i18n/

LANGUAGE_CODE = "en-us"

TIME_ZONE = "UTC"

USE_I18N = False

USE_TZ = True

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"


REST_FRAMEWORK = {
    "DEFAULT_RENDERER_CLASSES": ("rest_framework.renderers.JSONRenderer",),
    "COERCE_DECIMAL_TO_STRING": False,
}


def _env_float(name, default):
    value = os.environ.get(name)
    return float(value) if value is not None else default


def _env_int(name, default):
    value = os.environ.get(name)
    return int(value) if value is not None else default


# Numerical defaults for the inference app (see inference/conf.py)
GGM = {
    "LASSO_TOLERANCE": _env_float("GGM_LASSO_TOLERANCE", 1e-10),
    "LASSO_MAX_SWEEPS": _env_int("GGM_LASSO_MAX_SWEEPS", 100000),
    "STABILITY_TOLERANCE": _env_float("GGM_STABILITY_TOLERANCE", 1e-10),
    "EDGE_TOLERANCE": _env_float("GGM_EDGE_TOLERANCE", 1e-8),
    "RECOVERY_TOLERANCE": _env_float("GGM_RECOVERY_TOLERANCE", 1e-8),
    "LYAPUNOV_CHECK_TOLERANCE": _env_float("GGM_LYAPUNOV_CHECK_TOLERANCE", 1e-8),
    "SIMULATION_DT": _env_float("GGM_SIMULATION_DT", 1e-3),
    "SIMULATION_SIGMA": _env_float("GGM_SIMULATION_SIGMA", math.sqrt(2.0)),
    "SIMULATION_BURN_IN_TIME": _env_float("GGM_SIMULATION_BURN_IN_TIME", 10.0),
    "SIMULATION_CHAINS": _env_int("GGM_SIMULATION_CHAINS", 1000),
    "DIVERGENCE_NORM": _env_float("GGM_DIVERGENCE_NORM", 1e150),
    "ROW_SUM_TOLERANCE": _env_float("GGM_ROW_SUM_TOLERANCE", 1e-6),
    "N_JOBS": _env_int("GGM_N_JOBS", 1),
    "OUTPUT_PRECISION": _env_int("GGM_OUTPUT_PRECISION", 12),
    "DEFAULT_ORIENTATION": os.environ.get("GGM_DEFAULT_ORIENTATION", "sending"),
    "DEFAULT_CENTER": os.environ.get("GGM_DEFAULT_CENTER", "mean"),
}


LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "plain": {"format": "%(name)s: %(message)s"},
    },
    "handlers": {
        "console": {
            "class": "rich.logging.RichHandler",
            "formatter": "plain",
            "show_path": False,
            "rich_tracebacks": True,
            "console": "ext://inference.log.stderr_console",
        },
    },
    "loggers": {
        "inference": {
            "handlers": ["console"],
            "level": os.environ.get("GGM_LOG_LEVEL", "WARNING"),
            "propagate": False,
        },
    },
}
