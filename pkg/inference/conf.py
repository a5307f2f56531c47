"""
Settings for the inference app are all namespaced in the GGM setting.
For example your project's `settings.py` file might look like this:

GGM = {
    "LASSO_TOLERANCE": 1e-9,
    "N_JOBS": 4,
}

Attribute access on `inference_settings` returns the project value when it is
set and the default below otherwise. Outside a configured Django project the
defaults are used as they are.
"""

import math

from django.conf import settings
from django.core.exceptions import ImproperlyConfigured

DEFAULTS = {
    "LASSO_TOLERANCE": 1e-10,
    "LASSO_MAX_SWEEPS": 100000,
    "STABILITY_TOLERANCE": 1e-10,
    "EDGE_TOLERANCE": 1e-8,
    "RECOVERY_TOLERANCE": 1e-8,
    "LYAPUNOV_CHECK_TOLERANCE": 1e-8,
    "SIMULATION_DT": 1e-3,
    "SIMULATION_SIGMA": math.sqrt(2.0),
    "SIMULATION_BURN_IN_TIME": 10.0,
    "SIMULATION_CHAINS": 1000,
    "DIVERGENCE_NORM": 1e150,
    "ROW_SUM_TOLERANCE": 1e-6,
    "N_JOBS": 1,
    "OUTPUT_PRECISION": 12,
    "DEFAULT_ORIENTATION": "sending",
    "DEFAULT_CENTER": "mean",
}


class InferenceSettings:
    def __init__(self, defaults=None):
        self.defaults = defaults or DEFAULTS

    @property
    def user_settings(self):
        try:
            return getattr(settings, "GGM", {})
        except ImproperlyConfigured:
            return {}

    def __getattr__(self, attr):
        if attr not in self.defaults:
            raise AttributeError(f"Invalid GGM setting: '{attr}'")
        return self.user_settings.get(attr, self.defaults[attr])


inference_settings = InferenceSettings(DEFAULTS)
