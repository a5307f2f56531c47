import math

from rest_framework import serializers

from inference.conf import inference_settings


class SignificantFloatField(serializers.FloatField):
    """Float rounded to OUTPUT_PRECISION significant digits; non-finite values become null."""

    def to_representation(self, value):
        if value is None:
            return None
        value = float(value)
        if not math.isfinite(value):
            return None
        return float(f"{value:.{inference_settings.OUTPUT_PRECISION}g}")
