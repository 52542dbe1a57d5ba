"""
Access to the EXTRA_SETTINGS block with in-code defaults
"""

from typing import Any

from django.conf import settings

DEFAULTS = {
    'EXPONENT_LIMIT': 700.0,
    'CHECK_INTERVAL': 100,
    'EMA_DECAY': 0.9,
    'CSV_SIGNIFICANT_DIGITS': 17,
    'SCHEMA_VERSION': 1,
    'HISTOGRAM_BINS': 20,
    'NORMALIZER_BAND_FACTOR': 10.0,
}


def get_extra_setting(name: str) -> Any:
    """Read one knob from settings.EXTRA_SETTINGS, falling back to DEFAULTS"""
    config = getattr(settings, 'EXTRA_SETTINGS', {}) if settings.configured else {}
    return config.get(name, DEFAULTS[name])
