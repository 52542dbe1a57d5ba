# Configuration file for the reweighting project
# Copy this file to .env and fill in your actual values

# Django Settings
SECRET_KEY = "django-insecure-change-me"
DEBUG = False

# Logging
# One of DEBUG, INFO, WARNING, ERROR. DEBUG logs every objective check of a fit.
EXTRA_LOG_LEVEL = "INFO"
