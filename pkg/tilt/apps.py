from django.apps import AppConfig


class TiltConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'tilt'
    verbose_name = 'Exponential Tilt Model'
