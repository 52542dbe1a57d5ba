from django.apps import AppConfig


class ExtraConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'extra'
    verbose_name = 'Exponential Tilt Reweighting Alignment'
