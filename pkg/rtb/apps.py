from django.apps import AppConfig


class RtbConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'rtb'
    verbose_name = 'RTB Auction Simulation'
