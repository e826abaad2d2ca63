from django.apps import AppConfig


class PulseshapeConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "pulseshape"
    verbose_name = "Pulse shapes"
