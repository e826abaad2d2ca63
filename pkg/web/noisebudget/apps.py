from django.apps import AppConfig


class NoisebudgetConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "noisebudget"
    verbose_name = "Noise budget"
