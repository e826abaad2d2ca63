from django.apps import AppConfig


class SpecprepConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "specprep"
    verbose_name = "Spectral preparation"
