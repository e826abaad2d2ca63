from django.apps import AppConfig


class PhysmodelConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "physmodel"
    verbose_name = "Physical model"
