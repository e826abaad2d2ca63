from django.apps import AppConfig


class IonensembleConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "ionensemble"
    verbose_name = "Ion ensemble"
