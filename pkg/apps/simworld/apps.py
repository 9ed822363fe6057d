from django.apps import AppConfig


class SimWorldConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "apps.simworld"
