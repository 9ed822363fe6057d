from django.apps import AppConfig


class IcpConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "apps.icp"
