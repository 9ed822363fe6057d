from django.apps import AppConfig


class WithdrawConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "apps.withdraw"
