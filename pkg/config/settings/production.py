from .base import *

DEBUG = False

DATABASES = {
    "default": {
        "ENGINE": "django.db.backends.sqlite3",
        "NAME": config("DATABASE_PATH", default=str(BASE_DIR / "db.sqlite3")),
    }
}

LOGGING["handlers"]["console"]["level"] = "INFO"
LOGGING["loggers"]["apps"]["level"] = "INFO"
