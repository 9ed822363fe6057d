from .base import *

DEBUG = False

DATABASES = {
    "default": {
        "ENGINE": "django.db.backends.sqlite3",
        "NAME": ":memory:",
    }
}

# Keep test runs off the log files.
LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "handlers": {
        "null": {"class": "logging.NullHandler"},
    },
    "loggers": {
        "apps": {"handlers": ["null"], "level": "DEBUG", "propagate": False},
        "performance": {"handlers": ["null"], "level": "DEBUG", "propagate": False},
        "runs": {"handlers": ["null"], "level": "INFO", "propagate": False},
    },
}
