from .base import *

DEBUG = True
LOG_LEVEL = "DEBUG"

LOGGING["handlers"]["console"]["level"] = LOG_LEVEL
LOGGING["loggers"]["apps"]["level"] = LOG_LEVEL
