"""
Django settings for scenepick_project project.

The project has no HTTP surface: Django provides configuration, the job
ledger database, management commands and the test runner; Celery runs
annotation jobs when a broker is available.
"""

import os
import sys
from pathlib import Path

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = os.environ.get("SCENEPICK_SECRET_KEY", "django-insecure-scenepick-local-only")

DEBUG = os.environ.get("SCENEPICK_DEBUG", "0") == "1"

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    "django.contrib.contenttypes",
    "django.contrib.auth",
    # Third-party apps
    "rest_framework",
    # My apps
    "annotations",
    "cli",
]


# Database
# https://docs.djangoproject.com/en/5.2/ref/settings/#databases

DATABASES = {
    "default": {
        "ENGINE": "django.db.backends.sqlite3",
        "NAME": os.environ.get("SCENEPICK_DB", BASE_DIR / "db.sqlite3"),
    }
}

LANGUAGE_CODE = "en-us"

TIME_ZONE = "UTC"

USE_I18N = False

USE_TZ = True

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"


# Keyframe selection defaults. Command flags and --config files override these.
SCENEPICK = {
    "SEGMENT_LAMBDA": 2.0,
    "MIN_SCENE_LEN": 8,
    "HISTOGRAM_BINS": 64,
    "FUSION_LAMBDA": 0.8,
    "MERGE_TOLERANCE": 2,
    "ALPHA_PRED": 4.0,
    "R_MIN": 0.5,
    "FOCUSED_MAX_K": 8,
    "REWARD_TAU": 1.0,
    "PROBABILITY_FLOOR": 1e-9,
    "PROVIDER": {
        # "mock:" or "mock:seed=N" selects the offline provider
        "ENDPOINT": os.environ.get("SCENEPICK_PROVIDER_ENDPOINT", "mock:"),
        # Name of the environment variable holding the bearer token, not the token itself
        "CREDENTIAL_ENV": os.environ.get("SCENEPICK_PROVIDER_CREDENTIAL_ENV", "SCENEPICK_PROVIDER_TOKEN"),
        "TIMEOUT": os.environ.get("SCENEPICK_PROVIDER_TIMEOUT", "30"),
        "MAX_RETRIES": os.environ.get("SCENEPICK_PROVIDER_MAX_RETRIES", "3"),
        "MAX_CONCURRENT_REQUESTS": os.environ.get("SCENEPICK_PROVIDER_MAX_CONCURRENT", "4"),
        "BACKOFF_BASE": 1.0,
        "BACKOFF_FACTOR": 2.0,
        "BACKOFF_CAP": 32.0,
        "SEED": os.environ.get("SCENEPICK_PROVIDER_SEED", "0"),
    },
}


# Diagnostics go to stderr; command data goes to stdout or --out.
LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "console": {
            "format": "%(asctime)s %(levelname)s %(name)s: %(message)s",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "stream": "ext://sys.stderr",
            "formatter": "console",
        },
    },
    "root": {
        "handlers": ["console"],
        "level": os.environ.get("SCENEPICK_LOG_LEVEL", "WARNING"),
    },
}


# Celery Configuration Options
# Redis is the broker for `annotate --queue`; in-process runs never touch it.
CELERY_BROKER_URL = os.environ.get('CELERY_BROKER_URL', 'redis://localhost:6379/0')
CELERY_RESULT_BACKEND = os.environ.get('CELERY_RESULT_BACKEND', 'redis://localhost:6379/0')
CELERY_ACCEPT_CONTENT = ['json']
CELERY_TASK_SERIALIZER = 'json'
CELERY_RESULT_SERIALIZER = 'json'
CELERY_TIMEZONE = TIME_ZONE
CELERY_TASK_TRACK_STARTED = True

# For testing: run Celery tasks synchronously to avoid needing a running broker.
if 'test' in sys.argv:
    CELERY_TASK_ALWAYS_EAGER = True
    CELERY_TASK_EAGER_PROPAGATES = True
