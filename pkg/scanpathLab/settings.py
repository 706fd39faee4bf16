"""
Django settings for scanpathLab project.

The project has no web surface; Django provides settings, management
commands, template rendering and the test runner for the hmmlab app.
"""
from pathlib import Path

from decouple import Csv, config

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = config('SECRET_KEY', default='scanpathlab-insecure-local-key')

DEBUG = config('DEBUG', default=False, cast=bool)

ALLOWED_HOSTS = config('ALLOWED_HOSTS', default='localhost', cast=Csv())


# Application definition

INSTALLED_APPS = [
    # Local apps
    'hmmlab',
]

TEMPLATES = [
    {
        'BACKEND': 'django.template.backends.django.DjangoTemplates',
        'DIRS': [],
        'APP_DIRS': True,
        'OPTIONS': {
            'context_processors': [],
            'autoescape': True,
        },
    },
]

# Nothing is persisted; sweeps write CSV files.
DATABASES = {}


# Internationalization
LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = False
USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# ==============================================================================
# LOGGING
# ==============================================================================

LOG_LEVEL = config('HMMLAB_LOG_LEVEL', default='INFO')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {name} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'loggers': {
        'hmmlab': {
            'handlers': ['console'],
            'level': LOG_LEVEL,
            'propagate': False,
        },
    },
}


# ==============================================================================
# HMM LAB SETTINGS
# ==============================================================================

HMMLAB = {
    # Monte-Carlo sequences per D_HMM estimate
    'KLD_SAMPLES': config('HMMLAB_KLD_SAMPLES', default=2000, cast=int),
    'THREADS': config('HMMLAB_THREADS', default=1, cast=int),
    'FRAME': (512, 384),
    'FACE_REGION': (300, 350),
    'KLD_THRESHOLD': 0.05,
    'OVERLAP_THRESHOLD': 0.10,
}
