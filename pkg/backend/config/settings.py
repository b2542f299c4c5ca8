"""
Django settings for Brushmark.

Brushmark attributes regions of scanned paintings to a human or a robotic
painter:
- Patch extraction and labeling of scanned canvases
- A compact convolutional classifier trained under leave-one-painting-out
  cross-validation
- Conditional predictive entropy for mixed-authorship regions
- A texture (LBP + random forest) baseline and a synthetic brushstroke corpus

Everything runs through management commands (``python manage.py <command>``).
"""

from pathlib import Path
import os

# Try to import decouple, fallback to os.environ if not available
try:
    from decouple import config
except ImportError:
    def config(key, default=None, cast=None):
        value = os.environ.get(key, default)
        if cast is bool and isinstance(value, str):
            return value.lower() in ('true', '1', 'yes', 'on')
        if cast and value is not None:
            return cast(value)
        return value

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = config('SECRET_KEY', default='brushmark-local-only-key')

DEBUG = config('DEBUG', default=True, cast=bool)

ALLOWED_HOSTS = config('ALLOWED_HOSTS', default='localhost,127.0.0.1').split(',')

# Application definition
INSTALLED_APPS = [
    'django.contrib.contenttypes',

    # Third-party apps
    'rest_framework',

    # Local apps
    'apps.core.apps.CoreConfig',
    'apps.tensor.apps.TensorConfig',
    'apps.patches.apps.PatchesConfig',
    'apps.network.apps.NetworkConfig',
    'apps.training.apps.TrainingConfig',
    'apps.evaluation.apps.EvaluationConfig',
    'apps.entropy.apps.EntropyConfig',
    'apps.baseline.apps.BaselineConfig',
    'apps.synth.apps.SynthConfig',
    'apps.reports.apps.ReportsConfig',
    'apps.audit.apps.AuditConfig',
]

# Database (run trail only)
DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': config('BRUSHMARK_DB_PATH', default=str(BASE_DIR / 'db.sqlite3')),
    }
}

LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = False
USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

# REST Framework Configuration (serializers and JSON rendering only)
REST_FRAMEWORK = {
    'DEFAULT_RENDERER_CLASSES': (
        'rest_framework.renderers.JSONRenderer',
    ),
    'COERCE_DECIMAL_TO_STRING': False,
}

# Brushmark Configuration
BRUSHMARK_OUTPUT_DIR = config('BRUSHMARK_OUTPUT_DIR', default=str(BASE_DIR / 'runs'))
BRUSHMARK_SEED = config('BRUSHMARK_SEED', default=0, cast=int)
BRUSHMARK_PARALLEL_FOLDS = config('BRUSHMARK_PARALLEL_FOLDS', default=False, cast=bool)
BRUSHMARK_EVAL_BATCH_SIZE = config('BRUSHMARK_EVAL_BATCH_SIZE', default=32, cast=int)
BRUSHMARK_FOREST_JOBS = config('BRUSHMARK_FOREST_JOBS', default=1, cast=int)

# Celery Configuration
CELERY_BROKER_URL = config('CELERY_BROKER_URL', default='redis://localhost:6379/0')
CELERY_RESULT_BACKEND = config('CELERY_RESULT_BACKEND', default='redis://localhost:6379/0')
CELERY_ACCEPT_CONTENT = ['json']
CELERY_TASK_SERIALIZER = 'json'
CELERY_RESULT_SERIALIZER = 'json'
CELERY_TIMEZONE = 'UTC'
CELERY_ENABLE_UTC = True
# Eager by default: folds run in-process unless a broker is configured
CELERY_TASK_ALWAYS_EAGER = config('CELERY_TASK_ALWAYS_EAGER', default=True, cast=bool)

# Logging Configuration
LOGS_DIR = Path(config('BRUSHMARK_LOG_DIR', default=str(BASE_DIR / 'logs')))

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {module} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
        'file': {
            'class': 'logging.handlers.RotatingFileHandler',
            'filename': LOGS_DIR / 'app.log',
            'maxBytes': 1024 * 1024 * 15,  # 15MB
            'backupCount': 10,
            'formatter': 'verbose',
        },
        'runs_file': {
            'class': 'logging.handlers.RotatingFileHandler',
            'filename': LOGS_DIR / 'runs.log',
            'maxBytes': 1024 * 1024 * 50,  # 50MB
            'backupCount': 20,
            'formatter': 'verbose',
        },
    },
    'loggers': {
        'django': {
            'handlers': ['console', 'file'],
            'level': 'INFO',
            'propagate': True,
        },
        'apps': {
            'handlers': ['console', 'file'],
            'level': config('BRUSHMARK_LOG_LEVEL', default='INFO'),
            'propagate': False,
        },
        'apps.audit': {
            'handlers': ['runs_file'],
            'level': 'INFO',
            'propagate': False,
        },
    },
}

# Create logs directory if it doesn't exist
LOGS_DIR.mkdir(parents=True, exist_ok=True)
