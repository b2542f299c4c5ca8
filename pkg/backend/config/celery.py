"""
Celery Configuration for Brushmark

Cross-validation folds are independent, so each fold can run on its own
worker. With CELERY_TASK_ALWAYS_EAGER (the default) everything runs
in-process and no broker is needed.
"""

import os
from celery import Celery

# Set the default Django settings module for the 'celery' program.
os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'config.settings')

app = Celery('brushmark')

# Using a string here means the worker doesn't have to serialize
# the configuration object to child processes.
app.config_from_object('django.conf:settings', namespace='CELERY')

# Load task modules from all registered Django apps.
app.autodiscover_tasks()

app.conf.timezone = 'UTC'
