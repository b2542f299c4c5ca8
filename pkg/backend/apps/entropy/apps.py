from django.apps import AppConfig


class EntropyConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'apps.entropy'
    verbose_name = 'Entropy Analysis'
