from django.apps import AppConfig


class PatchesConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'apps.patches'
    verbose_name = 'Patch Pipeline'
