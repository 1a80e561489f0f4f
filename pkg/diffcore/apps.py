from django.apps import AppConfig
from django.conf import settings


class DiffcoreConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'diffcore'

    def ready(self):
        from diffcore.tensor import set_debug
        set_debug(getattr(settings, 'DIFFCORE_DEBUG', False))
