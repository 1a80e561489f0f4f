from django.apps import AppConfig


class IntrinsicConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'intrinsic'
