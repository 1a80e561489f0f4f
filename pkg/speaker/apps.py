from django.apps import AppConfig


class SpeakerConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'speaker'
