from django.apps import AppConfig


class HmmlabConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'hmmlab'
    verbose_name = 'Scanpath HMM lab'
