from django.apps import AppConfig


class TowerCoverageConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "tower_coverage"
    verbose_name = "Tower Coverage"
