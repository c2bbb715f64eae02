# stability_lab/apps.py
import logging

from django.apps import AppConfig

logger = logging.getLogger(__name__)


class StabilityLabConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'stability_lab'
    verbose_name = 'Coupled Semigroup Stability Lab'

    def ready(self):
        """Make sure the numerical kernels import cleanly when Django starts"""
        try:
            from . import numerics  # noqa: F401
            logger.debug("Stability numerics loaded")
        except ImportError as e:
            logger.warning(f"Could not load stability numerics: {e}")
