# coupled_stability_backend/settings.py
import os
from pathlib import Path

BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = os.environ.get('DJANGO_SECRET_KEY', 'stability-lab-local-key')  # no request handling, key unused
DEBUG = os.environ.get('DJANGO_DEBUG', '0') == '1'
ALLOWED_HOSTS = []

INSTALLED_APPS = [
    'rest_framework',
    'stability_lab',
]

MIDDLEWARE = []

# Everything is computed in memory; no models are persisted
DATABASES = {}

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

# REST Framework settings (serializers + JSON rendering of artifacts)
REST_FRAMEWORK = {
    'DEFAULT_RENDERER_CLASSES': [
        'rest_framework.renderers.JSONRenderer',
    ],
    'DEFAULT_PARSER_CLASSES': [
        'rest_framework.parsers.JSONParser',
    ],
    'UNAUTHENTICATED_USER': None,
}

# Numerical defaults for the stability command; a --config file and flags override them
STABILITY_LAB = {
    'SYSTEM': 'WaveWave2018',
    'DEFAULT_GAIN': 1.0,  # used for every required gain the run leaves unset
    'N': 16,
    'T_END': 5.0,
    'DT': 0.05,
    'QUADRATURE_RULE': 'GaussLegendre',
    'QUADRATURE_PANELS': 64,
    'QUADRATURE_NODES': 4,
    'GAMMA_FRACTION': 0.5,
    'SEED': 20180101,
    'INITIAL_STATE': 'random',
    'OUTPUT_DIR': os.environ.get('STABILITY_LAB_OUTPUT_DIR', str(BASE_DIR / 'runs')),
    'ADMISSIBILITY_HORIZONS': [0.5, 1.0, 2.0, 4.0],
    'ADMISSIBILITY_STEPS': 256,
    'SWEEP_LADDER': [8, 16, 32],
    'DECAY_T_MAX': 10.0,
    'DECAY_T_POINTS': 50,
    'VERIFY_SAMPLES': 20,
    'VERIFY_TOLERANCES': {
        'factorization_exactness': 1e-13,
        'resolvent_identity': 1e-9,
        'vop_vs_direct': 1e-6,
        'semigroup_law': 1e-9,
        'triangular_invariance': 1e-10,
        # ratio to K N, with headroom for the convolution quadrature
        'admissibility_product': 1.02,
    },
}

# Logging
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'simple': {
            'format': '%(levelname)s %(name)s: %(message)s',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'simple',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': 'INFO',
    },
    'loggers': {
        'stability_lab': {
            'level': os.environ.get('STABILITY_LAB_LOG_LEVEL', 'INFO'),
        },
    },
}
