import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'coupled_stability_backend.settings')
django.setup()
