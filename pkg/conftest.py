import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'scanpathLab.settings')
django.setup()
