import os

from celery import Celery

# Set the default Django settings module for the 'celery' program.
os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'scenepick_project.settings')

app = Celery('scenepick_project')

# All celery-related configuration keys carry a `CELERY_` prefix in settings.py.
app.config_from_object('django.conf:settings', namespace='CELERY')

# Picks up `annotations/tasks.py`.
app.autodiscover_tasks()
