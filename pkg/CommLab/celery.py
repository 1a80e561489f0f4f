import os
from celery import Celery
from dotenv import load_dotenv
from CommLab.settings import BASE_DIR

load_dotenv(os.path.join(BASE_DIR, '.env'))

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'CommLab.settings')
app = Celery(
    'CommLab',
    backend=f"redis://{os.getenv('REDIS_HOST', 'redis')}:6379/0",
    broker=f"redis://{os.getenv('REDIS_HOST', 'redis')}:6379/1"
)
app.conf.imports = (
    "celery_app.tasks.training",
    "celery_app.tasks.evaluation",
)
app.conf.timezone = 'Asia/Taipei'
app.conf.enable_utc = True

app.conf.task_routes = {
    'celery_app.tasks.training.*': {'queue': 'training_queue'},
    'celery_app.tasks.evaluation.*': {'queue': 'evaluation_queue'},
}

app.conf.task_default_queue = 'default'
