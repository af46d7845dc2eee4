import pytest


@pytest.fixture(autouse=True, scope="session")
def _celery_eager():
    # settings.py enables eager Celery only when `test` is in sys.argv
    # (`manage.py test`); apply the same test configuration under pytest.
    from scenepick_project.celery import app

    app.conf.task_always_eager = True
    app.conf.task_eager_propagates = True
    yield
