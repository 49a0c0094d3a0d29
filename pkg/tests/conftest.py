from pathlib import Path

import pytest

from servicebot import create_app
from servicebot.config import TestConfig
from servicebot.services.kb_service import KBService, KBStore
from servicebot.services.sitlog import load_program_files

DATA_DIR = Path(__file__).resolve().parent.parent / "servicebot" / "data"


@pytest.fixture
def app():
    app = create_app(TestConfig)
    yield app


@pytest.fixture
def runner(app):
    return app.test_cli_runner()


@pytest.fixture
def data_dir():
    return DATA_DIR


@pytest.fixture
def animals():
    """Listing of the birds, eagles and penguins taxonomy."""
    return KBService.load_kb_file(DATA_DIR / "kb" / "animals.kb")


@pytest.fixture
def home_kb():
    return KBStore.from_file(DATA_DIR / "kb" / "home.kb")


@pytest.fixture
def supermarket_kb():
    return KBStore.from_file(DATA_DIR / "kb" / "supermarket.kb")


@pytest.fixture
def dummy_program():
    return load_program_files([DATA_DIR / "programs" / "dummy.sitlog"])


@pytest.fixture
def recovery_program():
    return load_program_files([DATA_DIR / "programs" / "recovery.sitlog"])
