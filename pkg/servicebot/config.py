import os
from pathlib import Path

from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

PACKAGE_DIR = Path(__file__).resolve().parent


class Config:
    """Application configuration settings."""

    # Flask settings
    SECRET_KEY = os.getenv('SECRET_KEY', os.urandom(24).hex())
    DEBUG = os.getenv('FLASK_ENV') == 'development'

    # Run store
    SQLALCHEMY_DATABASE_URI = os.getenv('DATABASE_URI', 'sqlite:///servicebot.db')
    SQLALCHEMY_TRACK_MODIFICATIONS = False
    PERSIST_RUNS = os.getenv('PERSIST_RUNS', 'true').lower() == 'true'

    # Scenario files
    DATA_DIR = os.getenv('DATA_DIR', str(PACKAGE_DIR / 'data'))
    DEFAULT_SEED = int(os.getenv('SCENARIO_SEED', '7'))

    # Inference cycle
    DECISION_MODE = os.getenv('DECISION_MODE', 'maximize')
    MAX_INFERENCE_CYCLES = int(os.getenv('MAX_INFERENCE_CYCLES', '4'))

    # World
    PREFERRED_HAND = os.getenv('PREFERRED_HAND', 'right')

    # Logging
    LOG_LEVEL = os.getenv('LOG_LEVEL', 'INFO')


class TestConfig(Config):
    TESTING = True
    SQLALCHEMY_DATABASE_URI = 'sqlite://'
    PERSIST_RUNS = True
    DEFAULT_SEED = 7
    DECISION_MODE = 'maximize'
    MAX_INFERENCE_CYCLES = 4
    PREFERRED_HAND = 'right'
    LOG_LEVEL = 'DEBUG'
