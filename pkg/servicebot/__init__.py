import logging
from flask import Flask
from servicebot.models import db
from servicebot.config import Config


def create_app(config_class=Config):
    """Create and configure the Flask application."""
    app = Flask(__name__)
    app.config.from_object(config_class)

    # Configure logging
    logging.basicConfig(
        level=getattr(logging, app.config['LOG_LEVEL']),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )

    # Initialize extensions
    db.init_app(app)

    # Register command groups
    from servicebot.commands.scenarios import run_command, trace_check_command
    app.cli.add_command(run_command)
    app.cli.add_command(trace_check_command)

    from servicebot.commands.kb import kb_command
    app.cli.add_command(kb_command)

    from servicebot.commands.runs import runs_group
    app.cli.add_command(runs_group)

    # Create database tables
    with app.app_context():
        db.create_all()

    logging.getLogger(__name__).info('Service robot engine ready')
    return app
