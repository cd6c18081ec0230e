"""
Environment settings

Read once at import time. A local .env file is honoured via python-dotenv.
"""

import logging
import os
import sys
from pathlib import Path

from dotenv import load_dotenv

load_dotenv()

# =============================================================================
# Configuration
# =============================================================================

OUTPUT_ROOT = Path(os.environ.get('FOCUSDROP_OUTPUT_ROOT', 'runs'))
DATA_DIR = Path(os.environ.get('FOCUSDROP_DATA_DIR', 'data'))
LOG_LEVEL = os.environ.get('FOCUSDROP_LOG_LEVEL', 'INFO').upper()
LOG_FILE = os.environ.get('FOCUSDROP_LOG_FILE', '')

LOG_FORMAT = '%(asctime)s [%(levelname)s] %(message)s'
LOG_DATEFMT = '%Y-%m-%d %H:%M:%S'


def configure_logging(level: str = None):
    """Configure root logging for an entry point (CLI, scripts)."""
    handlers = [logging.StreamHandler(sys.stdout)]
    if LOG_FILE:
        handlers.append(logging.FileHandler(LOG_FILE))

    logging.basicConfig(
        level=getattr(logging, (level or LOG_LEVEL).upper(), logging.INFO),
        format=LOG_FORMAT,
        datefmt=LOG_DATEFMT,
        handlers=handlers,
        force=True
    )
