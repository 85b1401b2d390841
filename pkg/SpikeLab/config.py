import os
import logging
from pathlib import Path
from dotenv import load_dotenv

load_dotenv(dotenv_path=Path(__file__).resolve().parent / ".env")
logger = logging.getLogger(__name__)

BASE_DIR = os.path.dirname(os.path.abspath(__file__))

OUTPUT_DIR = os.getenv("SPIKELAB_OUTPUT_DIR") or os.path.join(os.getcwd(), "runs")

try:
    MAX_WORKERS = max(1, int(os.getenv("SPIKELAB_MAX_WORKERS", "4")))
except ValueError:
    logger.warning(f"Invalid SPIKELAB_MAX_WORKERS: '{os.getenv('SPIKELAB_MAX_WORKERS')}'. Falling back to 4.")
    MAX_WORKERS = 4

LOG_LEVEL = os.getenv("SPIKELAB_LOG_LEVEL", "INFO").upper()
if LOG_LEVEL not in {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}:
    logger.warning(f"Invalid SPIKELAB_LOG_LEVEL: '{LOG_LEVEL}'. Falling back to INFO.")
    LOG_LEVEL = "INFO"

DB_NAME = os.getenv("SPIKELAB_DB") or os.path.join(BASE_DIR, "spikelab_runs.db")

try:
    DENSE_LIMIT = int(os.getenv("SPIKELAB_DENSE_LIMIT", "2400"))
except ValueError:
    logger.warning(f"Invalid SPIKELAB_DENSE_LIMIT: '{os.getenv('SPIKELAB_DENSE_LIMIT')}'. Falling back to 2400.")
    DENSE_LIMIT = 2400
