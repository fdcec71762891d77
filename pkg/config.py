import logging
import os
from dotenv import load_dotenv


def setup_logging(level=None):
    """Configure logging for the application"""
    if level is None:
        level = os.getenv("LOG_LEVEL", "INFO").upper()
    logging.basicConfig(
        level=level,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        force=True,  # Override any existing config
    )


def thread_limit() -> int:
    """Worker threads allowed for internal parallelism (RELAYCANCEL_THREADS)."""
    raw = os.getenv("RELAYCANCEL_THREADS")
    if not raw:
        return os.cpu_count() or 1

    try:
        threads = int(raw)
    except ValueError:
        threads = 0
    if threads < 1:
        logging.warning(f"Ignoring invalid RELAYCANCEL_THREADS={raw!r}, using 1 thread")
        return 1
    return threads


def setup_environment():
    """Load environment variables"""
    load_dotenv()


def init_app():
    """Initialize common app setup - call from entry points"""
    setup_environment()
    setup_logging()
