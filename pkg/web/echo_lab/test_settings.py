from .settings import *  # noqa: F403

# Keep test runs single-threaded unless a test asks for more workers
ECHO_LAB_THREADS = 1

# Disable logging during tests
LOGGING_CONFIG = None
