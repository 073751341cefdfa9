import logging
import os
import json
from logging.handlers import TimedRotatingFileHandler
import sys

REPO_ROOT = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
DEFAULT_CONFIG_PATH = os.path.join(REPO_ROOT, "config", "config.json")
DEFAULT_LOG_FILE = os.path.join(REPO_ROOT, "logs", "ldlr_sda.log")
LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


class Logger:
    """
    Process-wide logger shared by the library, the suite driver and the CLI.
    """
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super(Logger, cls).__new__(cls)
            cls._instance._initialize_logger()
        return cls._instance

    def _initialize_logger(self):
        log_level = "INFO"
        log_file = DEFAULT_LOG_FILE
        backup_count = 30
        if os.path.exists(DEFAULT_CONFIG_PATH):
            with open(DEFAULT_CONFIG_PATH, 'r') as f:
                config = json.load(f)
            log_config = config.get("logging", {})
            log_level = log_config.get("level", log_level)
            log_file = log_config.get("file_path", log_file)
            backup_count = log_config.get("backup_count", backup_count)
        if not os.path.isabs(log_file):
            log_file = os.path.join(REPO_ROOT, log_file)

        self.logger = logging.getLogger("ldlr_sda")
        self.logger.setLevel(getattr(logging, log_level))
        self.logger.propagate = False

        console_handler = logging.StreamHandler(sys.stdout)
        console_handler.setFormatter(logging.Formatter(LOG_FORMAT))
        self.logger.addHandler(console_handler)

        # read-only checkouts still get console logging
        try:
            os.makedirs(os.path.dirname(log_file), exist_ok=True)
            file_handler = TimedRotatingFileHandler(
                log_file,
                when="d",
                interval=1,
                backupCount=backup_count
            )
            file_handler.setFormatter(logging.Formatter(LOG_FORMAT))
            self.logger.addHandler(file_handler)
        except OSError as e:
            self.logger.warning(f"File logging disabled: {e}")

    def get_logger(self):
        return self.logger

    def set_level(self, level: str) -> None:
        self.logger.setLevel(getattr(logging, level.upper()))
