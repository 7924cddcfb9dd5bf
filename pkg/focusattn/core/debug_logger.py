"""
Debug logging utility for focusattn.
Writes timestamped debug messages to a per-process log file.

Logging is off unless PFA_DEBUG is set (or enable_debug_logging() is called,
which the CLI does for --debug). The log directory comes from PFA_LOG_DIR.
"""

import os
import threading
from datetime import datetime

LEVELS = {"DEBUG": 10, "INFO": 20, "WARNING": 30, "ERROR": 40}


def _env_flag(name):
    return os.environ.get(name, "").strip().lower() in {"1", "true", "yes", "on"}


class DebugLogger:
    _instance = None
    _lock = threading.Lock()

    def __new__(cls):
        if cls._instance is None:
            with cls._lock:
                if cls._instance is None:
                    cls._instance = super(DebugLogger, cls).__new__(cls)
        return cls._instance

    def __init__(self):
        if not hasattr(self, 'initialized'):
            self.initialized = True
            self.enabled = _env_flag("PFA_DEBUG")
            self.log_dir = os.environ.get("PFA_LOG_DIR", "logs")
            self.min_level = LEVELS.get(os.environ.get("PFA_LOG_LEVEL", "DEBUG").upper(), 10)
            self.log_file = None
            self._write_lock = threading.Lock()

    def configure(self, enabled=None, log_dir=None, min_level=None):
        """Change settings; a new file is started on the next write."""
        with self._write_lock:
            if enabled is not None:
                self.enabled = enabled
            if log_dir is not None and log_dir != self.log_dir:
                self.log_dir = log_dir
                self.log_file = None
            if min_level is not None:
                self.min_level = LEVELS[min_level.upper()]

    def create_log_file(self):
        """Create a new log file with timestamp."""
        os.makedirs(self.log_dir, exist_ok=True)
        timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
        log_path = os.path.join(self.log_dir, f"pfa_debug_{timestamp}_{os.getpid()}.txt")

        with open(log_path, 'w', encoding='utf-8') as f:
            f.write("=== focusattn debug log ===\n")
            f.write(f"Started: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}\n")
            f.write(f"{'=' * 50}\n\n")

        return log_path

    def log(self, message, module="GENERAL", level="DEBUG"):
        """Write a debug message to the log file."""
        if not self.enabled or LEVELS.get(level, 10) < self.min_level:
            return
        timestamp = datetime.now().strftime("%Y-%m-%d %H:%M:%S.%f")[:-3]
        formatted_message = f"[{timestamp}] [{level}] [{module}] {message}\n"

        with self._write_lock:
            try:
                if self.log_file is None:
                    self.log_file = self.create_log_file()
                with open(self.log_file, 'a', encoding='utf-8') as f:
                    f.write(formatted_message)
            except OSError as e:
                # Fallback to console if file write fails
                print(f"LOG ERROR: {e}")
                print(formatted_message.strip())

    def get_log_path(self):
        """Return the current log file path (None until the first write)."""
        return self.log_file


# Global logger instance
_logger = DebugLogger()


def debug_log(message, module="GENERAL", level="DEBUG"):
    """Convenience function for logging debug messages."""
    _logger.log(message, module, level)


def enable_debug_logging(log_dir=None, level="DEBUG"):
    """Turn file logging on for this process."""
    _logger.configure(enabled=True, log_dir=log_dir, min_level=level)


def get_current_log_file():
    """Get the path to the current log file."""
    return _logger.get_log_path()
