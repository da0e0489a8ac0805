"""
Logging configuration for the library and CLI
Sets up structured logging with different handlers
"""

import logging
import logging.config
import sys
from datetime import datetime, timezone
from typing import Any, Dict, Optional

from pythonjsonlogger import jsonlogger

from .config import settings


class CustomJsonFormatter(jsonlogger.JsonFormatter):
    """Custom JSON formatter for structured logging"""

    def add_fields(self, log_record, record, message_dict):
        super(CustomJsonFormatter, self).add_fields(log_record, record, message_dict)

        # Add custom fields
        log_record["timestamp"] = datetime.now(timezone.utc).isoformat()
        log_record["level"] = record.levelname
        log_record["logger"] = record.name
        log_record["environment"] = settings.ENVIRONMENT

        # Add exception info if present
        if record.exc_info:
            log_record["exception"] = self.formatException(record.exc_info)


def build_logging_config(level: Optional[str] = None) -> Dict[str, Any]:
    """Build the dictConfig payload for the current settings"""
    level = (level or ("DEBUG" if settings.DEBUG else settings.LOG_LEVEL)).upper()
    use_text = settings.DEBUG or settings.LOG_FORMAT == "text"

    handlers: Dict[str, Dict[str, Any]] = {
        # stdout carries command results, logs stay on stderr
        "console": {
            "class": "logging.StreamHandler",
            "level": level,
            "formatter": "default" if use_text else "json",
            "stream": sys.stderr,
        }
    }
    if settings.LOG_FILE:
        handlers["file"] = {
            "class": "logging.handlers.RotatingFileHandler",
            "level": level,
            "formatter": "json",
            "filename": settings.LOG_FILE,
            "maxBytes": settings.LOG_MAX_BYTES,
            "backupCount": settings.LOG_BACKUP_COUNT,
        }

    return {
        "version": 1,
        "disable_existing_loggers": False,
        "formatters": {
            "default": {
                "format": "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
            },
            "json": {
                "()": CustomJsonFormatter,
                "format": "%(timestamp)s %(level)s %(name)s %(message)s",
            },
        },
        "handlers": handlers,
        "loggers": {
            "nestedot": {
                "level": level,
                "handlers": list(handlers),
                "propagate": False,
            }
        },
    }


def setup_logging(level: Optional[str] = None) -> None:
    """Configure logging for the CLI"""
    logging.config.dictConfig(build_logging_config(level))

    logger = logging.getLogger("nestedot")
    logger.debug(f"Logging configured for {settings.ENVIRONMENT} environment")
