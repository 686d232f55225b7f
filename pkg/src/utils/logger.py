import logging

DETAILED_FORMAT = '%(asctime)s | %(name)s | %(levelname)-8s | %(funcName)s:%(lineno)d | %(message)s'
FILE_FORMAT = '%(asctime)s | %(name)s | %(levelname)-8s | %(filename)s:%(funcName)s:%(lineno)d | %(message)s'
SIMPLE_FORMAT = '%(levelname)s: %(message)s'
DATE_FORMAT = '%Y-%m-%d %H:%M:%S'

# Every logger handed out by setup_logger, so level/format changes reach all modules
_LAB_LOGGERS = {}


def setup_logger(name, level=logging.INFO):
    """Set up a properly formatted named logger for one lab module."""
    logger = logging.getLogger(name)
    logger.setLevel(level)

    # Remove any existing handlers to avoid duplicates
    for handler in logger.handlers[:]:
        logger.removeHandler(handler)

    console_handler = logging.StreamHandler()
    console_handler.setLevel(level)
    console_handler.setFormatter(logging.Formatter(fmt=DETAILED_FORMAT, datefmt=DATE_FORMAT))

    logger.addHandler(console_handler)
    logger.propagate = False  # Prevent duplicate logs

    _LAB_LOGGERS[name] = logger
    return logger


def enable_file_logging(log_file, level=logging.DEBUG):
    """Attach one shared file handler (more detailed format) to every lab logger."""
    file_handler = logging.FileHandler(log_file)
    file_handler.setLevel(level)
    file_handler.setFormatter(logging.Formatter(fmt=FILE_FORMAT, datefmt=DATE_FORMAT))
    for logger in _LAB_LOGGERS.values():
        logger.addHandler(file_handler)
    return file_handler


def set_logging_level(level):
    """Set the logging level for all lab loggers.

    Args:
        level: logging.DEBUG, logging.INFO, logging.WARNING, logging.ERROR, logging.CRITICAL
    """
    for logger in _LAB_LOGGERS.values():
        logger.setLevel(level)
        for handler in logger.handlers:
            if not isinstance(handler, logging.FileHandler):
                handler.setLevel(level)


def configure_logging_format(simple=False):
    """Configure console logging format to be simple or detailed.

    Args:
        simple (bool): If True, use simple format. If False, use detailed format.
    """
    if simple:
        formatter = logging.Formatter(fmt=SIMPLE_FORMAT)
    else:
        formatter = logging.Formatter(fmt=DETAILED_FORMAT, datefmt=DATE_FORMAT)

    for logger in _LAB_LOGGERS.values():
        for handler in logger.handlers:
            if not isinstance(handler, logging.FileHandler):
                handler.setFormatter(formatter)
