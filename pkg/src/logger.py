import logging

LOG_FILE = "app.log"
LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

def get_logger(name):
    """Returns the named logger, attaching the shared app.log file handler on first use.

    Records still propagate to the root logger, so console handlers added by the
    command line (and pytest's caplog) see everything written here.
    """
    logger = logging.getLogger(name)

    if not logger.hasHandlers():
        logger.setLevel(logging.DEBUG)

        file_handler = logging.FileHandler(LOG_FILE)
        file_handler.setLevel(logging.DEBUG)

        formatter = logging.Formatter(LOG_FORMAT)
        file_handler.setFormatter(formatter)

        logger.addHandler(file_handler)

    return logger

def attach_console_handler(verbose=False):
    """Adds a stderr handler on the root logger for command line runs.

    Args:
        verbose: A boolean, True to show DEBUG records, else INFO and above.

    Returns:
        The attached logging.StreamHandler.
    """
    root = logging.getLogger()

    for handler in list(root.handlers):
        if getattr(handler, "_vte_console", False):
            root.removeHandler(handler)

    console_handler = logging.StreamHandler()
    console_handler.setLevel(logging.DEBUG if verbose else logging.INFO)
    console_handler.setFormatter(logging.Formatter('%(levelname)s - %(message)s'))
    console_handler._vte_console = True

    root.addHandler(console_handler)
    root.setLevel(logging.DEBUG if verbose else logging.INFO)

    return console_handler
