import logging

# Training progress sits between DEBUG and INFO
PROGRESS_LEVEL = 15
logging.addLevelName(PROGRESS_LEVEL, "PROGRESS")

def progress(self, message, *args, **kws):
    if self.isEnabledFor(PROGRESS_LEVEL):
        self._log(PROGRESS_LEVEL, message, args, **kws)

logging.Logger.progress = progress

class Logger:

    instances = {}

    def __init__(self, identifierName: str):
        self.log = logging.getLogger(identifierName)
        CustomFormatter().setup(self.log)
        if self.log.level == logging.NOTSET:
            self.log.setLevel(logging.INFO)
        Logger.instances[identifierName] = self

    def error(self, errorMsg):
        self.log.error(errorMsg)

    def info(self, infoMsg):
        self.log.info(infoMsg)

    def debug(self, debugMsg):
        self.log.debug(debugMsg)

    def warning(self, warningMsg):
        self.log.warning(warningMsg)

    def progress(self, progressMsg):
        self.log.progress(progressMsg)

    def activate_progress(self):
        self.log.setLevel(PROGRESS_LEVEL)

    def activate_debug(self):
        self.log.setLevel(logging.DEBUG)

    def errors_only(self):
        self.log.setLevel(logging.ERROR)


def configure_all(verbose=False, quiet=False):
    """Apply the CLI verbosity flags to every logger created through `Logger`."""
    for logger in Logger.instances.values():
        if quiet:
            logger.errors_only()
        elif verbose:
            logger.activate_debug()
        else:
            logger.activate_progress()


class CustomFormatter(logging.Formatter):

    colors = {
        'PROGRESS': '\033[94m',     # Blue
        'DEBUG': '\x1b[38;20m',   # Gray
        'INFO': '\033[38;2;33;213;33m',    # Green
        'WARNING': '\033[93m',    # Yellow
        'ERROR': '\033[91m',      # Red
        'CRITICAL': '\033[1;31m'  # Dark Red
    }

    reset = '\033[0m'
    fmt = '%(name)s %(levelname)-8s %(message)s'

    def format(self, record):
        color = self.colors.get(record.levelname, self.reset)
        formatter = logging.Formatter(color + self.fmt + self.reset)
        return formatter.format(record)

    def setup(self, logger):
        logger.propagate = False

        if not any(isinstance(handler, logging.StreamHandler) for handler in logger.handlers):
            console_handler = logging.StreamHandler()
            console_handler.setFormatter(self)
            logger.addHandler(console_handler)
