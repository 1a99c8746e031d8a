from __future__ import print_function
import sys

from .interfaces import ILogger


class LogLevel:
    ERROR = 0
    WARN = 1
    INFO = 2
    DEBUG = 3


class DefaultLogger(ILogger):
    def __init__(self, level=LogLevel.INFO, stream=None):
        self.level = level
        self.stream = stream

    def _out(self, level, msg):
        if level <= self.level:
            print(msg, file=self.stream or sys.stderr)

    def error(self, msg):
        self._out(LogLevel.ERROR, '[ERROR] ' + msg)

    def warn(self, msg):
        self._out(LogLevel.WARN, '[WARN] ' + msg)

    def info(self, msg):
        self._out(LogLevel.INFO, msg)

    def debug(self, msg):
        self._out(LogLevel.DEBUG, '[DEBUG] ' + msg)


class SilentLogger(ILogger):
    def error(self, msg):
        pass

    def warn(self, msg):
        pass

    def info(self, msg):
        pass

    def debug(self, msg):
        pass


def level_from_name(name):
    """Map a config value such as ``"debug"`` onto a :class:`LogLevel`."""
    try:
        return getattr(LogLevel, str(name).upper())
    except AttributeError:
        from .errors import ConfigError

        raise ConfigError('unknown log level {!r}'.format(name))
