import importlib
import os

API_KEY_ENV = 'QPP_API_KEY'
DEFAULT_JUDGE_ENV = 'QPP_DEFAULT_JUDGE'


class Sentinel(object):
    def __init__(self, name):
        self.name = name

    def __repr__(self):
        return '<{0}>'.format(self.name)


default = Sentinel('default')


def resolve_spec(spec):
    modname, funcname = spec.rsplit('.', 1)
    module = importlib.import_module(modname)
    func = getattr(module, funcname)
    return func


def get_api_key():
    """Return the endpoint credentials from ``QPP_API_KEY`` or ``None``."""
    return os.getenv(API_KEY_ENV) or None


def find_custom_judge_factory():
    """
    Return the judge factory named by ``QPP_DEFAULT_JUDGE`` or ``None``.

    The value must be a dotted path to a callable accepting a
    :class:`qppjudge.judges.JudgeConfig` and returning an
    :class:`qppjudge.interfaces.IJudge`.

    """
    spec = os.getenv(DEFAULT_JUDGE_ENV)
    if spec:
        return resolve_spec(spec)
    return None


def frange(start, stop, step):
    """
    Yield ``start``, ``start + step``, ... up to and including ``stop``.

    Values are computed as ``start + i * step`` so rounding errors do not
    accumulate across the range.

    """
    count = int((stop - start) / step + 1e-9) + 1
    for i in range(max(count, 0)):
        yield start + i * step
