"""
Experiment configuration.

Values are resolved in this order: command-line flags, then the YAML file
given with ``--config``, then the defaults below. A config file is a
mapping of :class:`RunConfig` keys plus optional ``judge`` and
``judge.retry`` sub-mappings::

    run: runs/bm25.dl19.run
    qrels: qrels/dl19.qrels
    metrics: [rr@10, ndcg@10]
    depth: 100
    judge:
      judge_kind: llm
      endpoint_url: http://localhost:8000/v1/completions
      model_name: llama-7b-judge
      retry:
        max_attempts: 5

"""
from dataclasses import dataclass, field, fields
import os

import yaml

from .client import RetryPolicy
from .errors import ConfigError
from .judges import JudgeConfig
from .utils import default

DEFAULT_KS = (5, 10, 15, 20, 25, 50, 100, 300, 500, 1000)
DEFAULT_XS = (0.25, 0.4, 0.5, 0.6, 0.75, 0.9)


@dataclass
class RunConfig:
    run: str = None
    qrels: str = None
    queries: str = None
    corpus: str = None
    collection_format: str = 'tsv'
    judgments: str = None
    actual: str = None
    actual_measure: str = None
    predicted: str = None
    score_table: str = None
    demonstrations: str = None
    corpus_scores: str = None
    output_dir: str = '.'
    log_level: str = 'info'
    seed: int = 0
    max_length: int = 1000
    metrics: list = field(default_factory=lambda: ['ndcg@10'])
    depth: int = None
    depths: list = field(default_factory=lambda: [10, 100])
    method: str = 'nqc'
    k: int = 100
    x: float = 0.5
    corpus_score_mode: str = 'mean_of_list'
    normalizer: str = 'count'
    theta_min: float = None
    theta_max: float = None
    theta_step: float = 0.5
    ks: list = field(default_factory=lambda: list(DEFAULT_KS))
    xs: list = field(default_factory=lambda: list(DEFAULT_XS))
    eval_run: str = None
    eval_actual: str = None
    judge_id: str = None
    num_demonstrations: int = None
    judge: JudgeConfig = field(default_factory=JudgeConfig)

    def require(self, *names):
        """Raise unless every named path option is set and exists."""
        for name in names:
            path = getattr(self, name)
            if path is None:
                raise ConfigError(
                    '--{} is required'.format(name.replace('_', '-'))
                )
            if not os.path.exists(path):
                raise ConfigError(
                    '{} file {} does not exist'.format(name, path)
                )


RUN_KEYS = {f.name for f in fields(RunConfig)} - {'judge'}
JUDGE_KEYS = {f.name for f in fields(JudgeConfig)} - {'retry'}
RETRY_KEYS = {f.name for f in fields(RetryPolicy)}


def read_config_file(path):
    """Load a YAML config file into a dict."""
    try:
        with open(path, 'r', encoding='utf-8') as fp:
            values = yaml.safe_load(fp)
    except OSError as ex:
        raise ConfigError('cannot read config {}: {}'.format(path, ex))
    except yaml.YAMLError as ex:
        raise ConfigError('invalid config {}: {}'.format(path, ex))
    if values is None:
        return {}
    if not isinstance(values, dict):
        raise ConfigError('config {} must be a mapping'.format(path))
    return values


def _apply(target, values, allowed, where):
    for key, value in values.items():
        if key not in allowed:
            raise ConfigError('unknown key {!r} in {}'.format(key, where))
        setattr(target, key, value)


def apply_file_values(config, values):
    values = dict(values)
    judge = dict(values.pop('judge', {}))
    retry = judge.pop('retry', {})
    _apply(config, values, RUN_KEYS, 'config')
    _apply(config.judge, judge, JUDGE_KEYS, 'judge')
    _apply(config.judge.retry, retry, RETRY_KEYS, 'judge.retry')
    return config


def apply_overrides(config, overrides):
    """
    Apply ``{dotted.key: value}`` overrides, skipping the ``default``
    sentinel used for unset command-line options.
    """
    for key, value in overrides.items():
        if value is default:
            continue
        target = config
        *parents, name = key.split('.')
        for parent in parents:
            target = getattr(target, parent)
        setattr(target, name, value)
    return config


def build_config(overrides, config_path=None):
    config = RunConfig()
    if config_path is not None:
        apply_file_values(config, read_config_file(config_path))
    return apply_overrides(config, overrides)
