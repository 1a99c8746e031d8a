"""
Predicted IR measures computed from binary judgment vectors, and the
per-query prediction pipeline.

The discount follows the binary DCG form: rank 1 is undiscounted and rank
``i >= 2`` is divided by ``log2(i)``. The ideal DCG is approximated from
the labels inside the judged top-n only.

"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import json

import numpy as np

from .errors import ConfigError, DepthShortfallError, QppError
from .judges import (
    JudgingStats,
    JudgmentVector,
    ThrottledJudge,
    judge_list,
)
from .logger import SilentLogger

METRIC_KINDS = ('rr', 'ndcg', 'precision')

_METRIC_NAMES = {
    'rr': 'rr',
    'mrr': 'rr',
    'recip_rank': 'rr',
    'ndcg': 'ndcg',
    'ndcg_cut': 'ndcg',
    'p': 'precision',
    'precision': 'precision',
}

_SHORT_NAMES = {'rr': 'rr', 'ndcg': 'ndcg', 'precision': 'p'}


@dataclass(frozen=True)
class MetricSpec:
    """
    A target measure ``kind@cutoff`` predicted from judgments at ``depth``.

    ``depth`` defaults to ``cutoff``.

    """

    kind: str
    cutoff: int
    depth: int = None

    def __post_init__(self):
        if self.kind not in METRIC_KINDS:
            raise ConfigError('unknown metric kind {!r}'.format(self.kind))
        if self.cutoff < 1:
            raise ConfigError('metric cutoff must be >= 1')
        if self.depth is None:
            object.__setattr__(self, 'depth', self.cutoff)
        if self.depth < self.cutoff:
            raise ConfigError(
                'judging depth {} is smaller than cutoff {}'.format(
                    self.depth, self.cutoff
                )
            )

    @property
    def name(self):
        return '{}@{}'.format(_SHORT_NAMES[self.kind], self.cutoff)


def parse_metric(text, depth=None):
    """Parse ``rr@10``, ``ndcg@10`` or ``p@10`` into a :class:`MetricSpec`."""
    try:
        name, cutoff = text.strip().lower().split('@')
        cutoff = int(cutoff)
        kind = _METRIC_NAMES[name]
    except (ValueError, KeyError):
        raise ConfigError(
            'invalid metric {!r}; expected e.g. rr@10, ndcg@10, p@10'.format(
                text
            )
        )
    return MetricSpec(kind, cutoff, depth)


def _labels(j, k):
    if k < 1:
        raise ConfigError('cutoff must be >= 1')
    if isinstance(j, JudgmentVector):
        labels, length = j.labels, j.list_length
    else:
        labels = tuple(j)
        length = len(labels)
    if len(labels) < min(k, length):
        raise DepthShortfallError(
            'judgments cover {} positions but {} are needed'.format(
                len(labels), min(k, length)
            )
        )
    return np.asarray(labels, dtype=float)


def _discounts(size):
    discounts = np.ones(size)
    if size > 1:
        discounts[1:] = 1.0 / np.log2(np.arange(2, size + 1, dtype=float))
    return discounts


def _gain(labels):
    return float(np.dot(labels, _discounts(len(labels))))


def rr_at_k(j, k):
    labels = _labels(j, k)[:k]
    hits = np.flatnonzero(labels)
    if hits.size == 0:
        return 0.0
    return 1.0 / (int(hits[0]) + 1)


def dcg_at_k(j, k):
    return _gain(_labels(j, k)[:k])


def idcg_at_k(j, k):
    """DCG of the judged labels re-sorted in descending order."""
    ideal = np.sort(_labels(j, k))[::-1]
    return _gain(ideal[:k])


def ndcg_at_k(j, k):
    """``dcg / idcg``; ``0.0`` when nothing in the judged top-n is relevant."""
    idcg = idcg_at_k(j, k)
    if idcg == 0:
        return 0.0
    return dcg_at_k(j, k) / idcg


def precision_at_k(j, k):
    labels = _labels(j, k)[:k]
    return float(labels.sum()) / k


METRIC_FUNCTIONS = {
    'rr': rr_at_k,
    'ndcg': ndcg_at_k,
    'precision': precision_at_k,
}


def compute_metric(spec, vector):
    func = METRIC_FUNCTIONS[spec.kind]
    return func(vector.truncate(spec.depth), spec.cutoff)


@dataclass(frozen=True)
class QppPrediction:
    query_id: str
    value: float


@dataclass
class PredictionResult:
    """
    Per-query predictions plus an error manifest.

    ``errors`` maps the query ids that could not be predicted to a
    message; those queries are absent from ``predictions``.

    """

    name: str
    predictions: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def add(self, query_id, value):
        self.predictions[query_id] = QppPrediction(query_id, float(value))

    def values(self):
        preds = self.predictions
        return {qid: preds[qid].value for qid in sorted(preds)}

    def __len__(self):
        return len(self.predictions)

    @property
    def ok(self):
        return not self.errors

    def to_json(self):
        return {
            'name': self.name,
            'meta': self.meta,
            'predictions': self.values(),
            'errors': {qid: self.errors[qid] for qid in sorted(self.errors)},
        }


def write_prediction_report(result, stream):
    json.dump(result.to_json(), stream, indent=2, sort_keys=True)
    stream.write('\n')


def predict_many(
    run,
    judge,
    store,
    specs,
    collection=None,
    stats=None,
    logger=None,
):
    """
    Predict several measures from a single judging pass per query.

    Every list is judged once at the deepest depth among ``specs``; each
    measure then reads its own prefix of the judgment vector. Returns
    ``{spec.name: PredictionResult}``.

    Queries are judged in parallel when ``judge.max_in_flight > 1``; the
    judge calls of all queries together stay within that limit.

    """
    if not specs:
        raise ConfigError('at least one metric is required')
    if logger is None:
        logger = SilentLogger()
    if stats is None:
        stats = JudgingStats()
    depth = max(spec.depth for spec in specs)
    results = {}
    for spec in specs:
        results[spec.name] = PredictionResult(
            spec.name,
            meta={
                'kind': spec.kind,
                'cutoff': spec.cutoff,
                'depth': spec.depth,
                'judge': judge.identity,
            },
        )

    qids = sorted(run)

    def judge_one(qid, judge=judge):
        try:
            vector = judge_list(
                run[qid],
                depth,
                judge,
                store,
                collection=collection,
                stats=stats,
                logger=logger,
            )
        except QppError as ex:
            return None, ex
        return vector, None

    if len(qids) > 1 and judge.max_in_flight > 1:
        shared = ThrottledJudge(judge)
        workers = min(judge.max_in_flight, len(qids))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(
                pool.map(lambda qid: judge_one(qid, shared), qids)
            )
    else:
        outcomes = [judge_one(qid) for qid in qids]

    for qid, (vector, error) in zip(qids, outcomes):
        if error is not None:
            logger.error('judging failed: {}'.format(error))
            for result in results.values():
                result.errors[qid] = str(error)
            continue
        for spec in specs:
            results[spec.name].add(qid, compute_metric(spec, vector))
    return results


def predict_run(
    run, judge, store, spec, collection=None, stats=None, logger=None
):
    """Predict ``spec`` for every query in ``run``."""
    results = predict_many(
        run,
        judge,
        store,
        [spec],
        collection=collection,
        stats=stats,
        logger=logger,
    )
    return results[spec.name]
