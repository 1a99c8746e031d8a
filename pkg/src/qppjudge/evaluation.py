"""
Statistics for judging the quality of a predictor (correlation between
predicted and actual per-query values) and of a judge (agreement with
human labels), plus the sweeps built on top of them.

"""
import csv
from dataclasses import dataclass, field
import itertools
import math

import numpy as np
from scipy import stats

from .baselines import BaselineSpec, predict_baseline
from .errors import (
    ConfigError,
    EmptyIntersectionError,
    QppError,
    UndefinedCorrelationError,
    ValidationError,
)
from .judges import threshold_judge
from .logger import SilentLogger
from .metrics import MetricSpec, predict_run
from .store import JudgmentStore


@dataclass(frozen=True)
class PairedSeries:
    """Predicted and actual values aligned by query id."""

    query_ids: tuple
    predicted: tuple
    actual: tuple

    def __post_init__(self):
        n = len(self.query_ids)
        if n != len(self.predicted) or n != len(self.actual):
            raise ValidationError('paired series must have equal lengths')
        if n < 2:
            raise UndefinedCorrelationError(
                'at least 2 queries are needed, got {}'.format(n)
            )
        if len(set(self.query_ids)) != n:
            raise ValidationError('query ids must be unique')
        for value in itertools.chain(self.predicted, self.actual):
            if value is None or not math.isfinite(value):
                raise ValidationError('series contain a missing value')

    @classmethod
    def from_values(cls, predicted, actual):
        qids = tuple(sorted(predicted))
        return cls(
            qids,
            tuple(float(predicted[q]) for q in qids),
            tuple(float(actual[q]) for q in qids),
        )

    @classmethod
    def align(cls, predicted, actual, logger=None):
        """
        Pair two ``{query_id: value}`` maps on their shared query ids.

        Queries present on one side only are dropped with a warning.

        """
        if logger is None:
            logger = SilentLogger()
        shared = set(predicted) & set(actual)
        only_predicted = len(predicted) - len(shared)
        only_actual = len(actual) - len(shared)
        if only_predicted or only_actual:
            logger.warn(
                'dropped {} predicted-only and {} actual-only queries'.format(
                    only_predicted, only_actual
                )
            )
        if len(shared) < 2:
            raise EmptyIntersectionError(
                'predicted and actual values share {} queries; '
                'at least 2 are needed'.format(len(shared))
            )
        return cls.from_values(
            {q: predicted[q] for q in shared}, {q: actual[q] for q in shared}
        )

    def __len__(self):
        return len(self.query_ids)

    def arrays(self):
        return (
            np.asarray(self.predicted, dtype=float),
            np.asarray(self.actual, dtype=float),
        )


def _require_variation(x, y, what):
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise UndefinedCorrelationError(
            '{} is undefined: one side is constant (are all predictions '
            'equal? check the judge output and the judging depth)'.format(what)
        )


def pearson(series):
    x, y = series.arrays()
    _require_variation(x, y, "Pearson's r")
    return float(stats.pearsonr(x, y)[0])


def kendall_tau_b(series):
    x, y = series.arrays()
    _require_variation(x, y, "Kendall's tau-b")
    return float(stats.kendalltau(x, y, variant='b')[0])


def spearman(series):
    x, y = series.arrays()
    _require_variation(x, y, "Spearman's rho")
    return float(stats.spearmanr(x, y)[0])


def smare(series):
    """
    Scaled mean absolute ranking error: the mean of
    ``|rank_predicted - rank_actual| / n`` with ties given their mean rank.
    """
    x, y = series.arrays()
    n = len(series)
    errors = np.abs(stats.rankdata(x) - stats.rankdata(y)) / n
    return float(np.mean(errors))


def pearson_significance(r, n):
    """Two-tailed p-value of Pearson's ``r`` over ``n`` pairs."""
    if n < 3:
        raise ValidationError('significance needs at least 3 pairs')
    if abs(r) >= 1:
        return 0.0
    t = r * math.sqrt((n - 2) / (1 - r * r))
    return float(2 * stats.t.sf(abs(t), n - 2))


@dataclass(frozen=True)
class CorrelationReport:
    pearson: float
    kendall_tau_b: float
    spearman: float
    smare: float
    pearson_p_value: float
    n_queries: int

    def to_json(self):
        return {
            'pearson': self.pearson,
            'kendall_tau_b': self.kendall_tau_b,
            'spearman': self.spearman,
            'smare': self.smare,
            'pearson_p_value': self.pearson_p_value,
            'n_queries': self.n_queries,
        }

    def row(self):
        return [
            self.pearson,
            self.kendall_tau_b,
            self.spearman,
            self.smare,
            self.pearson_p_value,
            self.n_queries,
        ]


REPORT_COLUMNS = ['pearson', 'kendall', 'spearman', 'smare', 'p_value', 'n']


def evaluate(series):
    """Compute every correlation statistic for ``series``."""
    r = pearson(series)
    n = len(series)
    return CorrelationReport(
        pearson=r,
        kendall_tau_b=kendall_tau_b(series),
        spearman=spearman(series),
        smare=smare(series),
        pearson_p_value=pearson_significance(r, n) if n >= 3 else 1.0,
        n_queries=n,
    )


def evaluate_values(predicted, actual, logger=None):
    return evaluate(PairedSeries.align(predicted, actual, logger=logger))


@dataclass(frozen=True)
class ConfusionMatrix2x2:
    """
    Generated judgments (predicted) against human labels (actual).

    ``excluded`` counts judged pairs that had no human label.

    """

    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0
    excluded: int = 0

    def __post_init__(self):
        for name in ('tp', 'fp', 'fn', 'tn', 'excluded'):
            if getattr(self, name) < 0:
                raise ValidationError('{} must be non-negative'.format(name))

    @property
    def total(self):
        return self.tp + self.fp + self.fn + self.tn

    def _ratio(self, num, den):
        return num / den if den else None

    @property
    def precision(self):
        return self._ratio(self.tp, self.tp + self.fp)

    @property
    def recall(self):
        return self._ratio(self.tp, self.tp + self.fn)

    @property
    def accuracy(self):
        return self._ratio(self.tp + self.tn, self.total)

    @property
    def f1(self):
        return self._ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn)

    def to_json(self):
        return {
            'tp': self.tp,
            'fp': self.fp,
            'fn': self.fn,
            'tn': self.tn,
            'excluded': self.excluded,
            'total': self.total,
            'precision': self.precision,
            'recall': self.recall,
            'accuracy': self.accuracy,
            'f1': self.f1,
        }


def build_confusion(judgments, qrels, min_grade=2):
    """
    Count agreement between generated judgments and human qrels.

    Pairs without a human grade are left out and counted in
    ``excluded``. The human side is relevant iff ``grade >= min_grade``.

    """
    counts = {'tp': 0, 'fp': 0, 'fn': 0, 'tn': 0}
    excluded = 0
    for record in judgments:
        grade = qrels.get((record.query_id, record.doc_id))
        if grade is None:
            excluded += 1
            continue
        human = grade >= min_grade
        if record.label and human:
            counts['tp'] += 1
        elif record.label:
            counts['fp'] += 1
        elif human:
            counts['fn'] += 1
        else:
            counts['tn'] += 1
    if not any(counts.values()):
        raise EmptyIntersectionError(
            'no judged pair has a human label ({} excluded)'.format(excluded)
        )
    return ConfusionMatrix2x2(excluded=excluded, **counts)


def cohen_kappa(m):
    """Cohen's kappa of a 2x2 confusion matrix."""
    total = float(m.total)
    if total <= 0:
        raise ValidationError('confusion matrix is empty')
    observed = (m.tp + m.tn) / total
    predicted_pos = (m.tp + m.fp) / total
    actual_pos = (m.tp + m.fn) / total
    expected = predicted_pos * actual_pos + (1 - predicted_pos) * (
        1 - actual_pos
    )
    if expected >= 1:
        raise UndefinedCorrelationError(
            'kappa is undefined: both labelers use a single label'
        )
    return (observed - expected) / (1 - expected)


def error_distances(predicted, actual):
    """
    Per-query ``predicted - actual`` on shared queries plus a summary.
    """
    shared = sorted(set(predicted) & set(actual))
    if not shared:
        raise EmptyIntersectionError('no shared queries')
    deltas = {q: float(predicted[q]) - float(actual[q]) for q in shared}
    values = np.asarray(list(deltas.values()))
    summary = {
        'n': len(shared),
        'mean': float(values.mean()),
        'mean_absolute': float(np.abs(values).mean()),
        'overestimated': int((values > 0).sum()),
        'underestimated': int((values < 0).sum()),
        'exact': int((values == 0).sum()),
    }
    return deltas, summary


@dataclass
class SweepRow:
    key: float
    report: CorrelationReport = None
    error: str = None
    failed_queries: dict = field(default_factory=dict)


def _evaluate_row(key, result, actual, logger):
    row = SweepRow(key, failed_queries=dict(result.errors))
    try:
        row.report = evaluate_values(result.values(), actual, logger=logger)
    except QppError as ex:
        logger.warn('{}: {}'.format(key, ex))
        row.error = str(ex)
    return row


def depth_sweep(
    run,
    judge,
    store,
    kind,
    k,
    depths,
    actual,
    collection=None,
    stats=None,
    logger=None,
):
    """
    Correlate predictions at each judging depth with ``actual``.

    Depths are processed in ascending order against a shared store, so a
    deeper pass only judges the items the previous pass did not reach.

    """
    if logger is None:
        logger = SilentLogger()
    depths = list(depths)
    if not depths:
        raise ConfigError('at least one depth is required')
    if depths != sorted(depths):
        raise ConfigError('depths must be sorted ascending')
    if depths[0] < k:
        raise ConfigError('every depth must be >= the cutoff {}'.format(k))

    rows = []
    for depth in depths:
        spec = MetricSpec(kind, k, depth)
        result = predict_run(
            run,
            judge,
            store,
            spec,
            collection=collection,
            stats=stats,
            logger=logger,
        )
        rows.append(_evaluate_row(depth, result, actual, logger))
    return rows


def threshold_scan(
    run, score_table, actual, spec, thetas, store=None, logger=None
):
    """
    Correlate threshold-judge predictions with ``actual`` for each theta.
    """
    if logger is None:
        logger = SilentLogger()
    if store is None:
        store = JudgmentStore()
    rows = []
    for theta in thetas:
        judge = threshold_judge(score_table, theta)
        result = predict_run(run, judge, store, spec, logger=logger)
        rows.append(_evaluate_row(theta, result, actual, logger))
    return rows


def write_sweep_csv(rows, stream, key='depth'):
    writer = csv.writer(stream, lineterminator='\n')
    writer.writerow([key] + REPORT_COLUMNS + ['error'])
    for row in rows:
        if row.report is not None:
            values = row.report.row()
        else:
            values = [''] * len(REPORT_COLUMNS)
        writer.writerow([row.key] + values + [row.error or ''])


@dataclass
class TuningResult:
    spec: BaselineSpec
    report: CorrelationReport
    scores: list = field(default_factory=list)


def candidate_grid(method, ks=(), xs=(), **kw):
    """Expand hyper-parameter lists into a list of :class:`BaselineSpec`."""
    if method == 'sigma_max':
        return [BaselineSpec(method, **kw)]
    if method == 'n_sigma_x':
        return [BaselineSpec(method, x=x, **kw) for x in xs]
    return [BaselineSpec(method, k=k, **kw) for k in ks]


def tune_baseline(
    run, actual, candidates, queries=None, corpus_scores=None, logger=None
):
    """
    Pick the candidate with the highest Pearson correlation on ``run``.

    Candidates whose correlation is undefined are skipped. Ties are broken
    by the smaller ``k`` and then the smaller ``x``.

    """
    if logger is None:
        logger = SilentLogger()
    if not candidates:
        raise ConfigError('the candidate grid is empty')

    scored = []
    for spec in candidates:
        result = predict_baseline(
            run, spec, queries=queries, corpus_scores=corpus_scores
        )
        try:
            report = evaluate_values(result.values(), actual)
        except QppError as ex:
            logger.warn('{}: {}'.format(spec.name, ex))
            continue
        logger.debug('{}: pearson={:.4f}'.format(spec.name, report.pearson))
        scored.append((spec, report))

    if not scored:
        raise UndefinedCorrelationError(
            'no candidate produced a defined correlation'
        )
    spec, report = min(
        scored, key=lambda item: (-item[1].pearson, item[0].k, item[0].x)
    )
    return TuningResult(
        spec,
        report,
        [(s.name, r.pearson) for s, r in scored],
    )
