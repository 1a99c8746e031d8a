import itertools
import math
import threading
import time

import pytest

from qppjudge.errors import ConfigError, DepthShortfallError
from qppjudge.judges import JudgmentVector, oracle_judge, threshold_judge
from qppjudge.metrics import (
    MetricSpec,
    dcg_at_k,
    idcg_at_k,
    ndcg_at_k,
    parse_metric,
    precision_at_k,
    predict_many,
    predict_run,
    rr_at_k,
)
from qppjudge.store import JudgmentStore
from qppjudge.trec import Qrels

from . import util

LOG2_3 = math.log(3, 2)


def reference_dcg(labels, k):
    total = 0.0
    for i, label in enumerate(labels[:k], start=1):
        if i == 1:
            total += label
        else:
            total += label / math.log(i, 2)
    return total


def reference_rr(labels, k):
    for i, label in enumerate(labels[:k], start=1):
        if label:
            return 1.0 / i
    return 0.0


def reference_idcg(labels, k):
    return reference_dcg(sorted(labels, reverse=True), k)


def test_rr_examples():
    assert rr_at_k([1, 0, 0], 3) == 1.0
    assert rr_at_k([0, 0, 0], 3) == 0.0
    assert rr_at_k([0, 0, 1, 0], 10) == pytest.approx(1 / 3)


def test_dcg_examples():
    assert dcg_at_k([1, 1, 1], 3) == pytest.approx(2 + 1 / LOG2_3)
    assert dcg_at_k([0, 0, 0], 3) == 0.0
    assert dcg_at_k([0, 1, 1, 0, 1], 3) == pytest.approx(1 + 1 / LOG2_3)


def test_idcg_examples():
    assert idcg_at_k([0, 1, 1, 0, 1], 3) == pytest.approx(2 + 1 / LOG2_3)
    assert idcg_at_k([0, 0, 0, 0], 3) == 0.0
    assert idcg_at_k([1, 0], 3) == 1.0


def test_ndcg_examples():
    expected = (1 + 1 / LOG2_3) / (2 + 1 / LOG2_3)
    assert ndcg_at_k([0, 1, 1, 0, 1], 3) == pytest.approx(expected)
    assert expected == pytest.approx(0.61991, abs=1e-5)
    assert ndcg_at_k([1] * 10, 10) == 1.0
    assert ndcg_at_k([0] * 5, 5) == 0.0


def test_precision_examples():
    assert precision_at_k([1, 0, 1, 0], 4) == 0.5
    assert precision_at_k([1, 1, 1], 3) == 1.0
    assert precision_at_k([], 5) == 0.0
    assert precision_at_k([1, 1], 4) == 0.5


def test_metrics_match_brute_force():
    for labels in itertools.product([0, 1], repeat=8):
        labels = list(labels)
        for k in range(1, 9):
            assert abs(rr_at_k(labels, k) - reference_rr(labels, k)) < 1e-12
            dcg = reference_dcg(labels, k)
            idcg = reference_idcg(labels, k)
            assert abs(dcg_at_k(labels, k) - dcg) < 1e-12
            assert abs(idcg_at_k(labels, k) - idcg) < 1e-12
            ndcg = dcg / idcg if idcg else 0.0
            assert abs(ndcg_at_k(labels, k) - ndcg) < 1e-12


def test_ndcg_non_increasing_in_depth(rng):
    k = 10
    for _ in range(1000):
        labels = tuple(int(rng.random() < 0.3) for _ in range(50))
        vector = JudgmentVector('q', 50, labels)
        values = [
            ndcg_at_k(vector.truncate(n), k) for n in range(k, 51)
        ]
        for a, b in zip(values, values[1:]):
            assert b <= a + 1e-12
        hits = [i for i, label in enumerate(labels) if label]
        if len(hits) >= k:
            saturated = hits[k - 1] + 1
            tail = values[max(saturated, k) - k:]
            assert max(tail) - min(tail) < 1e-12


def test_depth_shortfall():
    vector = JudgmentVector('q', 5, (1, 0, 0, 0, 0), list_length=20)
    with pytest.raises(DepthShortfallError):
        ndcg_at_k(vector, 10)
    short = JudgmentVector('q', 10, (1, 0, 0), list_length=3)
    assert rr_at_k(short, 10) == 1.0


def test_metric_range(rng):
    for _ in range(200):
        labels = [int(rng.random() < 0.5) for _ in range(20)]
        for k in (1, 5, 10, 20):
            for func in (rr_at_k, ndcg_at_k, precision_at_k):
                assert 0.0 <= func(labels, k) <= 1.0
            rr = rr_at_k(labels, k)
            assert rr == 0.0 or any(
                abs(rr - 1.0 / i) < 1e-12 for i in range(1, k + 1)
            )


@pytest.mark.parametrize(
    'text, name, kind',
    [
        ('rr@10', 'rr@10', 'rr'),
        ('MRR@10', 'rr@10', 'rr'),
        ('ndcg@3', 'ndcg@3', 'ndcg'),
        ('ndcg_cut@5', 'ndcg@5', 'ndcg'),
        ('p@20', 'p@20', 'precision'),
    ],
)
def test_parse_metric(text, name, kind):
    spec = parse_metric(text)
    assert spec.name == name
    assert spec.kind == kind
    assert spec.depth == spec.cutoff


@pytest.mark.parametrize('text', ['map@10', 'ndcg', 'rr@x', 'rr@0'])
def test_parse_metric_errors(text):
    with pytest.raises(ConfigError):
        parse_metric(text)


def test_depth_below_cutoff():
    with pytest.raises(ConfigError):
        MetricSpec('ndcg', 10, depth=5)


def test_oracle_predictions_equal_actual_rr():
    run = util.synthetic_run(num_queries=100, length=30)
    qrels = util.synthetic_qrels(run)
    judge = oracle_judge(qrels, min_grade=2)
    result = predict_run(run, judge, JudgmentStore(), MetricSpec('rr', 10))
    assert result.ok
    assert len(result) == 100
    for qid, ranked in run.items():
        labels = [
            int(qrels.grade(qid, d) >= 2) for d in ranked.doc_ids[:10]
        ]
        assert result.values()[qid] == reference_rr(labels, 10)


def test_predict_run_empty_run():
    judge = oracle_judge(Qrels())
    result = predict_run({}, judge, JudgmentStore(), MetricSpec('rr', 10))
    assert result.values() == {}


def test_infinite_threshold_predicts_zero():
    run = util.synthetic_run(num_queries=3, length=10)
    table = {
        (qid, d): s for qid, r in run.items() for d, s in r.entries
    }
    judge = threshold_judge(table, float('inf'))
    result = predict_run(run, judge, JudgmentStore(), MetricSpec('ndcg', 5))
    assert set(result.values().values()) == {0.0}


def test_predict_many_judges_once():
    run = util.synthetic_run(num_queries=4, length=300)
    judge = util.CountingJudge()
    specs = [MetricSpec('rr', 10, 200), MetricSpec('ndcg', 10, 200)]
    results = predict_many(run, judge, JudgmentStore(), specs)
    assert sorted(results) == ['ndcg@10', 'rr@10']
    assert len(judge.calls) == 4 * 200
    assert results['rr@10'].meta['depth'] == 200


class PeakJudge(util.CountingJudge):
    """Tracks the largest number of judge calls running at once."""

    def __init__(self, max_in_flight):
        super(PeakJudge, self).__init__(max_in_flight=max_in_flight)
        self.running = 0
        self.peak = 0
        self.peak_lock = threading.Lock()

    def judge(self, query, document):
        with self.peak_lock:
            self.running += 1
            self.peak = max(self.peak, self.running)
        try:
            time.sleep(0.001)
            return super(PeakJudge, self).judge(query, document)
        finally:
            with self.peak_lock:
                self.running -= 1


def test_predict_many_parallel_queries_share_limit():
    run = util.synthetic_run(num_queries=6, length=20)
    specs = [MetricSpec('precision', 10)]
    sequential = predict_many(
        run, util.CountingJudge(), JudgmentStore(), specs
    )
    judge = PeakJudge(max_in_flight=3)
    store = JudgmentStore()
    parallel = predict_many(run, judge, store, specs)
    assert parallel['p@10'].values() == sequential['p@10'].values()
    assert len(judge.calls) == 6 * 10
    assert len(store) == 6 * 10
    assert judge.peak <= 3


def test_predict_many_collects_failures(logger):
    run = {
        'q1': util.ranked('q1', ['d1', 'd2']),
        'q2': util.ranked('q2', ['d3', 'd4']),
    }
    judge = util.CountingJudge(fail_on={'d3'})
    specs = [MetricSpec('precision', 2)]
    results = predict_many(run, judge, JudgmentStore(), specs, logger=logger)
    result = results['p@2']
    assert result.values() == {'q1': 0.5}
    assert 'q2' in result.errors
    assert 'position=1' in result.errors['q2']
    assert not result.ok
    assert result.to_json()['errors'] == result.errors
