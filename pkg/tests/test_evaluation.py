import io
import itertools
import math

import pytest

from qppjudge.baselines import BaselineSpec
from qppjudge.errors import (
    ConfigError,
    EmptyIntersectionError,
    UndefinedCorrelationError,
    ValidationError,
)
from qppjudge.evaluation import (
    ConfusionMatrix2x2,
    PairedSeries,
    SweepRow,
    build_confusion,
    candidate_grid,
    cohen_kappa,
    depth_sweep,
    error_distances,
    evaluate,
    evaluate_values,
    kendall_tau_b,
    pearson,
    pearson_significance,
    smare,
    spearman,
    threshold_scan,
    tune_baseline,
    write_sweep_csv,
)
from qppjudge.judges import oracle_judge
from qppjudge.metrics import MetricSpec, predict_run
from qppjudge.store import JudgmentStore
from qppjudge.trec import JudgmentRecord, Qrels

from . import util


def series(x, y):
    return PairedSeries.from_values(
        {'q{:03d}'.format(i): v for i, v in enumerate(x)},
        {'q{:03d}'.format(i): v for i, v in enumerate(y)},
    )


def kendall_oracle(x, y):
    concordant = discordant = ties_x = ties_y = 0
    n = len(x)
    for i in range(n):
        for j in range(i + 1, n):
            dx = x[i] - x[j]
            dy = y[i] - y[j]
            if dx == 0 and dy == 0:
                continue
            if dx == 0:
                ties_x += 1
            elif dy == 0:
                ties_y += 1
            elif dx * dy > 0:
                concordant += 1
            else:
                discordant += 1
    return (concordant - discordant) / math.sqrt(
        (concordant + discordant + ties_x)
        * (concordant + discordant + ties_y)
    )


def test_pearson_examples():
    assert pearson(series([1, 2, 3], [2, 4, 6])) == pytest.approx(1.0)
    assert pearson(series([1, 2, 3], [-1, -2, -3])) == pytest.approx(-1.0)
    assert pearson(series([1, 2, 3], [1, 3, 2])) == pytest.approx(0.5)


def test_rank_correlation_examples():
    s = series([1, 2, 3, 4], [1, 3, 2, 4])
    assert kendall_tau_b(s) == pytest.approx(4 / 6)
    assert spearman(s) == pytest.approx(0.8)
    reversed_ = series([1, 2, 3, 4], [4, 3, 2, 1])
    assert kendall_tau_b(reversed_) == pytest.approx(-1.0)
    assert spearman(reversed_) == pytest.approx(-1.0)


def test_smare_examples():
    assert smare(series([1, 2, 3], [1, 2, 3])) == 0.0
    assert smare(series([2, 1, 3], [1, 2, 3])) == pytest.approx(2 / 9)
    assert smare(series([1, 2], [2, 1])) == pytest.approx(0.5)


def test_kendall_matches_pair_counting(rng):
    checked = 0
    while checked < 1000:
        n = rng.randint(2, 50)
        x = [rng.randint(0, 5) for _ in range(n)]
        y = [rng.randint(0, 5) for _ in range(n)]
        if len(set(x)) < 2 or len(set(y)) < 2:
            continue
        expected = kendall_oracle(x, y)
        assert abs(kendall_tau_b(series(x, y)) - expected) < 1e-12
        checked += 1



def random_pair(rng):
    n = rng.randint(3, 40)
    x = [rng.uniform(-5.0, 5.0) for _ in range(n)]
    y = [rng.uniform(-5.0, 5.0) for _ in range(n)]
    return x, y


def test_correlations_are_symmetric(rng):
    for _ in range(200):
        x, y = random_pair(rng)
        for func in (pearson, kendall_tau_b, spearman):
            assert func(series(x, y)) == pytest.approx(func(series(y, x)))


def test_transform_invariance(rng):
    for _ in range(200):
        x, y = random_pair(rng)
        a = rng.uniform(0.1, 10.0)
        b = rng.uniform(-10.0, 10.0)
        cubed = [v ** 3 for v in x]
        exp_y = [math.exp(v) for v in y]
        base = series(x, y)
        monotone = series(cubed, exp_y)
        for func in (kendall_tau_b, spearman):
            assert func(monotone) == pytest.approx(func(base))
        affine = series([a * v + b for v in x], y)
        assert pearson(affine) == pytest.approx(pearson(base))


def test_smare_bounds_over_all_permutations():
    for n in range(2, 7):
        actual = list(range(1, n + 1))
        upper = (n * n - 1) / (n * n)
        values = []
        for perm in itertools.permutations(actual):
            value = smare(series(list(perm), actual))
            assert 0.0 <= value <= upper
            values.append(value)
        assert smare(series(actual, actual)) == 0.0
        assert min(values) == 0.0
        assert max(values) == pytest.approx((n * n // 2) / (n * n))

def test_constant_side_is_undefined():
    s = series([1, 1, 1], [1, 2, 3])
    for func in (pearson, kendall_tau_b, spearman):
        with pytest.raises(UndefinedCorrelationError) as exc:
            func(s)
        assert 'constant' in str(exc.value)


def test_paired_series_validation():
    with pytest.raises(UndefinedCorrelationError):
        series([1], [1])
    with pytest.raises(ValidationError):
        series([1, float('nan')], [1, 2])
    with pytest.raises(ValidationError):
        PairedSeries(('a', 'b'), (1.0,), (1.0, 2.0))


def test_align_drops_unshared_queries(logger):
    s = PairedSeries.align(
        {'a': 1, 'b': 2, 'c': 3}, {'b': 5, 'c': 6, 'd': 7}, logger=logger
    )
    assert s.query_ids == ('b', 'c')
    assert 'dropped 1 predicted-only and 1 actual-only' in logger.get_output()
    with pytest.raises(EmptyIntersectionError):
        PairedSeries.align({'a': 1}, {'b': 1})


def test_pearson_significance():
    assert pearson_significance(0.0, 10) == pytest.approx(1.0)
    assert pearson_significance(1.0, 10) == 0.0
    assert pearson_significance(0.999999, 50) < 1e-10
    assert pearson_significance(0.5, 30) == pytest.approx(0.0049, abs=1e-4)
    with pytest.raises(ValidationError):
        pearson_significance(0.5, 2)


def test_evaluate_identical():
    values = {'q{}'.format(i): i / 10 for i in range(10)}
    report = evaluate_values(values, dict(values))
    assert report.pearson == pytest.approx(1.0)
    assert report.kendall_tau_b == pytest.approx(1.0)
    assert report.spearman == pytest.approx(1.0)
    assert report.smare == 0.0
    assert report.n_queries == 10
    assert sorted(report.to_json()) == [
        'kendall_tau_b',
        'n_queries',
        'pearson',
        'pearson_p_value',
        'smare',
        'spearman',
    ]


def test_evaluate_two_queries_has_no_p_value():
    report = evaluate(series([1, 2], [3, 4]))
    assert report.pearson_p_value == 1.0


def test_build_confusion():
    qrels = Qrels({('q', 'a'): 3, ('q', 'b'): 0, ('q', 'c'): 2})
    judgments = [
        JudgmentRecord('q', 'a', 1, 'llm'),
        JudgmentRecord('q', 'b', 1, 'llm'),
        JudgmentRecord('q', 'c', 0, 'llm'),
        JudgmentRecord('q', 'x', 1, 'llm'),
    ]
    m = build_confusion(judgments, qrels, min_grade=2)
    assert (m.tp, m.fp, m.fn, m.tn, m.excluded) == (1, 1, 1, 0, 1)
    assert m.precision == 0.5
    assert m.recall == 0.5
    assert m.accuracy == pytest.approx(1 / 3)
    assert m.f1 == 0.5


def test_build_confusion_disjoint():
    with pytest.raises(EmptyIntersectionError):
        build_confusion(
            [JudgmentRecord('q', 'x', 1, 'llm')], Qrels({('q', 'a'): 1})
        )


@pytest.mark.parametrize(
    'counts, kappa',
    [
        ((752, 553, 1749, 6206), 0.258),
        ((486, 763, 1180, 8957), 0.238),
    ],
)
def test_cohen_kappa_published_counts(counts, kappa):
    m = ConfusionMatrix2x2(*counts)
    assert cohen_kappa(m) == pytest.approx(kappa, abs=0.0005)


def test_cohen_kappa_edges():
    assert cohen_kappa(ConfusionMatrix2x2(tp=5, tn=7)) == 1.0
    with pytest.raises(UndefinedCorrelationError):
        cohen_kappa(ConfusionMatrix2x2(tp=5))
    with pytest.raises(ValidationError):
        cohen_kappa(ConfusionMatrix2x2())
    with pytest.raises(ValidationError):
        ConfusionMatrix2x2(tp=-1)



def test_cohen_kappa_zero_for_independent_marginals(rng):
    for _ in range(200):
        yes_p, no_p = rng.randint(1, 30), rng.randint(1, 30)
        yes_a, no_a = rng.randint(1, 30), rng.randint(1, 30)
        m = ConfusionMatrix2x2(
            tp=yes_p * yes_a,
            fp=yes_p * no_a,
            fn=no_p * yes_a,
            tn=no_p * no_a,
        )
        assert cohen_kappa(m) == pytest.approx(0.0, abs=1e-12)
        assert cohen_kappa(m) <= 1.0

def test_error_distances():
    deltas, summary = error_distances(
        {'a': 0.5, 'b': 0.2, 'c': 0.4}, {'a': 0.25, 'b': 0.2, 'd': 0.0}
    )
    assert deltas == {'a': 0.25, 'b': 0.0}
    assert summary['n'] == 2
    assert summary['overestimated'] == 1
    assert summary['exact'] == 1
    assert summary['mean_absolute'] == pytest.approx(0.125)
    with pytest.raises(EmptyIntersectionError):
        error_distances({'a': 1}, {'b': 1})


def test_depth_sweep_reuses_judgments():
    run = util.synthetic_run(num_queries=10, length=120)
    actual = {qid: i / 10 for i, qid in enumerate(sorted(run))}
    judge = util.CountingJudge()
    rows = depth_sweep(
        run, judge, JudgmentStore(), 'ndcg', 10, [10, 50, 100], actual
    )
    assert [row.key for row in rows] == [10, 50, 100]
    assert len(judge.calls) == 1000


def test_depth_sweep_oracle_is_exact_at_full_depth():
    run = util.synthetic_run(num_queries=20, length=40)
    qrels = util.synthetic_qrels(run)
    judge = oracle_judge(qrels)
    actual = predict_run(
        run, judge, JudgmentStore(), MetricSpec('ndcg', 10, 40)
    ).values()
    rows = depth_sweep(
        run, judge, JudgmentStore(), 'ndcg', 10, [10, 40], actual
    )
    assert rows[-1].report.pearson == pytest.approx(1.0)
    assert rows[-1].report.smare == 0.0


def test_depth_sweep_identical_depths_give_identical_rows():
    run = util.synthetic_run(num_queries=20, length=20)
    judge = oracle_judge(util.synthetic_qrels(run))
    actual = {qid: i for i, qid in enumerate(sorted(run))}
    rows = depth_sweep(
        run, judge, JudgmentStore(), 'ndcg', 5, [10, 10], actual
    )
    assert rows[0].report is not None
    assert rows[0].report == rows[1].report


def test_depth_sweep_surfaces_undefined_rows():
    run = util.synthetic_run(num_queries=5, length=20)
    judge = oracle_judge(Qrels())
    actual = {qid: i for i, qid in enumerate(sorted(run))}
    rows = depth_sweep(run, judge, JudgmentStore(), 'ndcg', 5, [5], actual)
    assert rows[0].report is None
    assert 'constant' in rows[0].error


@pytest.mark.parametrize('depths', [[], [50, 10], [5, 10]])
def test_depth_sweep_validation(depths):
    with pytest.raises(ConfigError):
        depth_sweep(
            {}, util.CountingJudge(), JudgmentStore(), 'ndcg', 10, depths, {}
        )


def test_threshold_scan():
    run = util.synthetic_run(num_queries=6, length=10)
    table = {(q, d): s for q, r in run.items() for d, s in r.entries}
    actual = {qid: i for i, qid in enumerate(sorted(run))}
    spec = MetricSpec('ndcg', 5)
    rows = threshold_scan(run, table, actual, spec, [0.0])
    assert len(rows) == 1
    assert rows[0].report is None
    assert 'constant' in rows[0].error
    rows = threshold_scan(run, table, actual, spec, [10.0, 20.0])
    assert [row.key for row in rows] == [10.0, 20.0]


def test_write_sweep_csv():
    report = evaluate(series([1, 2, 3], [1, 3, 2]))
    out = io.StringIO()
    write_sweep_csv(
        [SweepRow(10, report), SweepRow(20, error='undefined')], out
    )
    lines = out.getvalue().splitlines()
    assert lines[0] == 'depth,pearson,kendall,spearman,smare,p_value,n,error'
    fields = lines[1].split(',')
    assert fields[0] == '10'
    assert float(fields[1]) == pytest.approx(0.5)
    assert fields[-2:] == ['3', '']
    assert lines[2] == '20,,,,,,,undefined'


def test_candidate_grid():
    assert [s.k for s in candidate_grid('nqc', ks=[5, 10])] == [5, 10]
    assert [s.x for s in candidate_grid('n_sigma_x', xs=[0.3])] == [0.3]
    assert len(candidate_grid('sigma_max', ks=[1, 2], xs=[0.5])) == 1


def test_tune_baseline_single_candidate():
    run = util.synthetic_run(num_queries=10, length=30)
    actual = {qid: i for i, qid in enumerate(sorted(run))}
    spec = BaselineSpec('nqc', k=10)
    tuned = tune_baseline(run, actual, [spec])
    assert tuned.spec is spec


def test_tune_baseline_skips_undefined_candidates(logger):
    run = util.synthetic_run(num_queries=10, length=30)
    actual = {qid: i for i, qid in enumerate(sorted(run))}
    candidates = candidate_grid('nqc', ks=[1, 10])
    tuned = tune_baseline(run, actual, candidates, logger=logger)
    assert tuned.spec.k == 10
    assert 'nqc@1' in logger.get_output('warn')
    again = tune_baseline(run, actual, candidates)
    assert again.spec == tuned.spec


def test_tune_baseline_nothing_defined():
    run = util.synthetic_run(num_queries=4, length=5)
    actual = {qid: 1.0 for qid in run}
    with pytest.raises(UndefinedCorrelationError):
        tune_baseline(run, actual, candidate_grid('nqc', ks=[5]))


def test_tune_baseline_ties_prefer_smaller_k():
    run = util.synthetic_run(num_queries=8, length=30)
    actual = {qid: i for i, qid in enumerate(sorted(run))}
    # both depths exceed the list length, so the predictions coincide
    tuned = tune_baseline(run, actual, candidate_grid('nqc', ks=[50, 40]))
    assert tuned.spec.k == 40
    scores = dict(tuned.scores)
    assert scores['nqc@50'] == scores['nqc@40']


def test_tune_baseline_ties_prefer_smaller_x():
    run = {
        'q{}'.format(i): util.ranked(
            'q{}'.format(i),
            ['a', 'b', 'c', 'd', 'e'],
            [10.0 + i, 9.0, 8.0, 1.0, 0.5],
        )
        for i in range(6)
    }
    actual = {qid: float(i) for i, qid in enumerate(sorted(run))}
    candidates = candidate_grid('n_sigma_x', xs=[0.5, 0.4])
    tuned = tune_baseline(run, actual, candidates)
    assert tuned.spec.x == 0.4
