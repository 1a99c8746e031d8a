import argparse
import io
import json
import os
import random

from .baselines import BaselineSpec, predict_baseline, predict_direct
from .config import build_config
from .errors import ConfigError, ParseError, QppError, ValidationError
from .evaluation import (
    PairedSeries,
    build_confusion,
    candidate_grid,
    cohen_kappa,
    depth_sweep,
    error_distances,
    evaluate,
    evaluate_values,
    threshold_scan,
    tune_baseline,
    write_sweep_csv,
)
from .judges import JudgingStats, judge_list, make_judge, oracle_judge
from .logger import DefaultLogger, LogLevel, level_from_name
from .metrics import (
    MetricSpec,
    parse_metric,
    predict_many,
    predict_run,
    write_prediction_report,
)
from .prompts import read_demonstrations
from .store import JudgmentStore
from .trec import (
    Collection,
    parse_collection,
    parse_qrels,
    parse_queries,
    parse_run,
    read_judgments,
    read_score_table,
    read_values,
    write_values,
)
from .utils import default, frange

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


def positive_int(string):
    """Parses a value into an int greater than 0."""
    msg = 'Value must be an int greater than 0'
    try:
        value = int(string)
        if value <= 0:
            raise argparse.ArgumentTypeError(msg)
        return value
    except ValueError:
        raise argparse.ArgumentTypeError(msg)


def int_list(string):
    """Parses ``10,50,100`` into a list of ints greater than 0."""
    try:
        return [positive_int(v) for v in string.split(',') if v.strip()]
    except argparse.ArgumentTypeError:
        raise argparse.ArgumentTypeError(
            'Value must be a comma separated list of ints greater than 0'
        )


def float_list(string):
    try:
        return [float(v) for v in string.split(',') if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(
            'Value must be a comma separated list of numbers'
        )


def _add(parser, *flags, dest, **kw):
    parser.add_argument(*flags, dest=dest, default=default, **kw)


def common_options():
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument('--config', dest='config_path')
    parser.add_argument('-v', dest='verbose', action='store_true')
    parser.add_argument('-q', dest='quiet', action='store_true')
    _add(parser, '--log-level', dest='log_level')
    _add(parser, '--seed', dest='seed', type=int)
    _add(parser, '--output-dir', dest='output_dir')
    _add(parser, '--max-length', dest='max_length', type=positive_int)
    _add(parser, '--run', dest='run')
    _add(parser, '--qrels', dest='qrels')
    _add(parser, '--queries', dest='queries')
    _add(parser, '--corpus', dest='corpus')
    _add(
        parser,
        '--collection-format',
        dest='collection_format',
        choices=['tsv', 'jsonl'],
    )
    _add(parser, '--judgments', dest='judgments')
    _add(parser, '--actual', dest='actual')
    _add(parser, '--actual-measure', dest='actual_measure')
    _add(parser, '--predicted', dest='predicted')
    _add(parser, '--score-table', dest='score_table')
    return parser


def judge_options():
    parser = argparse.ArgumentParser(add_help=False)
    _add(
        parser,
        '--judge',
        dest='judge.judge_kind',
        choices=['oracle', 'threshold', 'llm'],
    )
    _add(parser, '--min-grade', dest='judge.oracle_min_grade', type=int)
    _add(parser, '--threshold', dest='judge.threshold', type=float)
    _add(parser, '--endpoint', dest='judge.endpoint_url')
    _add(parser, '--model', dest='judge.model_name')
    _add(parser, '--api', dest='judge.api', choices=['completions', 'chat'])
    _add(
        parser,
        '--max-new-tokens',
        dest='judge.max_new_tokens',
        type=positive_int,
    )
    _add(
        parser, '--max-in-flight', dest='judge.max_in_flight', type=int
    )
    _add(parser, '--timeout', dest='judge.timeout', type=float)
    _add(
        parser,
        '--fallback-label',
        dest='judge.fallback_label',
        type=int,
        choices=[0, 1],
    )
    _add(
        parser,
        '--max-attempts',
        dest='judge.retry.max_attempts',
        type=positive_int,
    )
    _add(parser, '--backoff-base', dest='judge.retry.base', type=float)
    _add(parser, '--backoff-factor', dest='judge.retry.factor', type=float)
    return parser


def make_parser():
    common = common_options()
    judging = judge_options()
    parser = argparse.ArgumentParser(
        prog='qppjudge',
        description=(
            'Predict retrieval quality from generated relevance judgments.'
        ),
    )
    sub = parser.add_subparsers(dest='command', metavar='command')
    sub.required = True

    p = sub.add_parser(
        'judge', parents=[common, judging], help='judge the top of a run'
    )
    _add(p, '--depth', dest='depth', type=positive_int)
    p.set_defaults(handler=cmd_judge)

    p = sub.add_parser(
        'predict', parents=[common, judging], help='predict IR measures'
    )
    p.add_argument('--metric', dest='metrics', action='append')
    _add(p, '--depth', dest='depth', type=positive_int)
    p.set_defaults(handler=cmd_predict)

    p = sub.add_parser(
        'baseline', parents=[common], help='score-based predictors'
    )
    _add(
        p,
        '--method',
        dest='method',
        choices=['wig', 'nqc', 'sigma_max', 'n_sigma_x', 'smv'],
    )
    _add(p, '--k', dest='k', type=positive_int)
    _add(p, '--x', dest='x', type=float)
    _add(
        p,
        '--corpus-score-mode',
        dest='corpus_score_mode',
        choices=['provided', 'mean_of_list'],
    )
    _add(p, '--corpus-scores', dest='corpus_scores')
    _add(
        p,
        '--normalizer',
        dest='normalizer',
        choices=['count', 'query_length', 'none'],
    )
    p.set_defaults(handler=cmd_baseline)

    p = sub.add_parser(
        'evaluate', parents=[common], help='correlate predicted and actual'
    )
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser(
        'sweep', parents=[common, judging], help='judging depth sweep'
    )
    p.add_argument('--metric', dest='metrics', action='append')
    _add(p, '--depths', dest='depths', type=int_list)
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser(
        'agreement', parents=[common], help='judge agreement with qrels'
    )
    _add(p, '--min-grade', dest='judge.oracle_min_grade', type=int)
    _add(p, '--judge-id', dest='judge_id')
    p.set_defaults(handler=cmd_agreement)

    p = sub.add_parser(
        'threshold-scan',
        parents=[common],
        help='correlation of the threshold judge over a range of thetas',
    )
    p.add_argument('--metric', dest='metrics', action='append')
    _add(p, '--depth', dest='depth', type=positive_int)
    _add(p, '--min-grade', dest='judge.oracle_min_grade', type=int)
    _add(p, '--theta-min', dest='theta_min', type=float)
    _add(p, '--theta-max', dest='theta_max', type=float)
    _add(p, '--theta-step', dest='theta_step', type=float)
    p.set_defaults(handler=cmd_threshold_scan)

    p = sub.add_parser(
        'tune', parents=[common], help='select baseline hyper-parameters'
    )
    _add(
        p,
        '--method',
        dest='method',
        choices=['wig', 'nqc', 'sigma_max', 'n_sigma_x', 'smv'],
    )
    _add(p, '--ks', dest='ks', type=int_list)
    _add(p, '--xs', dest='xs', type=float_list)
    _add(
        p,
        '--corpus-score-mode',
        dest='corpus_score_mode',
        choices=['provided', 'mean_of_list'],
    )
    _add(p, '--corpus-scores', dest='corpus_scores')
    _add(
        p,
        '--normalizer',
        dest='normalizer',
        choices=['count', 'query_length', 'none'],
    )
    _add(p, '--eval-run', dest='eval_run')
    _add(p, '--eval-actual', dest='eval_actual')
    p.set_defaults(handler=cmd_tune)

    p = sub.add_parser(
        'qpp-llm',
        parents=[common, judging],
        help='ask the model directly for a list quality score',
    )
    _add(p, '--k', dest='k', type=positive_int)
    _add(p, '--demonstrations', dest='demonstrations')
    _add(
        p,
        '--num-demonstrations',
        dest='num_demonstrations',
        type=positive_int,
    )
    p.set_defaults(handler=cmd_qpp_llm)

    return parser


def _open(path):
    return io.open(path, 'rb')


def load_run(config, logger, path=None):
    path = path or config.run
    with _open(path) as fp:
        return parse_run(
            fp, max_length=config.max_length, logger=logger, source=path
        )


def load_qrels(config):
    with _open(config.qrels) as fp:
        return parse_qrels(fp, source=config.qrels)


def load_collection(config):
    queries = documents = None
    if config.queries is not None:
        with _open(config.queries) as fp:
            queries = parse_queries(
                fp, config.collection_format, source=config.queries
            )
    if config.corpus is not None:
        with _open(config.corpus) as fp:
            documents = parse_collection(
                fp, config.collection_format, source=config.corpus
            )
    return Collection(queries, documents)


def load_values(path, measure=None):
    with _open(path) as fp:
        return read_values(fp, measure=measure, source=path)


def load_judge(config, logger):
    """Read every input the configured judge needs, then build it."""
    kind = config.judge.judge_kind
    qrels = score_table = None
    collection = Collection()
    if kind == 'oracle':
        config.require('qrels')
        qrels = load_qrels(config)
    elif kind == 'threshold':
        config.require('score_table')
        with _open(config.score_table) as fp:
            score_table = read_score_table(fp, source=config.score_table)
    else:
        config.require('queries', 'corpus')
        collection = load_collection(config)
    judge = make_judge(
        config.judge, qrels=qrels, score_table=score_table, logger=logger
    )
    return judge, collection


def metric_specs(config):
    if not config.metrics:
        raise ConfigError('at least one --metric is required')
    specs = []
    for text in config.metrics:
        spec = parse_metric(text)
        specs.append(MetricSpec(spec.kind, spec.cutoff, config.depth))
    return specs


def output_path(config, name):
    os.makedirs(config.output_dir, exist_ok=True)
    return os.path.join(config.output_dir, name)


def write_result(config, result, logger):
    tsv = output_path(config, result.name + '.tsv')
    with io.open(tsv, 'w', encoding='utf-8') as fp:
        write_values(result.values(), fp)
    report = output_path(config, result.name + '.json')
    with io.open(report, 'w', encoding='utf-8') as fp:
        write_prediction_report(result, fp)
    logger.info(
        'wrote {} predictions to {} ({} failed)'.format(
            len(result), tsv, len(result.errors)
        )
    )


def write_json(config, name, data):
    path = output_path(config, name)
    with io.open(path, 'w', encoding='utf-8') as fp:
        json.dump(data, fp, indent=2, sort_keys=True)
        fp.write('\n')
    return path


def _close(obj):
    close = getattr(obj, 'close', None)
    if close is not None:
        close()


def cmd_judge(config, logger):
    config.require('run')
    if config.judgments is None:
        raise ConfigError('--judgments is required to store the judgments')
    depth = config.depth or max(s.cutoff for s in metric_specs(config))
    run = load_run(config, logger)
    judge, collection = load_judge(config, logger)
    stats = JudgingStats()
    failed = {}
    with JudgmentStore(config.judgments) as store:
        try:
            for qid in sorted(run):
                try:
                    judge_list(
                        run[qid],
                        depth,
                        judge,
                        store,
                        collection=collection,
                        stats=stats,
                        logger=logger,
                    )
                except QppError as ex:
                    logger.error(str(ex))
                    failed[qid] = str(ex)
        finally:
            _close(judge)
    logger.info(
        'judged {} lists to depth {}: cache hits={} new={} fallbacks={} '
        'errors={}'.format(
            len(run),
            depth,
            stats.hits,
            stats.misses,
            stats.fallbacks,
            stats.errors,
        )
    )
    return EXIT_RUNTIME if failed else EXIT_OK


def cmd_predict(config, logger):
    config.require('run')
    specs = metric_specs(config)
    run = load_run(config, logger)
    judge, collection = load_judge(config, logger)
    stats = JudgingStats()
    with JudgmentStore(config.judgments) as store:
        try:
            results = predict_many(
                run,
                judge,
                store,
                specs,
                collection=collection,
                stats=stats,
                logger=logger,
            )
        finally:
            _close(judge)
    for result in results.values():
        result.meta['seed'] = config.seed
        write_result(config, result, logger)
    logger.info(
        'judging: cache hits={} new={} fallbacks={}'.format(
            stats.hits, stats.misses, stats.fallbacks
        )
    )
    if any(result.errors for result in results.values()):
        return EXIT_RUNTIME
    return EXIT_OK


def _load_queries(config):
    if config.queries is None:
        return None
    with _open(config.queries) as fp:
        return parse_queries(
            fp, config.collection_format, source=config.queries
        )


def _baseline_kw(config):
    return dict(
        corpus_score_mode=config.corpus_score_mode,
        normalizer=config.normalizer,
    )


def cmd_baseline(config, logger):
    config.require('run')
    spec = BaselineSpec(
        config.method, config.k, config.x, **_baseline_kw(config)
    )
    run = load_run(config, logger)
    corpus_scores = None
    if config.corpus_scores is not None:
        corpus_scores = load_values(config.corpus_scores)
    result = predict_baseline(
        run,
        spec,
        queries=_load_queries(config),
        corpus_scores=corpus_scores,
        logger=logger,
    )
    result.meta['seed'] = config.seed
    write_result(config, result, logger)
    return EXIT_RUNTIME if result.errors else EXIT_OK


def cmd_evaluate(config, logger):
    config.require('predicted', 'actual')
    predicted = load_values(config.predicted)
    actual = load_values(config.actual, config.actual_measure)
    series = PairedSeries.align(predicted, actual, logger=logger)
    report = evaluate(series)
    data = report.to_json()
    data['dropped'] = len(set(predicted) | set(actual)) - len(series)
    print(json.dumps(data, indent=2, sort_keys=True))
    write_json(config, 'evaluation.json', data)
    return EXIT_OK


def cmd_sweep(config, logger):
    config.require('run', 'actual')
    spec = metric_specs(config)[0]
    run = load_run(config, logger)
    actual = load_values(config.actual, config.actual_measure)
    judge, collection = load_judge(config, logger)
    stats = JudgingStats()
    with JudgmentStore(config.judgments) as store:
        try:
            rows = depth_sweep(
                run,
                judge,
                store,
                spec.kind,
                spec.cutoff,
                sorted(config.depths),
                actual,
                collection=collection,
                stats=stats,
                logger=logger,
            )
        finally:
            _close(judge)
    path = output_path(config, 'sweep.{}.csv'.format(spec.name))
    with io.open(path, 'w', encoding='utf-8') as fp:
        write_sweep_csv(rows, fp, key='depth')
    logger.info(
        'wrote {} rows to {} (judge invocations={})'.format(
            len(rows), path, stats.misses
        )
    )
    if all(row.report is None for row in rows):
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_agreement(config, logger):
    config.require('judgments', 'qrels')
    with _open(config.judgments) as fp:
        records = read_judgments(fp, source=config.judgments)
    judge_ids = sorted({r.judge_id for r in records})
    if config.judge_id is not None:
        records = [r for r in records if r.judge_id == config.judge_id]
    elif len(judge_ids) > 1:
        raise ConfigError(
            'the store holds several judges ({}); pick one with '
            '--judge-id'.format(', '.join(judge_ids))
        )
    qrels = load_qrels(config)
    min_grade = config.judge.oracle_min_grade
    matrix = build_confusion(records, qrels, min_grade)
    data = {
        'confusion': matrix.to_json(),
        'kappa': cohen_kappa(matrix),
        'min_grade': min_grade,
    }
    if config.predicted is not None and config.actual is not None:
        deltas, summary = error_distances(
            load_values(config.predicted),
            load_values(config.actual, config.actual_measure),
        )
        with io.open(
            output_path(config, 'error_distances.tsv'), 'w', encoding='utf-8'
        ) as fp:
            write_values(deltas, fp)
        data['error_distances'] = summary
    print(json.dumps(data, indent=2, sort_keys=True))
    write_json(config, 'agreement.json', data)
    return EXIT_OK


def cmd_threshold_scan(config, logger):
    config.require('score_table')
    if config.theta_min is None or config.theta_max is None:
        raise ConfigError('--theta-min and --theta-max are required')
    if config.theta_step is None or config.theta_step <= 0:
        raise ConfigError('--theta-step must be greater than 0')
    if config.theta_max < config.theta_min:
        raise ConfigError('--theta-max must not be below --theta-min')
    spec = metric_specs(config)[0]
    with _open(config.score_table) as fp:
        score_table = read_score_table(fp, source=config.score_table)
    run = load_run(config, logger, path=config.run or config.score_table)

    if config.actual is not None:
        actual = load_values(config.actual, config.actual_measure)
    else:
        config.require('qrels')
        oracle = oracle_judge(
            load_qrels(config), config.judge.oracle_min_grade
        )
        actual = predict_run(run, oracle, JudgmentStore(), spec).values()

    thetas = frange(config.theta_min, config.theta_max, config.theta_step)
    rows = threshold_scan(
        run, score_table, actual, spec, list(thetas), logger=logger
    )
    path = output_path(config, 'threshold_scan.{}.csv'.format(spec.name))
    with io.open(path, 'w', encoding='utf-8') as fp:
        write_sweep_csv(rows, fp, key='threshold')
    logger.info('wrote {} rows to {}'.format(len(rows), path))
    return EXIT_OK


def cmd_tune(config, logger):
    config.require('run', 'actual')
    candidates = candidate_grid(
        config.method, config.ks, config.xs, **_baseline_kw(config)
    )
    queries = _load_queries(config)
    corpus_scores = None
    if config.corpus_scores is not None:
        corpus_scores = load_values(config.corpus_scores)
    tuned = tune_baseline(
        load_run(config, logger),
        load_values(config.actual, config.actual_measure),
        candidates,
        queries=queries,
        corpus_scores=corpus_scores,
        logger=logger,
    )
    chosen = tuned.spec
    data = {
        'method': chosen.method,
        'k': chosen.k,
        'x': chosen.x,
        'tuning': tuned.report.to_json(),
        'candidates': dict(tuned.scores),
    }
    if config.eval_run is not None:
        config.require('eval_run', 'eval_actual')
        result = predict_baseline(
            load_run(config, logger, path=config.eval_run),
            chosen,
            queries=queries,
            corpus_scores=corpus_scores,
        )
        data['evaluation'] = evaluate_values(
            result.values(),
            load_values(config.eval_actual, config.actual_measure),
            logger=logger,
        ).to_json()
    print(json.dumps(data, indent=2, sort_keys=True))
    write_json(config, 'tune.{}.json'.format(chosen.method), data)
    return EXIT_OK


def cmd_qpp_llm(config, logger):
    config.require('run', 'queries', 'corpus')
    config.judge.judge_kind = 'llm'
    config.judge.validate()
    run = load_run(config, logger)
    collection = load_collection(config)
    demonstrations = []
    if config.demonstrations is not None:
        with _open(config.demonstrations) as fp:
            demonstrations = read_demonstrations(
                fp, source=config.demonstrations
            )
    wanted = config.num_demonstrations
    if wanted is not None and wanted < len(demonstrations):
        demonstrations = random.Random(config.seed).sample(
            demonstrations, wanted
        )
    result = predict_direct(
        run,
        config.judge,
        collection,
        k=config.k,
        demonstrations=demonstrations,
        logger=logger,
    )
    result.meta['seed'] = config.seed
    write_result(config, result, logger)
    return EXIT_RUNTIME if result.errors else EXIT_OK


def _log_level(args, config):
    if args.quiet:
        return LogLevel.ERROR
    if args.verbose:
        return LogLevel.DEBUG
    return level_from_name(config.log_level)


def main(argv=None, logger=None):
    parser = make_parser()
    args = parser.parse_args(argv)
    overrides = {
        k: v
        for k, v in vars(args).items()
        if k not in ('config_path', 'verbose', 'quiet', 'handler', 'command')
    }
    # --metric appends, so it is None rather than the sentinel when unset
    if overrides.get('metrics') is None:
        overrides.pop('metrics', None)

    if logger is None:
        logger = DefaultLogger(LogLevel.INFO)
    try:
        config = build_config(overrides, args.config_path)
        if isinstance(logger, DefaultLogger):
            logger.level = _log_level(args, config)
        return args.handler(config, logger)
    except (ConfigError, ParseError, ValidationError, OSError) as ex:
        logger.error(str(ex))
        return EXIT_CONFIG
    except QppError as ex:
        logger.error(str(ex))
        return EXIT_RUNTIME
