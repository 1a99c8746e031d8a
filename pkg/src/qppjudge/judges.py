"""
Binary relevance judges and the machinery that applies them to the top of a
ranked list.

Three judges ship with the package:

- :class:`OracleJudge` binarizes human qrels (``grade >= min_grade``).
- :class:`ThresholdJudge` binarizes real-valued scores (``score >= theta``).
- :class:`LLMJudge` asks a completion endpoint with the point-wise
  relevance prompt and parses ``Relevant`` / ``Irrelevant``.

"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import math
import re
import string
import threading

from .client import HttpCompletionClient, RetryPolicy
from .errors import (
    ConfigError,
    JudgeError,
    MissingScoreError,
    QppError,
    UnparseableOutputError,
    UnresolvableItemError,
)
from .interfaces import IJudge
from .logger import SilentLogger
from .prompts import build_list_score_prompt, build_relevance_prompt
from .trec import Collection, Document, JudgmentRecord, Query
from .utils import find_custom_judge_factory, get_api_key

JUDGE_KINDS = ('oracle', 'threshold', 'llm')


@dataclass
class JudgeConfig:
    judge_kind: str = 'oracle'
    oracle_min_grade: int = 2
    threshold: float = None
    endpoint_url: str = None
    model_name: str = None
    api: str = 'completions'
    max_new_tokens: int = 8
    max_in_flight: int = 8
    timeout: float = 30.0
    fallback_label: int = 0
    retry: RetryPolicy = field(default_factory=RetryPolicy)

    def validate(self):
        if self.judge_kind not in JUDGE_KINDS:
            raise ConfigError(
                'unknown judge kind {!r}'.format(self.judge_kind)
            )
        if self.max_in_flight < 1:
            raise ConfigError('max_in_flight must be >= 1')
        if self.fallback_label not in (0, 1):
            raise ConfigError('fallback_label must be 0 or 1')
        if self.judge_kind == 'threshold' and self.threshold is None:
            raise ConfigError('the threshold judge requires a threshold')
        if self.judge_kind == 'llm':
            if not self.endpoint_url:
                raise ConfigError('the llm judge requires an endpoint url')
            if not self.model_name:
                raise ConfigError('the llm judge requires a model name')
            if self.max_new_tokens < 1:
                raise ConfigError('max_new_tokens must be >= 1')
        self.retry.validate()
        return self


def make_client(config, logger=None):
    """Build the HTTP completion client described by ``config``."""
    return HttpCompletionClient(
        config.endpoint_url,
        config.model_name,
        api=config.api,
        max_tokens=config.max_new_tokens,
        retry=config.retry,
        api_key=get_api_key(),
        timeout=config.timeout,
        logger=logger,
    )


_LEADING_JUNK = string.whitespace + string.punctuation


def parse_relevance_output(completion):
    """
    Map a model completion onto ``1`` (relevant) or ``0`` (irrelevant).

    The text is lower-cased and leading whitespace/punctuation removed.
    ``irrelevant`` is tested first since ``relevant`` is a suffix of it.

    """
    text = (completion or '').strip().lower().lstrip(_LEADING_JUNK)
    if text.startswith('irrelevant'):
        return 0
    if text.startswith('relevant'):
        return 1
    raise UnparseableOutputError(
        'cannot parse relevance from {!r}'.format(completion),
        raw_output=completion,
    )


class OracleJudge(IJudge):
    """Label ``1`` iff the qrels grade of the pair is ``>= min_grade``."""

    source = 'oracle'
    needs_text = False
    max_in_flight = 1

    def __init__(self, qrels, min_grade=2):
        self.qrels = qrels
        self.min_grade = min_grade
        self.identity = 'oracle@{}'.format(min_grade)

    def __call__(self, query_id, doc_id):
        grade = self.qrels.get((query_id, doc_id))
        return int(grade is not None and grade >= self.min_grade)

    def judge(self, query, document):
        return JudgmentRecord(
            query.id,
            document.id,
            self(query.id, document.id),
            self.source,
            judge_id=self.identity,
        )


class ThresholdJudge(IJudge):
    """Label ``1`` iff the tabled score of the pair is ``>= threshold``."""

    source = 'threshold'
    needs_text = False
    max_in_flight = 1

    def __init__(self, score_table, threshold):
        self.score_table = score_table
        self.threshold = float(threshold)
        self.identity = 'threshold@{!r}'.format(self.threshold)

    def __call__(self, query_id, doc_id):
        try:
            score = self.score_table[(query_id, doc_id)]
        except KeyError:
            raise MissingScoreError(
                'no score for pair', query_id=query_id, doc_id=doc_id
            )
        return int(score >= self.threshold)

    def judge(self, query, document):
        return JudgmentRecord(
            query.id,
            document.id,
            self(query.id, document.id),
            self.source,
            raw_output=repr(self.score_table.get((query.id, document.id))),
            judge_id=self.identity,
        )


class LLMJudge(IJudge):
    """
    Judge relevance by prompting a completion endpoint.

    Unparseable completions are re-requested up to
    ``config.retry.max_attempts`` times; after that the item receives
    ``config.fallback_label`` and the record is flagged with
    ``fallback=True``. Transport and authentication failures are raised as
    :class:`qppjudge.errors.JudgeError` subclasses annotated with the
    query and document ids.

    """

    source = 'llm'
    needs_text = True

    def __init__(self, config, client=None, logger=None):
        self.config = config
        self.logger = logger or SilentLogger()
        if client is None:
            client = make_client(config, self.logger)
        self.client = client
        self.max_in_flight = config.max_in_flight
        self.identity = 'llm:{}'.format(config.model_name)

    def judge(self, query, document):
        prompt = build_relevance_prompt(query, document)
        raw = None
        for attempt in range(1, self.config.retry.max_attempts + 1):
            try:
                raw = self.client.complete(prompt)
            except JudgeError as ex:
                ex.query_id, ex.doc_id = query.id, document.id
                raise
            try:
                label = parse_relevance_output(raw)
            except UnparseableOutputError:
                self.logger.warn(
                    'unparseable completion {!r} for qid={} docid={} '
                    '(attempt {})'.format(raw, query.id, document.id, attempt)
                )
                continue
            return JudgmentRecord(
                query.id,
                document.id,
                label,
                self.source,
                raw_output=raw,
                judge_id=self.identity,
            )

        self.logger.warn(
            'falling back to label {} for qid={} docid={}'.format(
                self.config.fallback_label, query.id, document.id
            )
        )
        return JudgmentRecord(
            query.id,
            document.id,
            self.config.fallback_label,
            self.source,
            raw_output=raw,
            judge_id=self.identity,
            fallback=True,
        )

    __call__ = judge

    def close(self):
        self.client.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()


class ThrottledJudge(IJudge):
    """
    Share one ``max_in_flight`` budget between several ranked lists that
    are judged at the same time.
    """

    def __init__(self, judge):
        self.wrapped = judge
        self.source = judge.source
        self.identity = judge.identity
        self.needs_text = judge.needs_text
        self.max_in_flight = judge.max_in_flight
        self.slots = threading.BoundedSemaphore(judge.max_in_flight)

    def judge(self, query, document):
        with self.slots:
            return self.wrapped.judge(query, document)


def oracle_judge(qrels, min_grade=2):
    return OracleJudge(qrels, min_grade)


def threshold_judge(score_table, threshold):
    return ThresholdJudge(score_table, threshold)


def llm_judge(config, client=None, logger=None):
    config.validate()
    return LLMJudge(config, client=client, logger=logger)


def make_judge(config, qrels=None, score_table=None, logger=None):
    """
    Build the judge described by ``config``.

    If ``QPP_DEFAULT_JUDGE`` names a factory it is used for the ``llm``
    kind instead of the built-in HTTP judge.

    """
    config.validate()
    if config.judge_kind == 'oracle':
        if qrels is None:
            raise ConfigError('the oracle judge requires qrels')
        return oracle_judge(qrels, config.oracle_min_grade)
    if config.judge_kind == 'threshold':
        if score_table is None:
            raise ConfigError('the threshold judge requires a score table')
        return threshold_judge(score_table, config.threshold)
    factory = find_custom_judge_factory()
    if factory is not None:
        return factory(config)
    return llm_judge(config, logger=logger)


@dataclass(frozen=True)
class JudgmentVector:
    """
    Binary labels for the first ``min(depth, list_length)`` entries of a
    ranked list, in rank order.

    """

    query_id: str
    depth: int
    labels: tuple
    list_length: int = None

    def __post_init__(self):
        if self.list_length is None:
            object.__setattr__(self, 'list_length', len(self.labels))

    def __len__(self):
        return len(self.labels)

    def truncate(self, depth):
        return JudgmentVector(
            self.query_id,
            depth,
            self.labels[:depth],
            self.list_length,
        )


class JudgingStats(object):
    """Thread-safe counters for cache hits, fresh judgments and fallbacks."""

    def __init__(self):
        self.lock = threading.Lock()
        self.hits = 0
        self.misses = 0
        self.fallbacks = 0
        self.errors = 0

    def add(self, hits=0, misses=0, fallbacks=0, errors=0):
        with self.lock:
            self.hits += hits
            self.misses += misses
            self.fallbacks += fallbacks
            self.errors += errors

    def __repr__(self):
        return (
            '<JudgingStats hits={} misses={} fallbacks={} errors={}>'.format(
                self.hits, self.misses, self.fallbacks, self.errors
            )
        )


def _resolve(judge, query_id, doc_id, position, collection):
    if not judge.needs_text:
        return Query(query_id), Document(doc_id)
    collection = collection or Collection()
    query = collection.query(query_id)
    if query is None or not query.text:
        raise UnresolvableItemError(
            'query text not found', query_id=query_id, position=position
        )
    document = collection.document(doc_id)
    if document is None or not document.text:
        raise UnresolvableItemError(
            'document text not found',
            query_id=query_id,
            doc_id=doc_id,
            position=position,
        )
    return query, document


def judge_list(
    ranked,
    depth,
    judge,
    store,
    collection=None,
    stats=None,
    logger=None,
):
    """
    Label the top ``depth`` entries of ``ranked``.

    The store is consulted first; only cache misses reach the judge, at
    most ``judge.max_in_flight`` at a time. Fresh records are appended to
    the store in rank order. Judge failures are re-raised annotated with
    their 1-based position after every other miss has been judged.

    """
    if depth < 1:
        raise ConfigError('judging depth must be >= 1')
    if logger is None:
        logger = SilentLogger()
    if stats is None:
        stats = JudgingStats()

    qid = ranked.query_id
    top = ranked.entries[:depth]
    labels = [None] * len(top)
    misses = []
    for i, (docid, _) in enumerate(top):
        cached = store.get(qid, docid, judge.identity)
        if cached is not None:
            labels[i] = cached.label
        else:
            misses.append(i)
    stats.add(hits=len(top) - len(misses))
    logger.debug(
        'qid={} depth={} cached={} to judge={}'.format(
            qid, depth, len(top) - len(misses), len(misses)
        )
    )

    def work(i):
        docid = top[i][0]
        query, document = _resolve(judge, qid, docid, i + 1, collection)
        try:
            return judge.judge(query, document)
        except JudgeError:
            raise
        except QppError as ex:
            raise JudgeError(
                str(ex), query_id=qid, doc_id=docid, position=i + 1
            )

    if len(misses) > 1 and judge.max_in_flight > 1:
        workers = min(judge.max_in_flight, len(misses))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [(i, pool.submit(work, i)) for i in misses]
            outcomes = [(i, _outcome(f.result)) for i, f in futures]
    else:
        outcomes = [(i, _outcome(work, i)) for i in misses]

    failure = None
    for i, (record, error) in outcomes:
        if error is not None:
            stats.add(errors=1)
            if error.position is None:
                error.position = i + 1
            if failure is None:
                failure = error
            continue
        store.append(record)
        labels[i] = record.label
        stats.add(misses=1, fallbacks=int(record.fallback))
    if failure is not None:
        raise failure

    return JudgmentVector(qid, depth, tuple(labels), len(ranked))


def _outcome(fn, *args):
    try:
        return fn(*args), None
    except JudgeError as ex:
        return None, ex


@dataclass(frozen=True)
class ListScore:
    value: float
    clamped: bool = False
    raw_output: str = None


_NUMBER = re.compile(r'[-+]?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][-+]?\d+)?')


def parse_list_score(completion):
    """
    Return the first real number in ``completion`` clamped to ``[0, 1]``.
    """
    for match in _NUMBER.finditer(completion or ''):
        value = float(match.group(0))
        if not math.isfinite(value):
            continue
        clamped = min(1.0, max(0.0, value))
        return ListScore(clamped, clamped != value, completion)
    raise UnparseableOutputError(
        'no number in completion {!r}'.format(completion),
        raw_output=completion,
    )


def qpp_llm_direct(
    config, query, passages, demonstrations=(), client=None, logger=None
):
    """
    Ask the endpoint for a single quality score of a ranked list.

    ``passages`` are the texts of the top-k items in rank order and
    ``demonstrations`` a sequence of
    :class:`qppjudge.prompts.Demonstration` inserted before the target.

    """
    if logger is None:
        logger = SilentLogger()
    owns_client = client is None
    if owns_client:
        client = make_client(config.validate(), logger)
    try:
        prompt = build_list_score_prompt(query.text, passages, demonstrations)
        try:
            raw = client.complete(prompt)
        except JudgeError as ex:
            ex.query_id = query.id
            raise
        try:
            score = parse_list_score(raw)
        except UnparseableOutputError as ex:
            ex.query_id = query.id
            raise
        if score.clamped:
            logger.warn(
                'score {!r} for qid={} clamped to {}'.format(
                    raw, query.id, score.value
                )
            )
        return score
    finally:
        if owns_client:
            client.close()
