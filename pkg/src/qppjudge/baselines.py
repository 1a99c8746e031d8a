"""
Unsupervised post-retrieval predictors computed from retrieval scores.

Standard deviations are population standard deviations (``ddof=0``)
throughout. Every predictor accepts a :class:`qppjudge.trec.RankedList`
or a plain sequence of scores in rank order.

"""
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError, QppError
from .judges import make_client, qpp_llm_direct
from .logger import SilentLogger
from .metrics import PredictionResult

BASELINE_METHODS = ('wig', 'nqc', 'sigma_max', 'n_sigma_x', 'smv')
CORPUS_SCORE_MODES = ('provided', 'mean_of_list')
N_SIGMA_NORMALIZERS = ('count', 'query_length', 'none')


@dataclass(frozen=True)
class BaselineSpec:
    method: str
    k: int = 100
    x: float = 0.5
    corpus_score_mode: str = 'mean_of_list'
    normalizer: str = 'count'

    def __post_init__(self):
        if self.method not in BASELINE_METHODS:
            raise ConfigError('unknown method {!r}'.format(self.method))
        if self.k < 1:
            raise ConfigError('k must be >= 1')
        if not 0 < self.x <= 1:
            raise ConfigError('x must be in (0, 1], got {}'.format(self.x))
        if self.corpus_score_mode not in CORPUS_SCORE_MODES:
            raise ConfigError(
                'unknown corpus score mode {!r}'.format(self.corpus_score_mode)
            )
        if self.normalizer not in N_SIGMA_NORMALIZERS:
            raise ConfigError(
                'unknown normalizer {!r}'.format(self.normalizer)
            )

    @property
    def name(self):
        if self.method == 'n_sigma_x':
            return 'n_sigma_x@{}'.format(self.x)
        if self.method == 'sigma_max':
            return 'sigma_max'
        return '{}@{}'.format(self.method, self.k)

    @property
    def needs_query_text(self):
        return self.method == 'wig' or (
            self.method == 'n_sigma_x' and self.normalizer == 'query_length'
        )


def _scores(ranked):
    scores = getattr(ranked, 'scores', ranked)
    scores = np.asarray(list(scores), dtype=float)
    if scores.size == 0:
        raise DomainError('empty ranked list')
    return scores


def _top(ranked, k):
    if k < 1:
        raise ConfigError('k must be >= 1')
    return _scores(ranked)[:k]


def corpus_score(ranked, mode='mean_of_list', provided=None):
    """
    Estimate the retrieval score of the whole corpus.

    ``mean_of_list`` averages every score in the list; ``provided`` returns
    the caller-supplied value (e.g. computed by the retriever).

    """
    if mode == 'provided':
        _scores(ranked)
        if provided is None:
            raise ConfigError('corpus score mode "provided" needs a value')
        return float(provided)
    if mode != 'mean_of_list':
        raise ConfigError('unknown corpus score mode {!r}'.format(mode))
    return float(np.mean(_scores(ranked)))


def wig(ranked, query_term_count, k, s_c):
    if query_term_count < 1:
        raise DomainError('query must contain at least one term')
    top = _top(ranked, k)
    return float(np.mean(top - s_c) / np.sqrt(query_term_count))


def nqc(ranked, k, s_c):
    if s_c == 0:
        raise DomainError('corpus score must be non-zero')
    return float(np.std(_top(ranked, k)) / s_c)


def sigma_max(ranked):
    """The largest standard deviation over all prefixes of the list."""
    scores = _scores(ranked)
    return float(max(np.std(scores[:i]) for i in range(1, scores.size + 1)))


def n_sigma_x(ranked, x, normalizer='count', query_term_count=None):
    """
    Standard deviation of the scores within ``x`` of the top score.

    The items kept are those with ``score >= x * top score``, so the top
    score must not be negative. The result is divided by their number
    (``count``), by the query length (``query_length``) or left as is
    (``none``).

    """
    if not 0 < x <= 1:
        raise ConfigError('x must be in (0, 1], got {}'.format(x))
    scores = _scores(ranked)
    if scores[0] < 0:
        raise DomainError(
            'n_sigma_x needs a non-negative top score, got {}'.format(
                scores[0]
            )
        )
    kept = scores[scores >= x * scores[0]]
    sigma = float(np.std(kept))
    if normalizer == 'count':
        return sigma / kept.size
    if normalizer == 'query_length':
        if not query_term_count:
            raise DomainError('query length normalization needs the query')
        return sigma / query_term_count
    if normalizer == 'none':
        return sigma
    raise ConfigError('unknown normalizer {!r}'.format(normalizer))


def smv(ranked, k, s_c):
    if s_c == 0:
        raise DomainError('corpus score must be non-zero')
    top = _top(ranked, k)
    if (top <= 0).any():
        raise DomainError('smv requires positive scores in the top-k')
    mu = np.mean(top)
    return float(np.mean(top * np.abs(np.log(top / mu))) / s_c)


def predict_one(spec, ranked, query=None, provided_corpus_score=None):
    """Apply ``spec`` to a single ranked list."""
    if spec.method == 'sigma_max':
        return sigma_max(ranked)
    if spec.method == 'n_sigma_x':
        term_count = query.term_count if query is not None else None
        return n_sigma_x(ranked, spec.x, spec.normalizer, term_count)

    s_c = corpus_score(ranked, spec.corpus_score_mode, provided_corpus_score)
    if spec.method == 'wig':
        if query is None:
            raise ConfigError('wig needs the query text for its term count')
        return wig(ranked, query.term_count, spec.k, s_c)
    if spec.method == 'nqc':
        return nqc(ranked, spec.k, s_c)
    return smv(ranked, spec.k, s_c)


def predict_baseline(
    run, spec, queries=None, corpus_scores=None, logger=None
):
    """
    Apply ``spec`` to every ranked list in ``run``.

    ``queries`` maps query ids to :class:`qppjudge.trec.Query` and is
    required by WIG (and by n(sigma_x) with query length normalization).
    ``corpus_scores`` maps query ids to corpus scores when
    ``spec.corpus_score_mode`` is ``provided``.

    """
    if logger is None:
        logger = SilentLogger()
    if spec.needs_query_text and queries is None:
        raise ConfigError('{} needs a queries file'.format(spec.method))
    if spec.corpus_score_mode == 'provided' and corpus_scores is None:
        raise ConfigError('corpus score mode "provided" needs corpus scores')

    result = PredictionResult(
        spec.name,
        meta={
            'method': spec.method,
            'k': spec.k,
            'x': spec.x,
            'corpus_score_mode': spec.corpus_score_mode,
            'normalizer': spec.normalizer,
        },
    )
    for qid in sorted(run):
        query = queries.get(qid) if queries is not None else None
        provided = (corpus_scores or {}).get(qid)
        try:
            if spec.needs_query_text and query is None:
                raise ConfigError(
                    'query {} not in the queries file'.format(qid)
                )
            if spec.corpus_score_mode == 'provided' and provided is None:
                raise ConfigError('no corpus score for query {}'.format(qid))
            value = predict_one(spec, run[qid], query, provided)
        except QppError as ex:
            logger.warn('qid={}: {}'.format(qid, ex))
            result.errors[qid] = str(ex)
            continue
        result.add(qid, value)
    return result


def predict_direct(
    run,
    config,
    collection,
    k=10,
    demonstrations=(),
    client=None,
    logger=None,
):
    """
    Score every ranked list in one shot by asking the completion endpoint
    for a number in ``[0, 1]`` given the top ``k`` passages.

    """
    if logger is None:
        logger = SilentLogger()
    if k < 1:
        raise ConfigError('k must be >= 1')
    result = PredictionResult(
        'qpp_llm@{}'.format(k),
        meta={
            'model': config.model_name,
            'k': k,
            'demonstrations': len(demonstrations),
        },
    )
    owns_client = client is None
    if owns_client:
        client = make_client(config.validate(), logger)
    clamped = []
    try:
        for qid in sorted(run):
            try:
                query, passages = _top_passages(run[qid], collection, k)
                score = qpp_llm_direct(
                    config,
                    query,
                    passages,
                    demonstrations,
                    client=client,
                    logger=logger,
                )
            except QppError as ex:
                logger.warn('qid={}: {}'.format(qid, ex))
                result.errors[qid] = str(ex)
                continue
            if score.clamped:
                clamped.append(qid)
            result.add(qid, score.value)
    finally:
        if owns_client:
            client.close()
    result.meta['clamped'] = clamped
    return result


def _top_passages(ranked, collection, k):
    query = collection.query(ranked.query_id)
    if query is None:
        raise ConfigError('query {} has no text'.format(ranked.query_id))
    passages = []
    for docid in ranked.doc_ids[:k]:
        document = collection.document(docid)
        if document is None:
            raise ConfigError('document {} has no text'.format(docid))
        passages.append(document.text)
    return query, passages
