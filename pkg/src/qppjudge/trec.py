"""
Readers and writers for the plain-text formats used in TREC-style
retrieval experiments: run files, qrels, query/passage collections,
judgment stores and per-query value tables.

All parsers accept any iterable of lines (an open file, a list of strings,
``io.StringIO``); lines may be ``bytes`` in which case they are decoded as
UTF-8. Parsed structures are immutable.

"""
from collections.abc import Mapping
from dataclasses import dataclass
import json
import math

from .errors import DuplicateEntryError, ParseError, ValidationError
from .logger import SilentLogger

DEFAULT_MAX_LENGTH = 1000

JUDGMENT_SOURCES = ('oracle', 'threshold', 'llm', 'file')


@dataclass(frozen=True)
class Query:
    id: str
    text: str = ''

    def __post_init__(self):
        if not self.id:
            raise ValidationError('query id must be non-empty')

    @property
    def term_count(self):
        return len(self.text.split())


@dataclass(frozen=True)
class Document:
    id: str
    text: str = ''

    def __post_init__(self):
        if not self.id:
            raise ValidationError('document id must be non-empty')


def rank_order(entries):
    """Sort ``(doc_id, score)`` pairs by score desc, then doc_id desc."""
    return sorted(entries, key=lambda e: (e[1], e[0]), reverse=True)


@dataclass(frozen=True)
class RankedList:
    """
    The retrieval result for a single query.

    ``entries`` is a tuple of ``(doc_id, score)`` pairs in rank order. Use
    :meth:`from_entries` to build one from unordered pairs.

    """

    query_id: str
    entries: tuple
    run_tag: str = ''

    @classmethod
    def from_entries(cls, query_id, entries, run_tag=''):
        seen = set()
        for doc_id, score in entries:
            if doc_id in seen:
                raise DuplicateEntryError(
                    'duplicate pair ({}, {})'.format(query_id, doc_id)
                )
            seen.add(doc_id)
        ordered = tuple((d, float(s)) for d, s in rank_order(entries))
        return cls(query_id=query_id, entries=ordered, run_tag=run_tag)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def doc_ids(self):
        return [d for d, _ in self.entries]

    @property
    def scores(self):
        return [s for _, s in self.entries]

    def top(self, n):
        """Return a new list holding the first ``n`` entries."""
        return RankedList(self.query_id, self.entries[:n], self.run_tag)


class Qrels(Mapping):
    """
    Human relevance grades keyed by ``(query_id, doc_id)``.

    Pairs that are absent are treated as grade ``0`` by :meth:`grade`,
    following the evaluation-tool convention for unjudged documents.

    """

    def __init__(self, grades=None):
        self._grades = {}
        self._by_query = {}
        for (qid, docid), grade in (grades or {}).items():
            grade = int(grade)
            if grade < 0:
                raise ValidationError(
                    'negative grade {} for ({}, {})'.format(grade, qid, docid)
                )
            self._grades[(qid, docid)] = grade
            self._by_query.setdefault(qid, {})[docid] = grade

    def __getitem__(self, key):
        return self._grades[key]

    def __iter__(self):
        return iter(self._grades)

    def __len__(self):
        return len(self._grades)

    def grade(self, query_id, doc_id, default=0):
        return self._grades.get((query_id, doc_id), default)

    def for_query(self, query_id):
        return dict(self._by_query.get(query_id, {}))

    @property
    def query_ids(self):
        return sorted(self._by_query)


@dataclass(frozen=True)
class JudgmentRecord:
    """
    A single binary relevance judgment.

    ``judge_id`` identifies the judge that produced the label (source plus
    model name or threshold); it defaults to ``source``. ``fallback`` marks
    labels that were assigned because the judge output was unusable.

    """

    query_id: str
    doc_id: str
    label: int
    source: str
    raw_output: str = None
    judge_id: str = None
    fallback: bool = False

    def __post_init__(self):
        if type(self.label) is not int or self.label not in (0, 1):
            raise ValidationError(
                'label must be 0 or 1, got {!r}'.format(self.label)
            )
        if self.source not in JUDGMENT_SOURCES:
            raise ValidationError('unknown source {!r}'.format(self.source))
        if not self.query_id or not self.doc_id:
            raise ValidationError('judgment ids must be non-empty')
        if self.judge_id is None:
            object.__setattr__(self, 'judge_id', self.source)

    @property
    def key(self):
        return (self.query_id, self.doc_id, self.judge_id)

    def to_json(self):
        return {
            'qid': self.query_id,
            'docid': self.doc_id,
            'label': self.label,
            'source': self.source,
            'raw_output': self.raw_output,
            'judge': self.judge_id,
            'fallback': self.fallback,
        }

    @classmethod
    def from_json(cls, obj):
        try:
            return cls(
                query_id=obj['qid'],
                doc_id=obj['docid'],
                label=obj['label'],
                source=obj['source'],
                raw_output=obj.get('raw_output'),
                judge_id=obj.get('judge'),
                fallback=bool(obj.get('fallback', False)),
            )
        except KeyError as ex:
            raise ValidationError('missing field {}'.format(ex))


def _iter_lines(stream, source=None):
    """Yield ``(lineno, offset, text)`` for every line of ``stream``."""
    offset = 0
    for lineno, line in enumerate(stream, start=1):
        if isinstance(line, bytes):
            raw = line
            try:
                line = raw.decode('utf-8')
            except UnicodeDecodeError as ex:
                raise ParseError(
                    'invalid encoding: {}'.format(ex),
                    line=lineno,
                    offset=offset,
                    source=source,
                )
        else:
            raw = line.encode('utf-8')
        yield lineno, offset, line.rstrip('\r\n')
        offset += len(raw)


def _parse_score(value, lineno, source):
    try:
        score = float(value)
    except ValueError:
        raise ParseError(
            'score {!r} is not a number'.format(value), lineno, source=source
        )
    if not math.isfinite(score):
        raise ParseError(
            'score {!r} is not finite'.format(value), lineno, source=source
        )
    return score


def parse_run(
    stream, max_length=DEFAULT_MAX_LENGTH, logger=None, source=None
):
    """
    Parse a six-column TREC run into ``{query_id: RankedList}``.

    The rank column is validated as an integer but otherwise ignored;
    entries are re-sorted by score descending with ties broken by doc id
    descending. Lists longer than ``max_length`` are truncated with a
    warning; pass ``None`` to keep everything.

    """
    if logger is None:
        logger = SilentLogger()

    entries = {}
    tags = {}
    for lineno, _, line in _iter_lines(stream, source):
        if not line.strip():
            continue
        fields = line.split()
        if len(fields) != 6:
            raise ParseError(
                'expected 6 fields, found {}'.format(len(fields)),
                lineno,
                source=source,
            )
        qid, _, docid, rank, score, tag = fields
        try:
            int(rank)
        except ValueError:
            raise ParseError(
                'rank {!r} is not an integer'.format(rank),
                lineno,
                source=source,
            )
        score = _parse_score(score, lineno, source)
        docs = entries.setdefault(qid, {})
        if docid in docs:
            raise DuplicateEntryError(
                'duplicate pair ({}, {})'.format(qid, docid),
                lineno,
                source=source,
            )
        docs[docid] = score
        tags.setdefault(qid, tag)

    runs = {}
    for qid, docs in entries.items():
        ordered = rank_order(docs.items())
        if max_length is not None and len(ordered) > max_length:
            logger.warn(
                'query {} has {} entries; truncating to {}'.format(
                    qid, len(ordered), max_length
                )
            )
            ordered = ordered[:max_length]
        runs[qid] = RankedList(qid, tuple(ordered), tags[qid])
    return runs


def write_run(runs, stream):
    """Serialize ``{query_id: RankedList}`` as a TREC run, sorted by qid."""
    for qid in sorted(runs):
        ranked = runs[qid]
        for rank, (docid, score) in enumerate(ranked.entries, start=1):
            stream.write(
                '{} Q0 {} {} {!r} {}\n'.format(
                    qid, docid, rank, score, ranked.run_tag or 'run'
                )
            )


def read_score_table(stream, source=None):
    """
    Flatten a run-format file into ``{(query_id, doc_id): score}``.

    Used as the input of the threshold judge, e.g. re-ranker scores.

    """
    runs = parse_run(stream, max_length=None, source=source)
    table = {}
    for qid, ranked in runs.items():
        for docid, score in ranked.entries:
            table[(qid, docid)] = score
    return table


def parse_qrels(stream, source=None):
    """Parse four-column TREC qrels into :class:`Qrels`."""
    grades = {}
    for lineno, _, line in _iter_lines(stream, source):
        if not line.strip():
            continue
        fields = line.split()
        if len(fields) != 4:
            raise ParseError(
                'expected 4 fields, found {}'.format(len(fields)),
                lineno,
                source=source,
            )
        qid, _, docid, grade = fields
        try:
            grade = int(grade)
        except ValueError:
            raise ParseError(
                'grade {!r} is not an integer'.format(grade),
                lineno,
                source=source,
            )
        if grade < 0:
            raise ParseError(
                'negative grade {}'.format(grade), lineno, source=source
            )
        if (qid, docid) in grades:
            raise DuplicateEntryError(
                'duplicate pair ({}, {})'.format(qid, docid),
                lineno,
                source=source,
            )
        grades[(qid, docid)] = grade
    return Qrels(grades)


def write_qrels(qrels, stream):
    for qid, docid in sorted(qrels):
        stream.write('{} 0 {} {}\n'.format(qid, docid, qrels[(qid, docid)]))


COLLECTION_FORMATS = ('tsv', 'jsonl')


def parse_collection(stream, format='tsv', factory=Document, source=None):
    """
    Parse a passage (or query) collection into ``{id: factory(id, text)}``.

    ``tsv`` lines are ``id<TAB>text``; ``jsonl`` objects carry ``id`` and
    ``contents``.

    """
    if format not in COLLECTION_FORMATS:
        raise ValidationError('unknown collection format {!r}'.format(format))

    items = {}
    for lineno, _, line in _iter_lines(stream, source):
        if not line.strip():
            continue
        if format == 'tsv':
            fields = line.split('\t', 1)
            if len(fields) != 2:
                raise ParseError('expected id<TAB>text', lineno, source=source)
            item_id, text = fields
        else:
            try:
                obj = json.loads(line)
            except ValueError as ex:
                raise ParseError(
                    'invalid json: {}'.format(ex), lineno, source=source
                )
            if not isinstance(obj, dict):
                raise ParseError('expected an object', lineno, source=source)
            for name in ('id', 'contents'):
                if name not in obj:
                    raise ParseError(
                        'missing field {!r}'.format(name),
                        lineno,
                        source=source,
                    )
            item_id, text = str(obj['id']), str(obj['contents'])
        if not item_id:
            raise ParseError('empty id', lineno, source=source)
        if item_id in items:
            raise DuplicateEntryError(
                'duplicate id {}'.format(item_id), lineno, source=source
            )
        items[item_id] = factory(item_id, text)
    return items


def parse_queries(stream, format='tsv', source=None):
    return parse_collection(stream, format, factory=Query, source=source)


def read_judgments(stream, source=None):
    """
    Read a JSONL judgment store into a list of :class:`JudgmentRecord`.

    Corrupt lines raise :class:`ParseError` carrying the line number and
    byte offset.

    """
    records = []
    for lineno, offset, line in _iter_lines(stream, source):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            if not isinstance(obj, dict):
                raise ValueError('expected an object')
            record = JudgmentRecord.from_json(obj)
        except ValueError as ex:
            raise ParseError(str(ex), lineno, offset=offset, source=source)
        records.append(record)
    return records


def dump_judgment(record):
    return json.dumps(record.to_json(), sort_keys=True, ensure_ascii=False)


def read_values(stream, measure=None, source=None):
    """
    Read per-query values into ``{query_id: float}``.

    Accepts ``qid value`` (tab or space separated) and the three-column
    per-query output of evaluation tools, ``measure qid value``; the
    ``all`` summary row is skipped. ``measure`` filters three-column input.

    """
    values = {}
    measures = set()
    for lineno, _, line in _iter_lines(stream, source):
        if not line.strip():
            continue
        fields = line.split()
        if len(fields) == 2:
            qid, value = fields
        elif len(fields) == 3:
            name, qid, value = fields
            if measure is not None and name != measure:
                continue
            if qid == 'all':
                continue
            measures.add(name)
            if len(measures) > 1:
                raise ParseError(
                    'several measures found ({}); select one'.format(
                        ', '.join(sorted(measures))
                    ),
                    lineno,
                    source=source,
                )
        else:
            raise ParseError(
                'expected 2 or 3 fields, found {}'.format(len(fields)),
                lineno,
                source=source,
            )
        if qid in values:
            raise DuplicateEntryError(
                'duplicate query {}'.format(qid), lineno, source=source
            )
        values[qid] = _parse_score(value, lineno, source)
    return values


def write_values(values, stream):
    """Write ``{query_id: float}`` as ``qid<TAB>value`` sorted by qid."""
    for qid in sorted(values):
        stream.write('{}\t{!r}\n'.format(qid, float(values[qid])))


@dataclass(frozen=True)
class Collection:
    """Query and passage texts, needed by judges that read text."""

    queries: dict = None
    documents: dict = None

    def query(self, query_id):
        return (self.queries or {}).get(query_id)

    def document(self, doc_id):
        return (self.documents or {}).get(doc_id)
