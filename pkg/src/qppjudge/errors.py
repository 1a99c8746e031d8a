class QppError(Exception):
    """Base class for every error raised by :mod:`qppjudge`."""


class ConfigError(QppError):
    """Invalid parameters or an invalid combination of options."""


class ValidationError(QppError, ValueError):
    """A value violates a domain invariant."""


class ParseError(QppError):
    """
    Malformed input.

    ``line`` is the 1-based line number of the offending record and
    ``offset`` the byte offset of its first character, when known.

    """

    def __init__(self, msg, line=None, offset=None, source=None):
        self.msg = msg
        self.line = line
        self.offset = offset
        self.source = source
        super(ParseError, self).__init__(str(self))

    def __str__(self):
        where = []
        if self.source:
            where.append(str(self.source))
        if self.line is not None:
            where.append('line {}'.format(self.line))
        if self.offset is not None:
            where.append('offset {}'.format(self.offset))
        if where:
            return '{}: {}'.format(', '.join(where), self.msg)
        return self.msg


class DuplicateEntryError(ParseError):
    """A (query, document) pair occurs more than once in a run or qrels."""


class DuplicateJudgmentError(QppError):
    """A judgment with the same store key has already been appended."""


class JudgeError(QppError):
    """A judge could not produce a label for an item."""

    def __init__(self, msg, query_id=None, doc_id=None, position=None):
        self.msg = msg
        self.query_id = query_id
        self.doc_id = doc_id
        self.position = position
        super(JudgeError, self).__init__(str(self))

    def __str__(self):
        parts = []
        if self.query_id is not None:
            parts.append('qid={}'.format(self.query_id))
        if self.doc_id is not None:
            parts.append('docid={}'.format(self.doc_id))
        if self.position is not None:
            parts.append('position={}'.format(self.position))
        if parts:
            return '{} ({})'.format(self.msg, ' '.join(parts))
        return self.msg


class MissingScoreError(JudgeError):
    """The score table has no entry for the requested pair."""


class UnresolvableItemError(JudgeError):
    """The query or document text is not available in the collection."""


class UnparseableOutputError(JudgeError):
    """The model completion could not be mapped to a label or a number."""

    def __init__(self, msg, raw_output, **kw):
        self.raw_output = raw_output
        super(UnparseableOutputError, self).__init__(msg, **kw)


class TransportError(JudgeError):
    """The completion endpoint could not be reached within the retry budget."""


class AuthenticationError(JudgeError):
    """The completion endpoint rejected the credentials."""


class EmptyCompletionError(JudgeError):
    """The completion endpoint answered with an empty completion."""


class DepthShortfallError(QppError):
    """A judgment vector does not cover the positions a metric needs."""


class DomainError(QppError):
    """A predictor was evaluated outside of its mathematical domain."""


class UndefinedCorrelationError(QppError):
    """A correlation coefficient is undefined for the given series."""


class EmptyIntersectionError(QppError):
    """Two inputs share no keys."""
