from abc import ABC, abstractmethod


class IJudge(ABC):
    """
    Something that labels a (query, document) pair as relevant (``1``) or
    irrelevant (``0``).

    ``source`` is one of ``"oracle"``, ``"threshold"``, ``"llm"`` or
    ``"file"`` and ``identity`` is a string that distinguishes judges of
    the same source (model name, threshold value) inside a judgment store.

    ``needs_text`` is ``True`` if :meth:`judge` reads ``query.text`` and
    ``document.text``; otherwise only the identifiers are used.

    ``max_in_flight`` bounds the number of concurrent :meth:`judge` calls
    issued while labeling a single ranked list.

    """

    source = None
    identity = None
    needs_text = False
    max_in_flight = 1

    @abstractmethod
    def judge(self, query, document):
        """Return a :class:`qppjudge.trec.JudgmentRecord`."""


class IJudgmentStore(ABC):
    @abstractmethod
    def get(self, query_id, doc_id, judge_id):
        """Return the stored record for the key or ``None``."""

    @abstractmethod
    def append(self, record):
        """
        Persist a new record.

        Raises :class:`qppjudge.errors.DuplicateJudgmentError` if a record
        with the same ``(query_id, doc_id, judge_id)`` already exists.

        """

    @abstractmethod
    def __iter__(self):
        """Iterate over every record in append order."""

    @abstractmethod
    def __len__(self):
        """Return the number of stored records."""


class ICompletionClient(ABC):
    @abstractmethod
    def complete(self, prompt):
        """Send ``prompt`` and return the text completion."""

    @abstractmethod
    def close(self):
        """Release any transport resources."""


class ILogger(ABC):
    @abstractmethod
    def error(self, msg):
        """Record an error message."""

    @abstractmethod
    def warn(self, msg):
        """Record a warning."""

    @abstractmethod
    def info(self, msg):
        """Record an informational message."""

    @abstractmethod
    def debug(self, msg):
        """Record a debug-only message."""
