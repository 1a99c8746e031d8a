import io
import os
import threading

from .errors import DuplicateJudgmentError
from .interfaces import IJudgmentStore
from .trec import dump_judgment, read_judgments


class JudgmentStore(IJudgmentStore):
    """
    An append-only cache of :class:`qppjudge.trec.JudgmentRecord` objects.

    When ``path`` is given the store is backed by a JSONL file: existing
    records are loaded on construction and every :meth:`append` writes one
    line and flushes it. Without a path the store lives only in memory.

    A file may repeat a key (e.g. after concatenating two stores) as long
    as the repeats agree on the label; the first line wins.

    Lookups go through a dict keyed by ``(query_id, doc_id, judge_id)``.
    Appends are serialized by a lock so several judging threads may share
    one store.

    """

    def __init__(self, path=None):
        self.path = path
        self.lock = threading.Lock()
        self.records = []
        self.index = {}
        self.fp = None
        if path is not None:
            if os.path.exists(path):
                with io.open(path, 'rb') as fp:
                    for record in read_judgments(fp, source=path):
                        self._load(record)
            self.fp = io.open(path, 'a', encoding='utf-8')

    def _load(self, record):
        seen = self.index.get(record.key)
        if seen is None:
            self._add(record)
        elif seen.label != record.label:
            raise DuplicateJudgmentError(
                'conflicting judgments qid={} docid={} judge={}'.format(
                    *record.key
                )
            )

    def _add(self, record):
        if record.key in self.index:
            raise DuplicateJudgmentError(
                'duplicate judgment qid={} docid={} judge={}'.format(
                    *record.key
                )
            )
        self.index[record.key] = record
        self.records.append(record)

    def get(self, query_id, doc_id, judge_id):
        return self.index.get((query_id, doc_id, judge_id))

    def append(self, record):
        with self.lock:
            self._add(record)
            if self.fp is not None:
                self.fp.write(dump_judgment(record) + '\n')
                self.fp.flush()

    def __iter__(self):
        return iter(list(self.records))

    def __len__(self):
        return len(self.records)

    def __contains__(self, key):
        return key in self.index

    def judge_ids(self):
        return sorted({r.judge_id for r in self.records})

    def close(self):
        if self.fp is not None:
            self.fp.close()
            self.fp = None

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()


def append_judgment(store, record):
    """Append ``record`` to ``store`` and return the store."""
    store.append(record)
    return store


def write_judgments(records, stream):
    for record in records:
        stream.write(dump_judgment(record) + '\n')
