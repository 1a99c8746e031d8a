import os
import random
import threading

from qppjudge.interfaces import ICompletionClient, IJudge
from qppjudge.trec import JudgmentRecord, Qrels, RankedList

here = os.path.abspath(os.path.dirname(__file__))
goldens = os.path.join(here, 'goldens')

SEED = 20231019


def make_rng(seed=SEED):
    return random.Random(seed)


def read_golden(name):
    with open(os.path.join(goldens, name), 'r', encoding='utf-8') as fp:
        return fp.read()


def ranked(qid, doc_ids, scores=None):
    """Build a list whose rank order is exactly ``doc_ids``."""
    if scores is None:
        scores = [float(len(doc_ids) - i) for i in range(len(doc_ids))]
    return RankedList(qid, tuple(zip(doc_ids, scores)))


def synthetic_run(num_queries=10, length=100, seed=SEED):
    rng = random.Random(seed)
    run = {}
    for q in range(num_queries):
        qid = 'q{}'.format(q)
        scores = sorted(
            (rng.uniform(1.0, 30.0) for _ in range(length)), reverse=True
        )
        docs = ['{}-d{}'.format(qid, i) for i in range(length)]
        run[qid] = RankedList(qid, tuple(zip(docs, scores)))
    return run


def synthetic_qrels(run, density=0.3, seed=SEED):
    rng = random.Random(seed)
    grades = {}
    for qid, ranked in run.items():
        for docid in ranked.doc_ids:
            if rng.random() < density:
                grades[(qid, docid)] = rng.choice([1, 2, 3])
            else:
                grades[(qid, docid)] = 0
    return Qrels(grades)


class CountingJudge(IJudge):
    """Labels documents whose id ends in an even digit; counts calls."""

    source = 'file'
    identity = 'counting'
    needs_text = False

    def __init__(self, max_in_flight=1, fail_on=()):
        self.max_in_flight = max_in_flight
        self.fail_on = set(fail_on)
        self.calls = []
        self.lock = threading.Lock()

    def judge(self, query, document):
        with self.lock:
            self.calls.append((query.id, document.id))
        if document.id in self.fail_on:
            from qppjudge.errors import JudgeError

            raise JudgeError('boom', query_id=query.id, doc_id=document.id)
        label = int(document.id[-1] in '02468')
        return JudgmentRecord(
            query.id,
            document.id,
            label,
            self.source,
            judge_id=self.identity,
        )


def counting_judge_factory(config):
    return CountingJudge(max_in_flight=config.max_in_flight)


class ScriptedClient(ICompletionClient):
    """Answers prompts from a list of canned completions, in order."""

    def __init__(self, *answers):
        self.answers = list(answers)
        self.prompts = []
        self.lock = threading.Lock()
        self.closed = False

    def complete(self, prompt):
        with self.lock:
            self.prompts.append(prompt)
            answer = self.answers.pop(0)
        if isinstance(answer, Exception):
            raise answer
        return answer

    def close(self):
        self.closed = True


class KeywordClient(ICompletionClient):
    """Answers "Relevant" when the passage mentions ``keyword``."""

    def __init__(self, keyword):
        self.keyword = keyword
        self.calls = 0
        self.lock = threading.Lock()

    def complete(self, prompt):
        with self.lock:
            self.calls += 1
        passage = prompt.split('Passage: ', 1)[1]
        if self.keyword in passage.split('\nOutput:')[0]:
            return ' Relevant'
        return 'Irrelevant.'

    def close(self):
        pass
