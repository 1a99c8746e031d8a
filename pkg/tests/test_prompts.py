import io
import json
import pytest

from qppjudge.errors import ParseError, ValidationError
from qppjudge.prompts import (
    Demonstration,
    build_list_score_prompt,
    build_relevance_prompt,
    read_demonstrations,
)
from qppjudge.trec import Document, Query

from .util import read_golden

CAT = 'A cat is a small domesticated carnivorous mammal.'


def test_relevance_prompt_golden():
    prompt = build_relevance_prompt(
        Query('q1', 'what is a cat'), Document('d1', CAT)
    )
    assert prompt == read_golden('relevance_prompt.txt').rstrip('\n')


def test_relevance_prompt_requires_text():
    with pytest.raises(ValidationError):
        build_relevance_prompt(Query('q1', ''), Document('d1', CAT))
    with pytest.raises(ValidationError):
        build_relevance_prompt(Query('q1', 'x'), Document('d1'))


def test_list_score_prompt_golden():
    demo = Demonstration(
        'dog breeds',
        ('The beagle is a scent hound.', 'Stock prices fell today.'),
        0.63093,
    )
    prompt = build_list_score_prompt(
        'what is a cat', [CAT, 'Cats sleep a lot.'], [demo]
    )
    assert prompt == read_golden('list_score_prompt.txt').rstrip('\n')


def test_list_score_prompt_without_demonstrations():
    prompt = build_list_score_prompt('q', ['p'])
    assert prompt.endswith('Query: q\nPassage 1: p\nOutput:')
    with pytest.raises(ValidationError):
        build_list_score_prompt('q', [])


def test_read_demonstrations():
    lines = [
        json.dumps({'query': 'a', 'passages': ['x', 'y'], 'value': 0.5}),
        '',
        json.dumps({'query': 'b', 'passages': ['z'], 'value': 1}),
    ]
    demos = read_demonstrations(io.StringIO('\n'.join(lines)))
    assert demos == [
        Demonstration('a', ('x', 'y'), 0.5),
        Demonstration('b', ('z',), 1.0),
    ]


def test_read_demonstrations_missing_value():
    with pytest.raises(ParseError) as exc:
        read_demonstrations(io.StringIO('{"query": "a", "passages": []}\n'))
    assert exc.value.line == 1
