from dataclasses import dataclass
import json

from .errors import ParseError, ValidationError

RELEVANCE_TEMPLATE = (
    'Instruction: Please assess the relevance of the provided passage to the '
    'following question. Please output "Relevant" or "Irrelevant".\n'
    'Question: {question}\n'
    'Passage: {passage}\n'
    'Output: Relevant/Irrelevant'
)

LIST_SCORE_INSTRUCTION = (
    'Instruction: Evaluate the relevance of the ranked list of passages to '
    'the given query by providing a numerical score between 0 and 1. A score '
    'of "1" indicates that the ranked passages are highly relevant to the '
    'query, while a score of "0" means no relevance between the passages and '
    'the query.'
)


@dataclass(frozen=True)
class Demonstration:
    """A worked example for the list-scoring prompt."""

    query: str
    passages: tuple
    value: float


def build_relevance_prompt(query, passage):
    """Fill the point-wise relevance template for ``query`` and ``passage``."""
    if not query.text:
        raise ValidationError('query {} has no text'.format(query.id))
    if not passage.text:
        raise ValidationError('passage {} has no text'.format(passage.id))
    return RELEVANCE_TEMPLATE.format(question=query.text, passage=passage.text)


def _list_block(query_text, passages):
    lines = ['Query: {}'.format(query_text)]
    for i, text in enumerate(passages, start=1):
        lines.append('Passage {}: {}'.format(i, text))
    return lines


def build_list_score_prompt(query_text, passages, demonstrations=()):
    """
    Build the prompt asking for a single quality score of a ranked list.

    Demonstrations are inserted verbatim, in the given order, between the
    instruction and the target block.

    """
    if not passages:
        raise ValidationError('at least one passage is required')
    lines = [LIST_SCORE_INSTRUCTION]
    for demo in demonstrations:
        lines.extend(_list_block(demo.query, demo.passages))
        lines.append('Output: {}'.format(format_value(demo.value)))
    lines.extend(_list_block(query_text, passages))
    lines.append('Output:')
    return '\n'.join(lines)


def format_value(value):
    return '{:.4f}'.format(value)


def read_demonstrations(stream, source=None):
    """
    Read JSONL demonstrations with ``query``, ``passages`` and ``value``.
    """
    demos = []
    for lineno, line in enumerate(stream, start=1):
        if isinstance(line, bytes):
            line = line.decode('utf-8')
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            demos.append(
                Demonstration(
                    query=str(obj['query']),
                    passages=tuple(str(p) for p in obj['passages']),
                    value=float(obj['value']),
                )
            )
        except (ValueError, KeyError, TypeError) as ex:
            raise ParseError(
                'invalid demonstration: {}'.format(ex), lineno, source=source
            )
    return demos
