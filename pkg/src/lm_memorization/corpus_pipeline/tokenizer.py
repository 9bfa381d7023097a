"""Word-level tokenizer and sentence segmentation.

Text is split on whitespace into chunks and each chunk into word and punctuation pieces.
Pieces after the first in a chunk carry the glue marker so that detokenize restores the whitespace-normalized text exactly.
"""

from __future__ import annotations

import re
from collections.abc import Iterable

GLUE_MARKER = "##"
_PIECE_PATTERN = re.compile(r"\w+|[^\w\s]")
_SENTENCE_BREAK = re.compile(r"(?<=[.!?])\s+")
_BLANK_LINE = re.compile(r"\n[ \t\r\f\v]*\n")


def normalize_whitespace(text: str) -> str:
    """
    Args:
        text (str): Any text.

    Returns:
        str: The text with every whitespace run collapsed to one space and no leading or trailing whitespace.
    """
    return " ".join(text.split())


def tokenize(text: str) -> list[str]:
    """
    Args:
        text (str): Text to tokenize. Case is preserved.

    Returns:
        list[str]: Word and punctuation tokens. A token that was attached to the previous token without whitespace starts with the glue marker.
    """
    tokens: list[str] = []
    for chunk in text.split():
        pieces = _PIECE_PATTERN.findall(chunk)
        tokens.append(pieces[0])
        tokens.extend(GLUE_MARKER + piece for piece in pieces[1:])
    return tokens


def is_glued(token: str) -> bool:
    """
    Args:
        token (str): A token.

    Returns:
        bool: True if the token attaches to the previous token without whitespace.
    """
    return token.startswith(GLUE_MARKER) and len(token) > len(GLUE_MARKER)


def surface_form(token: str) -> str:
    """
    Args:
        token (str): A token.

    Returns:
        str: The token's text without its glue marker.
    """
    return token[len(GLUE_MARKER) :] if is_glued(token) else token


def detokenize(tokens: Iterable[str]) -> str:
    """
    Args:
        tokens (Iterable[str]): Tokens produced by tokenize.

    Returns:
        str: The whitespace-normalized text the tokens were produced from.
    """
    parts: list[str] = []
    for token in tokens:
        if is_glued(token) and parts:
            parts[-1] += surface_form(token)
        else:
            parts.append(surface_form(token))
    return " ".join(parts)


def split_documents(text: str) -> list[str]:
    """
    Args:
        text (str): A corpus with one document per blank-line-separated block.

    Returns:
        list[str]: The non-empty documents in corpus order.
    """
    return [block.strip() for block in _BLANK_LINE.split(text.replace("\r\n", "\n")) if block.strip()]


def split_sentences(document: str) -> list[str]:
    """
    Args:
        document (str): One document.

    Returns:
        list[str]: Sentences, split after terminal punctuation (. ! ?) followed by whitespace.
    """
    return [sentence for sentence in _SENTENCE_BREAK.split(normalize_whitespace(document)) if sentence]
