"""Part-of-speech annotation handling: token stream export, annotation ingestion and the lexicon tagger used for model predictions.

Annotation files have one ``token<TAB>TAG`` line per token, aligned with the exported token stream.
"""

from __future__ import annotations

import hashlib
import re
from collections import Counter, defaultdict
from collections.abc import Iterable, Sequence
from functools import lru_cache
from pathlib import Path

import importlib_resources
import numpy as np

from lm_memorization.corpus_pipeline.Packed_Dataset import Packed_Dataset
from lm_memorization.corpus_pipeline.Pos_Tag import Pos_Tag
from lm_memorization.corpus_pipeline.tokenizer import surface_form
from lm_memorization.corpus_pipeline.Vocabulary import SPECIAL_TOKENS
from lm_memorization.lm_memorization_exceptions.corpus_exceptions import Alignment_Exception, Ingestion_Exception

_NUMBER_PATTERN = re.compile(r"^[+-]?(\d+([.,]\d+)*|\d*\.\d+)(st|nd|rd|th|s)?$")


def _stream_digest(tokens: Iterable[str]) -> str:
    digest = hashlib.sha256()
    for token in tokens:
        digest.update(token.encode("utf-8"))
        digest.update(b"\n")
    return digest.hexdigest()


def export_token_stream(dataset: Packed_Dataset, path: str | Path) -> Path:
    """Write the dataset's token stream, one token per line, for tagging by an external tool.

    Args:
        dataset (Packed_Dataset): The dataset to export.
        path (str | Path): Destination file.

    Returns:
        Path: The written file.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as stream_file:
        for token in dataset.token_stream:
            stream_file.write(surface_form(token) + "\n")
    return path


def read_annotation_file(path: str | Path) -> list[tuple[str, Pos_Tag]]:
    """
    Args:
        path (str | Path): An annotation file of ``token<TAB>TAG`` lines.

    Returns:
        list[tuple[str, Pos_Tag]]: The annotated tokens in file order.

    Raises:
        Ingestion_Exception: If the file cannot be read or a line is malformed.
    """
    try:
        lines = Path(path).read_text(encoding="utf-8").split("\n")
    except (OSError, UnicodeDecodeError) as error:
        raise Ingestion_Exception(f"Cannot read annotation file {path}: {error}") from error
    if lines and lines[-1] == "":
        lines.pop()
    annotations: list[tuple[str, Pos_Tag]] = []
    for number, line in enumerate(lines, start=1):
        token, separator, label = line.rpartition("\t")
        if not separator:
            raise Ingestion_Exception(f"Line {number} of {path} is not token<TAB>TAG")
        annotations.append((token, Pos_Tag.from_label(label)))
    return annotations


def check_alignment(stream: Sequence[str], annotated: Sequence[str]) -> None:
    """
    Args:
        stream (Sequence[str]): Surface tokens of the dataset.
        annotated (Sequence[str]): Tokens of the annotation file.

    Raises:
        Alignment_Exception: If the token counts or stream checksums differ, naming the first divergent offset.
    """
    if len(stream) == len(annotated) and _stream_digest(stream) == _stream_digest(annotated):
        return
    for offset, (expected, found) in enumerate(zip(stream, annotated, strict=False)):
        if expected != found:
            raise Alignment_Exception(offset, expected, found)
    offset = min(len(stream), len(annotated))
    raise Alignment_Exception(offset, stream[offset] if offset < len(stream) else None, annotated[offset] if offset < len(annotated) else None)


def ingest_pos_annotations(dataset: Packed_Dataset, path: str | Path) -> Packed_Dataset:
    """
    Args:
        dataset (Packed_Dataset): The dataset whose token stream was exported and tagged.
        path (str | Path): The annotation file.

    Returns:
        Packed_Dataset: The dataset with a Pos_Tag on every token. Docid prefix tokens are tagged OTHER.

    Raises:
        Alignment_Exception: If the annotations do not align token-for-token with the dataset's token stream.
    """
    annotations = read_annotation_file(path)
    check_alignment([surface_form(token) for token in dataset.token_stream], [token for token, _ in annotations])
    stream_tags = np.fromiter((tag.code for _, tag in annotations), dtype=np.int8, count=len(annotations))
    tagged = []
    for sequence in dataset.sequences:
        tags = np.full(len(sequence), Pos_Tag.OTHER.code, dtype=np.int8)
        in_stream = sequence.source_positions >= 0
        tags[in_stream] = stream_tags[sequence.source_positions[in_stream]]
        tagged.append(sequence.with_pos_tags(tags))
    return dataset.with_sequences(tagged)


@lru_cache(maxsize=1)
def _seed_lexicon() -> dict[str, Pos_Tag]:
    source = importlib_resources.files("lm_memorization.resources").joinpath("seed_lexicon.tsv")
    lexicon: dict[str, Pos_Tag] = {}
    for line in source.read_text(encoding="utf-8").splitlines():
        if line and not line.startswith("#"):
            word, _, label = line.partition("\t")
            lexicon[word] = Pos_Tag(label)
    return lexicon


class Lexicon_Tagger:
    """Context-free tagger that assigns a part of speech to a single word.

    Numbers are NUM, capitalized words that do not start a sentence are PROPN, and any other word takes its most frequent annotated tag.
    Words never annotated fall back to the packaged seed lexicon and then to OTHER.
    """

    def __init__(self, counts: dict[str, Counter[Pos_Tag]] | None = None, use_seed_lexicon: bool = True) -> None:
        """
        Args:
            counts (dict[str, Counter[Pos_Tag]], optional): Annotated tag counts per word. Defaults to no annotations.
            use_seed_lexicon (bool, optional): Whether to fall back to the packaged seed lexicon. Defaults to True.
        """
        self._counts: dict[str, Counter[Pos_Tag]] = {} if counts is None else counts
        self._lexicon: dict[str, Pos_Tag] = _seed_lexicon() if use_seed_lexicon else {}
        self._cache: dict[tuple[str, bool], Pos_Tag] = {}

    @classmethod
    def from_annotations(cls, annotations: Iterable[tuple[str, Pos_Tag]], use_seed_lexicon: bool = True) -> Lexicon_Tagger:
        """
        Args:
            annotations (Iterable[tuple[str, Pos_Tag]]): Annotated tokens.
            use_seed_lexicon (bool, optional): Whether to fall back to the packaged seed lexicon. Defaults to True.

        Returns:
            Lexicon_Tagger: A tagger whose majority rule is built from the annotations.
        """
        counts: dict[str, Counter[Pos_Tag]] = defaultdict(Counter)
        for token, tag in annotations:
            counts[token][tag] += 1
        return cls(dict(counts), use_seed_lexicon)

    @classmethod
    def from_dataset(cls, dataset: Packed_Dataset, use_seed_lexicon: bool = True) -> Lexicon_Tagger:
        """
        Args:
            dataset (Packed_Dataset): A dataset with ingested tags.
            use_seed_lexicon (bool, optional): Whether to fall back to the packaged seed lexicon. Defaults to True.

        Returns:
            Lexicon_Tagger: A tagger built from the dataset's tagged tokens, excluding docid prefixes.
        """
        pairs: list[tuple[str, Pos_Tag]] = []
        for sequence in dataset.sequences:
            if sequence.pos_tags is None:
                continue
            words = dataset.vocabulary.decode(sequence.content_ids)
            codes = sequence.pos_tags[sequence.prefix_length :]
            pairs.extend((surface_form(word), Pos_Tag.from_code(int(code))) for word, code in zip(words, codes, strict=True))
        return cls.from_annotations(pairs, use_seed_lexicon)

    def _majority(self, word: str) -> Pos_Tag | None:
        counts = self._counts.get(word)
        if not counts:
            return None
        order = {tag: index for index, tag in enumerate(Pos_Tag)}
        return min(counts, key=lambda tag: (-counts[tag], order[tag]))

    def tag(self, word: str, sentence_initial: bool = False) -> Pos_Tag:
        """
        Args:
            word (str): A vocabulary token, possibly carrying the glue marker.
            sentence_initial (bool, optional): True if the word starts a sentence. Defaults to False.

        Returns:
            Pos_Tag: The word's tag.
        """
        key = (word, sentence_initial)
        if key not in self._cache:
            self._cache[key] = self._tag(surface_form(word), sentence_initial)
        return self._cache[key]

    def _tag(self, word: str, sentence_initial: bool) -> Pos_Tag:
        if word in SPECIAL_TOKENS or (word.startswith("<doc_") and word.endswith(">")):
            return Pos_Tag.OTHER
        if _NUMBER_PATTERN.match(word):
            return Pos_Tag.NUM
        if word[:1].isupper() and not sentence_initial:
            return Pos_Tag.PROPN
        for candidate in (word, word.lower()):
            majority = self._majority(candidate)
            if majority is not None:
                return majority
        for candidate in (word, word.lower()):
            if candidate in self._lexicon:
                return self._lexicon[candidate]
        return Pos_Tag.OTHER


def lexicon_pos_tag(word: str, tagger: Lexicon_Tagger | None = None, sentence_initial: bool = False) -> Pos_Tag:
    """
    Args:
        word (str): A vocabulary token or the unknown token.
        tagger (Lexicon_Tagger, optional): A tagger built from annotations. Defaults to a tagger with only the seed lexicon.
        sentence_initial (bool, optional): True if the word starts a sentence. Defaults to False.

    Returns:
        Pos_Tag: The word's tag.
    """
    return (Lexicon_Tagger() if tagger is None else tagger).tag(word, sentence_initial)
