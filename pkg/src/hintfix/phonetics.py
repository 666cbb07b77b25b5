"""Rule-based phonetic codes for normalized text.

A small metaphone-style scheme that maps spellings to consonant classes so
that homophonic spellings ("night"/"nite", "weeknd"/"weekend") produce equal
or near-equal code sequences.  Per token:

1. Transliterate to ASCII (``unidecode``), drop apostrophes, split on hyphens.
2. Collapse doubled letters ("weeknd" -> "weknd").
3. Drop a silent first letter of ``kn gn pn wr ps``.
4. A word-initial vowel emits ``A``; other vowels are dropped.
5. Consonants map to shared voiced/unvoiced classes via :data:`CODE_TABLE`
   after the digraph rules (``tch ph gh sh ch th ck wh qu``) and the soft
   ``c``/``g`` rules.
6. Consecutive equal codes collapse.

Digits map to themselves.  A token with letters that yields no code (e.g.
"h") emits ``A``.

Codes of all tokens are concatenated; the dense encoder takes its bigrams
across token boundaries so word splits and merges stay close.
"""

from __future__ import annotations

import re

from unidecode import unidecode

from hintfix.exceptions import EncodingError

#: Consonant -> class.  Voiced/unvoiced pairs share a class.
CODE_TABLE: dict[str, str] = {
    "b": "P",
    "p": "P",
    "d": "T",
    "t": "T",
    "g": "K",
    "k": "K",
    "q": "K",
    "c": "K",
    "v": "F",
    "f": "F",
    "s": "S",
    "z": "S",
    "j": "J",
    "l": "L",
    "r": "R",
    "m": "M",
    "n": "N",
}

VOWELS = frozenset("aeiou")
_SILENT_INITIALS = frozenset({"kn", "gn", "pn", "wr", "ps"})
_NON_CODE_RE = re.compile(r"[^a-z0-9]")
_DOUBLED_RE = re.compile(r"([a-z])\1+")

PhoneticCodeSequence = tuple[str, ...]


def _is_vowel(word: str, i: int) -> bool:
    return 0 <= i < len(word) and word[i] in VOWELS


def _consonant_codes(word: str, i: int) -> tuple[tuple[str, ...], int]:  # noqa: PLR0911, PLR0912
    """Return the codes emitted at position *i* and how many letters they consume."""
    ch = word[i]
    nxt = word[i + 1] if i + 1 < len(word) else ""
    if word.startswith("tch", i):
        return ("J",), 3
    if word.startswith("chr", i):
        return ("K",), 2
    pair = word[i : i + 2]
    if pair == "ph":
        return ("F",), 2
    if pair == "gh":
        return (("K",) if i == 0 else ()), 2
    if pair in ("sh", "ch"):
        return ("J",), 2
    if pair == "th":
        return ("0",), 2
    if pair == "ck":
        return ("K",), 2
    if pair == "wh":
        return ("W",), 2
    if pair == "qu":
        return ("K", "W"), 2
    if ch == "c":
        return (("S",) if nxt in ("e", "i", "y") else ("K",)), 1
    if ch == "g":
        return (("J",) if nxt in ("e", "y") else ("K",)), 1
    if ch == "x":
        return (("S",) if i == 0 else ("K", "S")), 1
    if ch in ("w", "y"):
        return ((ch.upper(),) if _is_vowel(word, i + 1) else ()), 1
    if ch == "h":
        before_vowel = _is_vowel(word, i + 1)
        after_vowel = _is_vowel(word, i - 1)
        return (("H",) if before_vowel and not after_vowel else ()), 1
    return (CODE_TABLE.get(ch, ch.upper()),), 1


def _word_codes(word: str) -> list[str]:
    word = _DOUBLED_RE.sub(r"\1", word)
    if word[:2] in _SILENT_INITIALS:
        word = word[1:]
    codes: list[str] = []
    i = 0
    if word[0] in VOWELS:
        codes.append("A")
        i = 1
    while i < len(word):
        ch = word[i]
        if ch.isdigit():
            codes.append(ch)
            i += 1
        elif ch in VOWELS:
            i += 1
        else:
            emitted, consumed = _consonant_codes(word, i)
            codes.extend(emitted)
            i += consumed
    if not codes:
        return ["A"]
    return [code for j, code in enumerate(codes) if j == 0 or codes[j - 1] != code]


def _code_words(text: str) -> list[str]:
    words: list[str] = []
    for token in text.split():
        ascii_token = unidecode(token).lower().replace("'", "")
        for piece in ascii_token.split("-"):
            cleaned = _NON_CODE_RE.sub("", piece)
            if cleaned:
                words.append(cleaned)
    return words


def phonetic_codes(text: str) -> PhoneticCodeSequence:
    """Map normalized *text* to its phonetic code sequence.

    Examples:
        >>> phonetic_codes("night") == phonetic_codes("nite")
        True
        >>> phonetic_codes("a")
        ('A',)

    Raises:
        EncodingError: If *text* contains no letters or digits.
    """
    codes: list[str] = []
    for word in _code_words(text):
        codes.extend(_word_codes(word))
    if not codes:
        raise EncodingError(f"No letters or digits to encode in {text!r}")
    return tuple(codes)
