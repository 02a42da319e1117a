"""Porter stemmer (original 1980 algorithm).

Self-contained so the text pipeline has no external NLP dependency.
Within each step the longest matching suffix is selected first; if its
condition fails, no other rule of that step is tried.
"""

from __future__ import annotations

_VOWELS = "aeiou"


def _is_consonant(word: str, i: int) -> bool:
    c = word[i]
    if c in _VOWELS:
        return False
    if c == "y":
        return True if i == 0 else not _is_consonant(word, i - 1)
    return True


def _measure(stem: str) -> int:
    """Number of VC sequences in [C](VC)^m[V]."""
    n = len(stem)
    i = 0
    while i < n and _is_consonant(stem, i):
        i += 1
    m = 0
    while i < n:
        while i < n and not _is_consonant(stem, i):
            i += 1
        if i >= n:
            break
        m += 1
        while i < n and _is_consonant(stem, i):
            i += 1
    return m


def _contains_vowel(stem: str) -> bool:
    return any(not _is_consonant(stem, i) for i in range(len(stem)))


def _ends_double_consonant(word: str) -> bool:
    return (
        len(word) >= 2
        and word[-1] == word[-2]
        and _is_consonant(word, len(word) - 1)
    )


def _ends_cvc(word: str) -> bool:
    # consonant-vowel-consonant where the final consonant is not w, x or y
    return (
        len(word) >= 3
        and _is_consonant(word, len(word) - 3)
        and not _is_consonant(word, len(word) - 2)
        and _is_consonant(word, len(word) - 1)
        and word[-1] not in "wxy"
    )


def _apply_first(word: str, rules) -> str:
    """Apply the longest-suffix rule whose condition holds; stop at first match."""
    for suffix, repl, cond in rules:
        if word.endswith(suffix):
            stem = word[: len(word) - len(suffix)]
            if cond is None or cond(stem):
                return stem + repl
            return word
    return word


_M_GT_0 = lambda s: _measure(s) > 0  # noqa: E731
_M_GT_1 = lambda s: _measure(s) > 1  # noqa: E731

# Longest suffix first within each list.
_STEP2 = [
    ("ational", "ate", _M_GT_0),
    ("ization", "ize", _M_GT_0),
    ("iveness", "ive", _M_GT_0),
    ("fulness", "ful", _M_GT_0),
    ("ousness", "ous", _M_GT_0),
    ("biliti", "ble", _M_GT_0),
    ("tional", "tion", _M_GT_0),
    ("entli", "ent", _M_GT_0),
    ("ousli", "ous", _M_GT_0),
    ("ation", "ate", _M_GT_0),
    ("alism", "al", _M_GT_0),
    ("aliti", "al", _M_GT_0),
    ("iviti", "ive", _M_GT_0),
    ("enci", "ence", _M_GT_0),
    ("anci", "ance", _M_GT_0),
    ("izer", "ize", _M_GT_0),
    ("abli", "able", _M_GT_0),
    ("alli", "al", _M_GT_0),
    ("ator", "ate", _M_GT_0),
    ("logi", "log", _M_GT_0),
    ("eli", "e", _M_GT_0),
]

_STEP3 = [
    ("icate", "ic", _M_GT_0),
    ("ative", "", _M_GT_0),
    ("alize", "al", _M_GT_0),
    ("iciti", "ic", _M_GT_0),
    ("ical", "ic", _M_GT_0),
    ("ness", "", _M_GT_0),
    ("ful", "", _M_GT_0),
]

_STEP4 = [
    ("ement", "", _M_GT_1),
    ("ance", "", _M_GT_1),
    ("ence", "", _M_GT_1),
    ("able", "", _M_GT_1),
    ("ible", "", _M_GT_1),
    ("ment", "", _M_GT_1),
    ("ion", "", lambda s: _M_GT_1(s) and s[-1:] in ("s", "t")),
    ("ant", "", _M_GT_1),
    ("ent", "", _M_GT_1),
    ("ism", "", _M_GT_1),
    ("ate", "", _M_GT_1),
    ("iti", "", _M_GT_1),
    ("ous", "", _M_GT_1),
    ("ive", "", _M_GT_1),
    ("ize", "", _M_GT_1),
    ("al", "", _M_GT_1),
    ("er", "", _M_GT_1),
    ("ic", "", _M_GT_1),
    ("ou", "", _M_GT_1),
]


def _step1a(word: str) -> str:
    if word.endswith("sses"):
        return word[:-2]
    if word.endswith("ies"):
        return word[:-2]
    if word.endswith("ss"):
        return word
    if word.endswith("s"):
        return word[:-1]
    return word


def _step1b(word: str) -> str:
    if word.endswith("eed"):
        stem = word[:-3]
        return stem + "ee" if _measure(stem) > 0 else word
    removed = False
    if word.endswith("ed"):
        stem = word[:-2]
        if _contains_vowel(stem):
            word, removed = stem, True
    elif word.endswith("ing"):
        stem = word[:-3]
        if _contains_vowel(stem):
            word, removed = stem, True
    if removed:
        if word.endswith(("at", "bl", "iz")):
            word += "e"
        elif _ends_double_consonant(word) and word[-1] not in "lsz":
            word = word[:-1]
        elif _measure(word) == 1 and _ends_cvc(word):
            word += "e"
    return word


def _step1c(word: str) -> str:
    if word.endswith("y") and _contains_vowel(word[:-1]):
        return word[:-1] + "i"
    return word


def _step5a(word: str) -> str:
    if word.endswith("e"):
        stem = word[:-1]
        m = _measure(stem)
        if m > 1 or (m == 1 and not _ends_cvc(stem)):
            return stem
    return word


def _step5b(word: str) -> str:
    if _measure(word) > 1 and _ends_double_consonant(word) and word.endswith("l"):
        return word[:-1]
    return word


def stem(word: str) -> str:
    """Stem a single lowercase word."""
    if len(word) <= 2:
        return word
    word = _step1a(word)
    word = _step1b(word)
    word = _step1c(word)
    word = _apply_first(word, _STEP2)
    word = _apply_first(word, _STEP3)
    word = _apply_first(word, _STEP4)
    word = _step5a(word)
    word = _step5b(word)
    return word
