"""Porter suffix-stripping stemmer.

Implements the classic 1980 algorithm as published: steps 1a through 5b,
longest-suffix-match semantics within each rule block, and measure/vowel
conditions evaluated on the stem left after removing the matched suffix.
No post-1980 revisions are included (no LOGI rule, step 2 keeps ABLI->ABLE)
and there is no minimum-length shortcut, so e.g. "ties" -> "ti" just as the
paper specifies.

The only entry point callers need is :func:`porter_stem`.
"""

from __future__ import annotations

from typing import Callable, Sequence

_VOWELS = frozenset("aeiou")

Condition = Callable[[str], bool]
# (suffix, replacement, condition on the stem; None means unconditional)
Rule = tuple[str, str, Condition | None]


def _is_consonant(word: str, i: int) -> bool:
    ch = word[i]
    if ch in _VOWELS:
        return False
    if ch == "y":
        # y is a consonant at the start of a word or after a vowel,
        # and acts as a vowel after a consonant (TOY vs SYZYGY).
        return i == 0 or not _is_consonant(word, i - 1)
    return True


def _measure(stem: str) -> int:
    """Number of vowel-consonant sequences m in [C](VC)^m[V]."""
    m = 0
    prev_vowel = False
    for i in range(len(stem)):
        vowel = not _is_consonant(stem, i)
        if prev_vowel and not vowel:
            m += 1
        prev_vowel = vowel
    return m


def _has_vowel(stem: str) -> bool:
    return any(not _is_consonant(stem, i) for i in range(len(stem)))


def _ends_double_consonant(word: str) -> bool:
    return (
        len(word) >= 2
        and word[-1] == word[-2]
        and _is_consonant(word, len(word) - 1)
    )


def _ends_cvc(word: str) -> bool:
    """consonant-vowel-consonant ending where the final consonant is not w, x or y."""
    if len(word) < 3:
        return False
    n = len(word)
    return (
        _is_consonant(word, n - 3)
        and not _is_consonant(word, n - 2)
        and _is_consonant(word, n - 1)
        and word[-1] not in "wxy"
    )


def _m_gt_0(stem: str) -> bool:
    return _measure(stem) > 0


def _m_gt_1(stem: str) -> bool:
    return _measure(stem) > 1


def _apply_block(word: str, rules: Sequence[Rule]) -> tuple[str, bool]:
    """Apply one rule block with longest-match semantics.

    The rule whose suffix is the longest match is the only one considered;
    if its condition fails the block still counts as consumed and the word
    is returned unchanged.  Returns (new_word, rule_fired).
    """
    best: Rule | None = None
    for rule in rules:
        suffix = rule[0]
        if word.endswith(suffix) and (best is None or len(suffix) > len(best[0])):
            best = rule
    if best is None:
        return word, False
    suffix, replacement, condition = best
    stem = word[: len(word) - len(suffix)]
    if condition is None or condition(stem):
        return stem + replacement, True
    return word, False


_STEP_1A: tuple[Rule, ...] = (
    ("sses", "ss", None),
    ("ies", "i", None),
    ("ss", "ss", None),
    ("s", "", None),
)

_STEP_2: tuple[Rule, ...] = (
    ("ational", "ate", _m_gt_0),
    ("tional", "tion", _m_gt_0),
    ("enci", "ence", _m_gt_0),
    ("anci", "ance", _m_gt_0),
    ("izer", "ize", _m_gt_0),
    ("abli", "able", _m_gt_0),
    ("alli", "al", _m_gt_0),
    ("entli", "ent", _m_gt_0),
    ("eli", "e", _m_gt_0),
    ("ousli", "ous", _m_gt_0),
    ("ization", "ize", _m_gt_0),
    ("ation", "ate", _m_gt_0),
    ("ator", "ate", _m_gt_0),
    ("alism", "al", _m_gt_0),
    ("iveness", "ive", _m_gt_0),
    ("fulness", "ful", _m_gt_0),
    ("ousness", "ous", _m_gt_0),
    ("aliti", "al", _m_gt_0),
    ("iviti", "ive", _m_gt_0),
    ("biliti", "ble", _m_gt_0),
)

_STEP_3: tuple[Rule, ...] = (
    ("icate", "ic", _m_gt_0),
    ("ative", "", _m_gt_0),
    ("alize", "al", _m_gt_0),
    ("iciti", "ic", _m_gt_0),
    ("ical", "ic", _m_gt_0),
    ("ful", "", _m_gt_0),
    ("ness", "", _m_gt_0),
)


def _ion_condition(stem: str) -> bool:
    return _m_gt_1(stem) and stem[-1:] in ("s", "t")


_STEP_4: tuple[Rule, ...] = (
    ("al", "", _m_gt_1),
    ("ance", "", _m_gt_1),
    ("ence", "", _m_gt_1),
    ("er", "", _m_gt_1),
    ("ic", "", _m_gt_1),
    ("able", "", _m_gt_1),
    ("ible", "", _m_gt_1),
    ("ant", "", _m_gt_1),
    ("ement", "", _m_gt_1),
    ("ment", "", _m_gt_1),
    ("ent", "", _m_gt_1),
    ("ion", "", _ion_condition),
    ("ou", "", _m_gt_1),
    ("ism", "", _m_gt_1),
    ("ate", "", _m_gt_1),
    ("iti", "", _m_gt_1),
    ("ous", "", _m_gt_1),
    ("ive", "", _m_gt_1),
    ("ize", "", _m_gt_1),
)


def _step_1b(word: str) -> str:
    rules: tuple[Rule, ...] = (
        ("eed", "ee", _m_gt_0),
        ("ed", "", _has_vowel),
        ("ing", "", _has_vowel),
    )
    best: Rule | None = None
    for rule in rules:
        if word.endswith(rule[0]) and (best is None or len(rule[0]) > len(best[0])):
            best = rule
    if best is None:
        return word
    suffix, replacement, condition = best
    stem = word[: len(word) - len(suffix)]
    if condition is not None and not condition(stem):
        return word
    word = stem + replacement
    if suffix == "eed":
        return word
    # Cleanup after a bare ed/ing removal.
    if word.endswith(("at", "bl", "iz")):
        return word + "e"
    if _ends_double_consonant(word) and word[-1] not in "lsz":
        return word[:-1]
    if _measure(word) == 1 and _ends_cvc(word):
        return word + "e"
    return word


def _step_1c(word: str) -> str:
    if word.endswith("y") and _has_vowel(word[:-1]):
        return word[:-1] + "i"
    return word


def _step_5a(word: str) -> str:
    if not word.endswith("e"):
        return word
    stem = word[:-1]
    m = _measure(stem)
    if m > 1 or (m == 1 and not _ends_cvc(stem)):
        return stem
    return word


def _step_5b(word: str) -> str:
    if word.endswith("l") and _ends_double_consonant(word) and _measure(word) > 1:
        return word[:-1]
    return word


def porter_stem(word: str) -> str:
    """Stem one lowercase alphabetic word.

    The caller is expected to pass lowercase ASCII letters only; anything
    else is returned unchanged rather than guessed at.
    """
    if not word or not word.isascii() or not word.isalpha():
        return word
    word, _ = _apply_block(word, _STEP_1A)
    word = _step_1b(word)
    word = _step_1c(word)
    word, _ = _apply_block(word, _STEP_2)
    word, _ = _apply_block(word, _STEP_3)
    word, _ = _apply_block(word, _STEP_4)
    word = _step_5a(word)
    word = _step_5b(word)
    return word
