"""Level alphabets and the letter actions that drive the tree construction.

The alphabet at level n consists of the level-n quotient of the input
group (cosets, in their canonical enumeration order) followed by five
fresh letters x, y, z, p, q.  Two commuting actions permute the letters:

* the coset action of the input group: left multiplication on the coset
  block, extended to an even permutation by swapping p and q exactly when
  left multiplication is odd; the letters x, y, z are always fixed;
* the marker action of the even permutation group on the six symbols
  x, y, z, o, p, q, where o stands for the identity coset.

Both actions land in the even permutations of the alphabet.  A
:class:`Seed` bundles one input-group element with one marker permutation;
seeds generate the directed tree automorphisms in
:mod:`branchgroups.treeauto`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .perm import IndexedAlphabet, Perm, compose
from .resfin import build_level_map, word_inverse

__all__ = [
    "MARKERS",
    "MARKER_ALPHABET",
    "Letter",
    "AlphabetLevel",
    "Seed",
    "build_alphabet",
    "coset_action",
    "marker_action",
    "marker_perm",
    "parse_letter",
    "random_marker_perm",
]

MARKERS = ("x", "y", "z", "o", "p", "q")
MARKER_ALPHABET = IndexedAlphabet(6, labels=MARKERS, name="markers")

_SPECIALS = ("x", "y", "z", "p", "q")


@dataclass(frozen=True)
class Letter:
    """One symbol of a level alphabet: a coset index or a special letter.

    Letters at distinct levels are distinct values; the level is part of
    the identity.
    """

    level: int
    kind: str  # "coset", "x", "y", "z", "p" or "q"
    coset: int | None = None

    def __post_init__(self):
        if self.kind == "coset":
            if self.coset is None or self.coset < 0:
                raise ValueError("coset letter needs a nonnegative index")
        elif self.kind not in _SPECIALS:
            raise ValueError(f"unknown letter kind {self.kind!r}")

    def __str__(self):
        if self.kind == "coset":
            return f"q{self.coset}@{self.level}"
        return f"{self.kind}@{self.level}"


def parse_letter(text):
    """Parse a letter literal: ``q<i>@<n>`` for cosets, ``x@<n>`` etc."""
    if "@" not in text:
        raise ValueError(f"letter literal {text!r} lacks a level suffix")
    head, _, lvl = text.partition("@")
    level = int(lvl)
    if head in _SPECIALS:
        return Letter(level, head)
    if head.startswith("q") and head[1:].isdigit():
        return Letter(level, "coset", int(head[1:]))
    raise ValueError(f"cannot parse letter literal {text!r}")


class AlphabetLevel:
    """The alphabet at one level: quotient cosets first, then x y z p q."""

    def __init__(self, oracle, level, quotient):
        self.oracle = oracle
        self.level = level
        self.quotient = quotient
        self.size = quotient.order + 5
        labels = [f"q{i}@{level}" for i in range(quotient.order)]
        labels += [f"{s}@{level}" for s in _SPECIALS]
        self.alphabet = IndexedAlphabet(self.size, labels=labels, name=f"letters:{oracle.name}:{level}")
        base = quotient.order
        self.x_index = base
        self.y_index = base + 1
        self.z_index = base + 2
        self.p_index = base + 3
        self.q_index = base + 4

    def letter_index(self, letter):
        if letter.level != self.level:
            raise ValueError(f"letter {letter} does not belong to level {self.level}")
        if letter.kind == "coset":
            if letter.coset >= self.quotient.order:
                raise ValueError(f"coset index {letter.coset} out of range at level {self.level}")
            return letter.coset
        return self.quotient.order + _SPECIALS.index(letter.kind)

    def letter_at(self, index):
        if index < self.quotient.order:
            return Letter(self.level, "coset", index)
        return Letter(self.level, _SPECIALS[index - self.quotient.order])

    def __repr__(self):
        return f"AlphabetLevel({self.oracle.name}, n={self.level}, size={self.size})"


def build_alphabet(oracle, n):
    """The level-n alphabet; the quotient comes from the level-n chain map.

    Cached per oracle and level, so letter indices are stable across a run.
    """
    if n < 1:
        raise ValueError("alphabet level must be at least 1")
    got = oracle.cache.get(("alphabet", n))
    if got is None:
        quotient = build_level_map(oracle, n).quotient
        got = oracle.cache.setdefault(("alphabet", n), AlphabetLevel(oracle, n, quotient))
    return got


def marker_perm(cycles_text):
    """An even permutation of the six marker symbols, from cycle notation."""
    p = Perm.from_cycles(MARKER_ALPHABET, cycles_text)
    if p.sign != 1:
        raise ValueError("marker permutations must be even")
    return p


def random_marker_perm(rng):
    from .perm import random_even_perm

    return random_even_perm(MARKER_ALPHABET, rng)


class Seed:
    """A pair (input-group word, even marker permutation).

    Seeds are the elements whose recursively defined tree actions generate
    the directed part of the branch groups.  The group word is kept as a
    word; multiplication concatenates, and triviality of the group part is
    delegated to a word-problem decider.
    """

    __slots__ = ("oracle", "g", "marker", "_key")

    def __init__(self, oracle, g=(), marker=None):
        if marker is None:
            marker = Perm.identity(MARKER_ALPHABET)
        if marker.alphabet != MARKER_ALPHABET:
            raise ValueError("marker part must permute the six marker symbols")
        if marker.sign != 1:
            raise ValueError("marker part must be even")
        self.oracle = oracle
        self.g = tuple(g)
        self.marker = marker
        self._key = None

    def mul(self, other):
        if other.oracle is not self.oracle:
            raise ValueError("seeds belong to different input groups")
        return Seed(self.oracle, self.g + other.g, compose(self.marker, other.marker))

    def inv(self):
        return Seed(self.oracle, word_inverse(self.oracle, self.g), self.marker.inverse())

    def conjugate_by(self, other):
        """``other.inv() * self * other``."""
        return other.inv().mul(self).mul(other)

    def commutator(self, other):
        """``self^-1 other^-1 self other``."""
        return self.inv().mul(other.inv()).mul(self).mul(other)

    @property
    def is_identity_native(self):
        """Triviality via the oracle's own normal form (cheap, total)."""
        return self.oracle.is_identity(self.g) and self.marker.is_identity

    def key(self):
        if self._key is None:
            self._key = (self.oracle.element_key(self.g), self.marker.images.tobytes())
        return self._key

    def __eq__(self, other):
        if not isinstance(other, Seed):
            return NotImplemented
        return self.oracle is other.oracle and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        from .resfin import format_word

        return f"Seed({format_word(self.oracle, self.g)!r}, {self.marker})"


def identity_seed(oracle):
    return Seed(oracle)


def coset_action(oracle, n, seed):
    """The input-group part of a seed acting on the level-n alphabet.

    Cosets move by left multiplication; x, y, z stay fixed; p and q swap
    exactly when left multiplication is an odd permutation of the cosets,
    which makes the result even.  Cached per level and group element.
    """
    level = build_alphabet(oracle, n)
    gkey = oracle.element_key(seed.g) if isinstance(seed, Seed) else oracle.element_key(seed)
    word = seed.g if isinstance(seed, Seed) else tuple(seed)
    cache_key = ("coset_action", n, gkey)
    got = oracle.cache.get(cache_key)
    if got is not None:
        return got
    quotient = level.quotient
    img = quotient.apply_word(word)
    images = np.arange(level.size, dtype=np.int64)
    images[: quotient.order] = quotient.left_mult_images(img)
    coset_part = Perm(IndexedAlphabet(quotient.order, name=f"cosets:{oracle.name}:{n}"),
                      images[: quotient.order].copy(), check=False)
    if coset_part.sign == -1:
        images[level.p_index] = level.q_index
        images[level.q_index] = level.p_index
    p = Perm(level.alphabet, images, check=False)
    return oracle.cache.setdefault(cache_key, p)


def marker_action(oracle, n, seed):
    """The marker part of a seed acting on the level-n alphabet.

    Each tracked symbol s moves to the image symbol at the same level,
    with o standing for the identity coset; all other cosets are fixed.
    """
    level = build_alphabet(oracle, n)
    marker = seed.marker if isinstance(seed, Seed) else seed
    cache_key = ("marker_action", n, marker.images.tobytes())
    got = oracle.cache.get(cache_key)
    if got is not None:
        return got
    spots = [level.x_index, level.y_index, level.z_index, 0, level.p_index, level.q_index]
    images = np.arange(level.size, dtype=np.int64)
    for sym in range(6):
        images[spots[sym]] = spots[marker(sym)]
    p = Perm(level.alphabet, images, check=False)
    return oracle.cache.setdefault(cache_key, p)
