"""Exact permutations of finite indexed alphabets.

Composition convention, fixed once for the whole package:
``compose(p, q)`` is the map ``i -> p(q(i))``, i.e. apply ``q`` first and
then ``p``.  Every other module (tree automorphisms, word calculus, the
CLI) uses this convention.
"""

from __future__ import annotations

import math
import re

import numpy as np

__all__ = [
    "IndexedAlphabet",
    "Perm",
    "PreconditionError",
    "compose",
    "compose_all",
    "random_even_perm",
    "check_alternating_generation",
]


class PreconditionError(ValueError):
    """A documented precondition was violated; the message names the clause."""


class IndexedAlphabet:
    """An ordered finite alphabet.

    Permutations act on the index range ``0..size-1``.  Labels exist for
    parsing and printing only.  An alphabet may be constructed without
    explicit labels, in which case decimal strings are used; such
    alphabets compare equal by ``(name, size)``.
    """

    __slots__ = ("size", "_labels", "name", "_index")

    def __init__(self, size, labels=None, name=None):
        if size < 1:
            raise ValueError("alphabet size must be positive")
        if labels is not None:
            labels = tuple(str(x) for x in labels)
            if len(labels) != size:
                raise ValueError("label count does not match alphabet size")
            if len(set(labels)) != size:
                raise ValueError("labels must be pairwise distinct")
        self.size = size
        self._labels = labels
        self.name = name
        self._index = None

    def label(self, i):
        if not 0 <= i < self.size:
            raise IndexError(f"letter index {i} out of range")
        if self._labels is None:
            return str(i)
        return self._labels[i]

    @property
    def labels(self):
        if self._labels is None:
            return tuple(str(i) for i in range(self.size))
        return self._labels

    def index(self, label):
        if self._labels is None:
            i = int(label)
            if not 0 <= i < self.size:
                raise KeyError(label)
            return i
        if self._index is None:
            self._index = {s: i for i, s in enumerate(self._labels)}
        try:
            return self._index[label]
        except KeyError:
            raise KeyError(f"unknown letter {label!r}") from None

    def _key(self):
        if self._labels is not None:
            return ("labels", self._labels)
        return ("anon", self.name, self.size)

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, IndexedAlphabet):
            return NotImplemented
        return self.size == other.size and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def __repr__(self):
        if self.name:
            return f"IndexedAlphabet({self.size}, name={self.name!r})"
        return f"IndexedAlphabet({self.size})"


_CYCLE_RE = re.compile(r"\(([^()]*)\)")


class Perm:
    """A bijection of an :class:`IndexedAlphabet`, stored as an image array.

    Immutable value type: safe to share between threads, usable as a dict
    key.  ``images[i]`` is the image of letter ``i``.
    """

    __slots__ = ("alphabet", "images", "_hash")

    def __init__(self, alphabet, images, check=True):
        arr = np.asarray(images, dtype=np.int64)
        if arr.shape != (alphabet.size,):
            raise ValueError("image array does not match alphabet size")
        if check:
            counts = np.bincount(arr, minlength=alphabet.size)
            if arr.min(initial=0) < 0 or not (counts == 1).all():
                raise ValueError("images do not form a bijection")
        arr.setflags(write=False)
        self.alphabet = alphabet
        self.images = arr
        self._hash = None

    @classmethod
    def identity(cls, alphabet):
        return cls(alphabet, np.arange(alphabet.size, dtype=np.int64), check=False)

    @classmethod
    def from_cycles(cls, alphabet, text):
        """Parse cycle notation like ``(a b c)(d e)`` over label names.

        ``()`` and the empty string denote the identity.  Cycles must be
        disjoint.
        """
        stripped = text.strip()
        images = np.arange(alphabet.size, dtype=np.int64)
        seen = set()
        for m in _CYCLE_RE.finditer(stripped):
            body = m.group(1).split()
            if not body:
                continue
            idx = [alphabet.index(s) for s in body]
            if len(set(idx)) != len(idx) or seen.intersection(idx):
                raise ValueError(f"cycles are not disjoint in {text!r}")
            seen.update(idx)
            for a, b in zip(idx, idx[1:] + idx[:1]):
                images[a] = b
        rest = _CYCLE_RE.sub("", stripped).strip()
        if rest:
            raise ValueError(f"unexpected text {rest!r} in cycle notation")
        return cls(alphabet, images, check=False)

    def __call__(self, i):
        return int(self.images[i])

    @property
    def is_identity(self):
        return bool((self.images == np.arange(self.alphabet.size)).all())

    def inverse(self):
        inv = np.empty(self.alphabet.size, dtype=np.int64)
        inv[self.images] = np.arange(self.alphabet.size)
        return Perm(self.alphabet, inv, check=False)

    def cycles(self):
        """Nontrivial cycles as index tuples, each starting at its least
        element, ordered by that element."""
        n = self.alphabet.size
        seen = np.zeros(n, dtype=bool)
        out = []
        for i in range(n):
            if seen[i] or self.images[i] == i:
                continue
            cyc = [i]
            seen[i] = True
            j = int(self.images[i])
            while j != i:
                seen[j] = True
                cyc.append(j)
                j = int(self.images[j])
            out.append(tuple(cyc))
        return out

    def cycle_type(self):
        """Sorted multiset of cycle lengths, fixed points included."""
        lengths = _cycle_lengths(self.images)
        return tuple(int(x) for x in sorted(lengths))

    @property
    def sign(self):
        """+1 for even permutations, -1 for odd ones.

        Computed from the cycle decomposition: parity of
        ``size - number_of_cycles``.
        """
        n = self.alphabet.size
        ncycles = len(_cycle_lengths(self.images))
        return 1 if (n - ncycles) % 2 == 0 else -1

    def __eq__(self, other):
        if not isinstance(other, Perm):
            return NotImplemented
        return self.alphabet == other.alphabet and np.array_equal(self.images, other.images)

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.alphabet.size, self.images.tobytes()))
        return self._hash

    def __str__(self):
        cyc = self.cycles()
        if not cyc:
            return "()"
        return "".join("(" + " ".join(self.alphabet.label(i) for i in c) + ")" for c in cyc)

    def __repr__(self):
        return f"Perm({self})"


def _cycle_lengths(images):
    """Cycle lengths of an image array, via path-doubling minimum labels."""
    n = len(images)
    rep = np.arange(n, dtype=np.int64)
    power = np.asarray(images, dtype=np.int64)
    span = 1
    while span < n:
        rep = np.minimum(rep, rep[power])
        power = power[power]
        span *= 2
    _, counts = np.unique(rep, return_counts=True)
    return counts


def compose(p, q):
    """The product ``p o q``: apply ``q`` first, then ``p``."""
    if p.alphabet != q.alphabet:
        raise ValueError("cannot compose permutations of different alphabets")
    return Perm(p.alphabet, p.images[q.images], check=False)


def compose_all(perms, alphabet=None):
    """Compose left to right: ``compose_all([a, b, c]) = a o b o c``.

    The rightmost factor acts first, matching the convention above.
    """
    perms = list(perms)
    if not perms:
        if alphabet is None:
            raise ValueError("empty product needs an explicit alphabet")
        return Perm.identity(alphabet)
    acc = perms[-1]
    for p in reversed(perms[:-1]):
        acc = compose(p, acc)
    return acc


def random_even_perm(alphabet, rng):
    """Uniform-ish even permutation: shuffle, then fix parity by one swap."""
    n = alphabet.size
    img = list(range(n))
    rng.shuffle(img)
    p = Perm(alphabet, img, check=False)
    if p.sign == -1:
        img[0], img[1] = img[1], img[0]
        p = Perm(alphabet, img, check=False)
    return p


def _radix_keys(rows):
    n = rows.shape[1]
    powers = (np.int64(n) + 1) ** np.arange(n, dtype=np.int64)
    return rows @ powers


def _mulclose_rows(gen_rows, cap):
    """Closure of row-encoded permutations under composition, via BFS.

    ``gen_rows`` is a 2d int array, one permutation per row.  Returns the
    closure as a 2d array.  Raises if the closure exceeds ``cap``.
    """
    n = gen_rows.shape[1]
    identity = np.arange(n, dtype=np.int64)
    elems = [identity[None, :]]
    known = {int(k) for k in _radix_keys(identity[None, :])}
    gens = np.asarray(gen_rows, dtype=np.int64)
    frontier = identity[None, :]
    while frontier.size:
        # products[f, g] = frontier[f] o gens[g], i.e. i -> frontier[f][gens[g][i]]
        products = frontier[:, gens].reshape(-1, n)
        keys = _radix_keys(products)
        fresh = []
        for row, key in zip(products, keys):
            k = int(key)
            if k not in known:
                known.add(k)
                fresh.append(row)
        if not fresh:
            break
        if len(known) > cap:
            raise PreconditionError(f"closure exceeded cap of {cap} elements")
        frontier = np.array(fresh, dtype=np.int64)
        elems.append(frontier)
    return np.concatenate(elems, axis=0)


def _orbit(gen_rows, start):
    seen = {start}
    queue = [start]
    while queue:
        x = queue.pop()
        for g in gen_rows:
            y = int(g[x])
            if y not in seen:
                seen.add(y)
                queue.append(y)
    return seen


def check_alternating_generation(omega, a_sub, b_sub, g_gens, max_size=10):
    """Test whether the conjugates of the even group on ``a_sub`` under the
    group generated by ``g_gens`` generate the full even group on ``omega``.

    Preconditions (checked, reported by clause):
      (1) omega is the union of a_sub and b_sub;
      (2) a_sub and b_sub intersect in exactly one point;
      (3) ``|a_sub| >= 3``;
      (4) every generator is an even permutation of omega;
      (5) at least two points of ``a_sub`` minus the intersection point are
          fixed by all generators;
      (6) the group generated by ``g_gens`` moves the intersection point
          onto all of b_sub.

    The closure is materialized, so ``omega`` is guarded to at most
    ``max_size`` points.
    """
    a_set = frozenset(a_sub)
    b_set = frozenset(b_sub)
    n = omega.size
    if n > max_size:
        raise PreconditionError(f"alphabet too large for closure enumeration (size {n} > {max_size})")
    if a_set | b_set != frozenset(range(n)):
        raise PreconditionError("violated clause (1): omega must equal the union of the two subsets")
    meet = a_set & b_set
    if len(meet) != 1:
        raise PreconditionError("violated clause (2): subsets must intersect in exactly one point")
    (w,) = meet
    if len(a_set) < 3:
        raise PreconditionError("violated clause (3): |A| >= 3 required")
    gen_rows = []
    for g in g_gens:
        if g.alphabet != omega:
            raise PreconditionError("generator acts on a different alphabet")
        if g.sign != 1:
            raise PreconditionError("violated clause (4): generators must be even")
        gen_rows.append(np.asarray(g.images, dtype=np.int64))
    fixed = [x for x in sorted(a_set - {w}) if all(int(r[x]) == x for r in gen_rows)]
    if len(fixed) < 2:
        raise PreconditionError("violated clause (5): need two common fixed points in A minus the meet")
    orbit = _orbit(gen_rows, w) if gen_rows else {w}
    if not b_set <= orbit:
        raise PreconditionError("violated clause (6): generated group is not transitive on B")

    # Seed: all 3-cycles inside a_sub, then close under conjugation by the
    # generators (and inverses) to collect every reachable conjugate.
    a_list = sorted(a_set)
    seeds = []
    for i in range(len(a_list)):
        for j in range(i + 1, len(a_list)):
            for k in range(j + 1, len(a_list)):
                for x, y, z in ((a_list[i], a_list[j], a_list[k]), (a_list[i], a_list[k], a_list[j])):
                    img = np.arange(n, dtype=np.int64)
                    img[x], img[y], img[z] = y, z, x
                    seeds.append(img)
    conj_rows = []
    for g in gen_rows:
        inv = np.empty(n, dtype=np.int64)
        inv[g] = np.arange(n)
        conj_rows.append((np.asarray(g), inv))
    pool = {row.tobytes(): row for row in seeds}
    frontier = list(pool.values())
    while frontier:
        new = []
        for row in frontier:
            for g, ginv in conj_rows:
                conj = ginv[row[g]]  # i -> g^-1(row(g(i))), the conjugate row^g
                key = conj.tobytes()
                if key not in pool:
                    pool[key] = conj
                    new.append(conj)
        frontier = new
    gens_arr = np.array(list(pool.values()), dtype=np.int64)
    closure = _mulclose_rows(gens_arr, cap=math.factorial(max_size))
    return closure.shape[0] == math.factorial(n) // 2
