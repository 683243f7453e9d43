"""Lazily evaluated automorphisms of the spherically homogeneous trees.

Automorphisms are symbolic expression trees over five node kinds:
identity, rooted (a permutation of the first-level letters), directed (the
recursively defined action of a seed pair), an automorphism shifted into
the subtree below a vertex, and products.  Inverses are normalized away
eagerly by :func:`invert`; directed seeds invert exactly because the seed
assignment is a homomorphism, which the test suite checks.

Nothing is materialized unless asked for: sections, vertex evaluation and
the breadth-first triviality search all run on the expression structure.
Full level permutations are only built on demand, under a hard vertex cap.

A directed automorphism at base level n fixes every first-level letter and
acts below letter d as follows: below x it is the directed automorphism of
the same seed one level down, below y it is the rooted coset action of the
seed at the grandchild level, below z the rooted marker action there, and
below every other letter it is trivial.

Equality of automorphisms is only ever decided relative to a depth
(:func:`equal_to_depth`); absolute equality is intentionally not an
operation of this module.

Expression nodes are immutable; per-node lazies and the per-oracle caches
are filled idempotently, so concurrent evaluation is safe and results do
not depend on scheduling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .alphabet import build_alphabet, coset_action, marker_action
from .perm import IndexedAlphabet, Perm, compose_all

__all__ = [
    "CapExceeded",
    "Vertex",
    "TreeAut",
    "Portrait",
    "DEFAULT_VERTEX_CAP",
    "identity_aut",
    "rooted",
    "directed",
    "product",
    "embed_shift",
    "invert",
    "root_perm",
    "section_at",
    "section",
    "eval_vertex",
    "nontrivial_children",
    "nontrivial_vertex",
    "equal_to_depth",
    "difference_vertex",
    "level_perm",
    "vertex_count",
    "vertex_alphabet",
    "portrait",
    "portrait_text",
    "portrait_dot",
    "wreath_decompose",
    "parse_vertex",
]

DEFAULT_VERTEX_CAP = 2_000_000


class CapExceeded(RuntimeError):
    """A materialization would exceed the vertex cap; use depth-bounded
    checks (equal_to_depth, portraits at small depth) instead."""


@dataclass(frozen=True)
class Vertex:
    """A path in the tree rooted at ``base_level``: the i-th letter lives
    at level ``base_level + 1 + i``.  The empty path is the root."""

    base_level: int
    letters: tuple = ()

    def __post_init__(self):
        for i, letter in enumerate(self.letters):
            if letter.level != self.base_level + 1 + i:
                raise ValueError(
                    f"letter {letter} at position {i} breaks the level run "
                    f"starting at {self.base_level + 1}"
                )

    @property
    def depth(self):
        return len(self.letters)

    def child(self, letter):
        return Vertex(self.base_level, self.letters + (letter,))

    def __str__(self):
        return " ".join(str(l) for l in self.letters) if self.letters else "-"


def parse_vertex(text, base_level=0):
    from .alphabet import parse_letter

    text = text.strip()
    if text in ("", "-"):
        return Vertex(base_level)
    return Vertex(base_level, tuple(parse_letter(tok) for tok in text.split()))


# ---------------------------------------------------------------------------
# expression nodes


class TreeAut:
    __slots__ = ("oracle", "base_level", "_key", "_root")

    def __init__(self, oracle, base_level):
        self.oracle = oracle
        self.base_level = base_level
        self._key = None
        self._root = None

    def key(self):
        if self._key is None:
            self._key = self._make_key()
        return self._key

    def __repr__(self):
        return f"{type(self).__name__}(level={self.base_level})"


class IdentityAut(TreeAut):
    __slots__ = ()

    def _make_key(self):
        return ("id", self.base_level)


class RootedAut(TreeAut):
    __slots__ = ("perm",)

    def __init__(self, oracle, base_level, perm):
        super().__init__(oracle, base_level)
        self.perm = perm

    def _make_key(self):
        return ("rt", self.base_level, self.perm.images.tobytes())


class DirectedAut(TreeAut):
    __slots__ = ("seed",)

    def __init__(self, oracle, base_level, seed):
        super().__init__(oracle, base_level)
        self.seed = seed

    def _make_key(self):
        return ("dir", self.base_level, self.seed.key())


class ShiftedAut(TreeAut):
    __slots__ = ("vertex", "inner")

    def __init__(self, oracle, vertex, inner):
        super().__init__(oracle, vertex.base_level)
        self.vertex = vertex
        self.inner = inner

    def _make_key(self):
        lvl_indices = tuple(
            build_alphabet(self.oracle, l.level).letter_index(l) for l in self.vertex.letters
        )
        return ("sh", self.base_level, lvl_indices, self.inner.key())


class ProductAut(TreeAut):
    __slots__ = ("factors", "_suffix", "_suffix_inv")

    def __init__(self, oracle, base_level, factors):
        super().__init__(oracle, base_level)
        self.factors = tuple(factors)
        self._suffix = None
        self._suffix_inv = None

    def _make_key(self):
        return ("pr", self.base_level, tuple(f.key() for f in self.factors))

    def suffix_images(self):
        """suffix_images()[i] is the first-level image array of the product
        of factors i..end; the last entry is the identity array."""
        if self._suffix is None:
            n = build_alphabet(self.oracle, self.base_level + 1).size
            out = [np.arange(n, dtype=np.int64)]
            for f in reversed(self.factors):
                out.append(root_perm(f).images[out[-1]])
            out.reverse()
            self._suffix = out
        return self._suffix

    def suffix_inverses(self):
        if self._suffix_inv is None:
            inv = []
            for arr in self.suffix_images():
                a = np.empty_like(arr)
                a[arr] = np.arange(len(arr))
                inv.append(a)
            self._suffix_inv = inv
        return self._suffix_inv


# ---------------------------------------------------------------------------
# constructors (normalizing)


def identity_aut(oracle, base_level=0):
    return IdentityAut(oracle, base_level)


def rooted(oracle, base_level, perm):
    """The automorphism permuting first-level letters by ``perm`` and
    fixing everything below."""
    lvl = build_alphabet(oracle, base_level + 1)
    if perm.alphabet != lvl.alphabet:
        raise ValueError(
            f"rooted permutation must act on the level-{base_level + 1} alphabet"
        )
    if perm.is_identity:
        return IdentityAut(oracle, base_level)
    return RootedAut(oracle, base_level, perm)


def directed(oracle, seed, base_level=0):
    """The recursively defined automorphism of a seed pair."""
    if seed.is_identity_native:
        return IdentityAut(oracle, base_level)
    return DirectedAut(oracle, base_level, seed)


def product(factors, oracle=None, base_level=None):
    """Product of automorphisms; the rightmost factor acts first.

    Flattens nested products and drops identity factors; no other
    rewriting happens here."""
    flat = []
    for f in factors:
        if isinstance(f, ProductAut):
            flat.extend(f.factors)
        elif not isinstance(f, IdentityAut):
            flat.append(f)
        if oracle is None:
            oracle, base_level = f.oracle, f.base_level
        elif f.base_level != base_level:
            raise ValueError("product factors must share a base level")
    if oracle is None:
        raise ValueError("empty product needs an explicit oracle and base level")
    if not flat:
        return IdentityAut(oracle, base_level)
    if len(flat) == 1:
        return flat[0]
    return ProductAut(oracle, base_level, flat)


def embed_shift(vertex, inner):
    """The automorphism acting as ``inner`` on the subtree below ``vertex``
    and fixing every vertex outside it."""
    if inner.base_level != vertex.base_level + vertex.depth:
        raise ValueError(
            f"inner automorphism must live at level {vertex.base_level + vertex.depth}"
        )
    if isinstance(inner, IdentityAut):
        return IdentityAut(inner.oracle, vertex.base_level)
    if vertex.depth == 0:
        return inner
    return ShiftedAut(inner.oracle, vertex, inner)


def invert(a):
    """Structural inverse.  Directed nodes invert seed-wise, which is valid
    because the seed assignment is a homomorphism."""
    if isinstance(a, IdentityAut):
        return a
    if isinstance(a, RootedAut):
        return RootedAut(a.oracle, a.base_level, a.perm.inverse())
    if isinstance(a, DirectedAut):
        return DirectedAut(a.oracle, a.base_level, a.seed.inv())
    if isinstance(a, ShiftedAut):
        return ShiftedAut(a.oracle, a.vertex, invert(a.inner))
    if isinstance(a, ProductAut):
        return ProductAut(a.oracle, a.base_level, [invert(f) for f in reversed(a.factors)])
    raise TypeError(f"not a tree automorphism: {a!r}")


# ---------------------------------------------------------------------------
# structure: root permutations, sections, children


def root_perm(a):
    """The permutation induced on first-level letters."""
    if a._root is None:
        lvl = build_alphabet(a.oracle, a.base_level + 1)
        if isinstance(a, (IdentityAut, DirectedAut, ShiftedAut)):
            # directed and shifted automorphisms stabilize the first level
            a._root = Perm.identity(lvl.alphabet)
        elif isinstance(a, RootedAut):
            a._root = a.perm
        elif isinstance(a, ProductAut):
            a._root = compose_all([root_perm(f) for f in a.factors], alphabet=lvl.alphabet)
        else:
            raise TypeError(f"not a tree automorphism: {a!r}")
    return a._root


def _directed_children(a):
    lvl = build_alphabet(a.oracle, a.base_level + 1)
    out = {}
    child = DirectedAut(a.oracle, a.base_level + 1, a.seed)
    out[lvl.x_index] = child
    phi = coset_action(a.oracle, a.base_level + 2, a.seed)
    if not phi.is_identity:
        out[lvl.y_index] = RootedAut(a.oracle, a.base_level + 1, phi)
    psi = marker_action(a.oracle, a.base_level + 2, a.seed)
    if not psi.is_identity:
        out[lvl.z_index] = RootedAut(a.oracle, a.base_level + 1, psi)
    return out


def nontrivial_children(a):
    """Map from first-level letter index to the section there, for exactly
    those letters whose section is not structurally the identity."""
    if isinstance(a, (IdentityAut, RootedAut)):
        return {}
    if isinstance(a, DirectedAut):
        return _directed_children(a)
    if isinstance(a, ShiftedAut):
        first = a.vertex.letters[0]
        idx = build_alphabet(a.oracle, a.base_level + 1).letter_index(first)
        rest = Vertex(a.base_level + 1, a.vertex.letters[1:])
        return {idx: embed_shift(rest, a.inner)}
    if isinstance(a, ProductAut):
        inv = a.suffix_inverses()
        slots = {}
        for i, f in enumerate(a.factors):
            for e, child in nontrivial_children(f).items():
                x = int(inv[i + 1][e])
                slots.setdefault(x, []).append((i, child))
        out = {}
        for x, pieces in slots.items():
            pieces.sort(key=lambda t: t[0])
            out[x] = product([c for _, c in pieces], oracle=a.oracle, base_level=a.base_level + 1)
        return out
    raise TypeError(f"not a tree automorphism: {a!r}")


def section_at(a, letter_index):
    """The section at a single first-level letter, as an automorphism one
    level down.  Satisfies the product rule: the section of a product at x
    is the product of the factor sections at the successive images of x."""
    if isinstance(a, ProductAut):
        suffix = a.suffix_images()
        parts = []
        for i, f in enumerate(a.factors):
            e = int(suffix[i + 1][letter_index])
            parts.append(section_at(f, e))
        return product(parts, oracle=a.oracle, base_level=a.base_level + 1)
    children = nontrivial_children(a)
    got = children.get(letter_index)
    if got is not None:
        return got
    return IdentityAut(a.oracle, a.base_level + 1)


def section(a, vertex):
    """Deep section: fold single-letter sections along the path; the
    section at a composite path is the section of the section."""
    if vertex.base_level != a.base_level:
        raise ValueError("section vertex must start at the automorphism's base level")
    node = a
    for letter in vertex.letters:
        idx = build_alphabet(a.oracle, letter.level).letter_index(letter)
        node = section_at(node, idx)
    return node


# ---------------------------------------------------------------------------
# evaluation


def eval_vertex(a, vertex):
    """Image of a vertex; length and prefix structure are preserved."""
    if vertex.base_level != a.base_level:
        raise ValueError("vertex must start at the automorphism's base level")
    indices = [
        build_alphabet(a.oracle, l.level).letter_index(l) for l in vertex.letters
    ]
    out = _eval_indices(a, indices)
    letters = tuple(
        build_alphabet(a.oracle, a.base_level + 1 + i).letter_at(ix)
        for i, ix in enumerate(out)
    )
    return Vertex(a.base_level, letters)


def _eval_indices(a, indices):
    if not indices:
        return []
    if isinstance(a, IdentityAut):
        return list(indices)
    if isinstance(a, RootedAut):
        return [a.perm(indices[0])] + list(indices[1:])
    if isinstance(a, ProductAut):
        out = list(indices)
        for f in reversed(a.factors):
            out = _eval_indices(f, out)
        return out
    if isinstance(a, DirectedAut):
        first = indices[0]
        child = section_at(a, first)
        return [first] + _eval_indices(child, indices[1:])
    if isinstance(a, ShiftedAut):
        path = [
            build_alphabet(a.oracle, l.level).letter_index(l) for l in a.vertex.letters
        ]
        k = len(path)
        if len(indices) <= k:
            return list(indices)
        if list(indices[:k]) != path:
            return list(indices)
        return path + _eval_indices(a.inner, indices[k:])
    raise TypeError(f"not a tree automorphism: {a!r}")


# ---------------------------------------------------------------------------
# depth-bounded decision procedures


def _first_moved(perm):
    diff = np.nonzero(perm.images != np.arange(perm.alphabet.size))[0]
    return int(diff[0]) if diff.size else None


def nontrivial_vertex(a, depth):
    """A vertex of depth at most ``depth`` moved by ``a``, or None if every
    such vertex is fixed.

    Breadth-first over sections with structural deduplication: two
    vertices whose sections have equal expression keys share their entire
    subtree behavior, so one representative path per key suffices.
    """
    states = {a.key(): (a, ())}
    for d in range(depth):
        nxt = {}
        for node, path in states.values():
            r = root_perm(node)
            moved = _first_moved(r)
            if moved is not None:
                lvl = build_alphabet(a.oracle, a.base_level + d + 1)
                return Vertex(a.base_level, path + (lvl.letter_at(moved),))
            if d + 1 < depth:
                lvl = build_alphabet(a.oracle, a.base_level + d + 1)
                for idx, child in nontrivial_children(node).items():
                    k = child.key()
                    if k not in nxt:
                        nxt[k] = (child, path + (lvl.letter_at(idx),))
        states = nxt
        if not states:
            return None
    return None


def difference_vertex(a, b, depth):
    """A vertex of depth at most ``depth`` where a and b disagree, or None."""
    return nontrivial_vertex(product([invert(b), a]), depth)


def equal_to_depth(a, b, depth):
    return difference_vertex(a, b, depth) is None


# ---------------------------------------------------------------------------
# materialized level permutations


def vertex_count(oracle, base_level, depth):
    n = 1
    for i in range(depth):
        n *= build_alphabet(oracle, base_level + i + 1).size
    return n


def vertex_alphabet(oracle, base_level, depth):
    key = ("vertex_alphabet", base_level, depth)
    got = oracle.cache.get(key)
    if got is None:
        n = vertex_count(oracle, base_level, depth)
        got = oracle.cache.setdefault(
            key, IndexedAlphabet(n, name=f"vertices:{oracle.name}:{base_level}:{depth}")
        )
    return got


def vertex_at(oracle, base_level, depth, index):
    sizes = [build_alphabet(oracle, base_level + i + 1).size for i in range(depth)]
    letters = []
    for i in reversed(range(depth)):
        index, rem = divmod(index, sizes[i])
        letters.append(build_alphabet(oracle, base_level + i + 1).letter_at(rem))
    letters.reverse()
    return Vertex(base_level, tuple(letters))


def level_perm(a, depth, cap=DEFAULT_VERTEX_CAP):
    """The permutation induced on all depth-``depth`` vertices, enumerated
    lexicographically by letter index.  Vectorized; guarded by ``cap``."""
    oracle, base = a.oracle, a.base_level
    total = vertex_count(oracle, base, depth)
    if total > cap:
        raise CapExceeded(
            f"level {depth} has {total} vertices, beyond the cap of {cap}; "
            "use equal_to_depth or portraits instead"
        )
    sizes = [build_alphabet(oracle, base + i + 1).size for i in range(depth)]
    cols = []
    stride = total
    for s in sizes:
        stride //= s
        cols.append((np.arange(total, dtype=np.int64) // stride) % s)
    strides = []
    acc = 1
    for s in reversed(sizes):
        strides.append(acc)
        acc *= s
    strides.reverse()
    cols = _vec_apply(a, cols)
    images = np.zeros(total, dtype=np.int64)
    for c, st in zip(cols, strides):
        images += c * st
    return Perm(vertex_alphabet(oracle, base, depth), images, check=False)


def _vec_apply(a, cols):
    """Apply ``a`` to vertices given as per-level index columns."""
    if not cols or isinstance(a, IdentityAut):
        return cols
    if isinstance(a, RootedAut):
        cols[0] = a.perm.images[cols[0]]
        return cols
    if isinstance(a, ProductAut):
        for f in reversed(a.factors):
            cols = _vec_apply(f, cols)
        return cols
    if isinstance(a, DirectedAut):
        lvl = build_alphabet(a.oracle, a.base_level + 1)
        if len(cols) > 1:
            first = cols[0]
            mask = first == lvl.x_index
            if mask.any():
                sub = [c[mask] for c in cols[1:]]
                sub = _vec_apply(DirectedAut(a.oracle, a.base_level + 1, a.seed), sub)
                for i, s in enumerate(sub):
                    cols[i + 1][mask] = s
            phi = coset_action(a.oracle, a.base_level + 2, a.seed)
            mask = first == lvl.y_index
            if mask.any():
                cols[1][mask] = phi.images[cols[1][mask]]
            psi = marker_action(a.oracle, a.base_level + 2, a.seed)
            mask = first == lvl.z_index
            if mask.any():
                cols[1][mask] = psi.images[cols[1][mask]]
        return cols
    if isinstance(a, ShiftedAut):
        path = [
            build_alphabet(a.oracle, l.level).letter_index(l) for l in a.vertex.letters
        ]
        k = len(path)
        if len(cols) <= k:
            return cols
        mask = cols[0] == path[0]
        for i in range(1, k):
            mask &= cols[i] == path[i]
        if mask.any():
            sub = [c[mask] for c in cols[k:]]
            sub = _vec_apply(a.inner, sub)
            for i, s in enumerate(sub):
                cols[k + i][mask] = s
        return cols
    raise TypeError(f"not a tree automorphism: {a!r}")


# ---------------------------------------------------------------------------
# portraits and the wreath decomposition


def _letter_sort_key(letter):
    # canonical order: cosets by index, then x y z p q
    if letter.kind == "coset":
        return (0, letter.coset)
    return (1, ("x", "y", "z", "p", "q").index(letter.kind))


def _vertex_sort_key(v):
    return (v.depth, tuple(_letter_sort_key(l) for l in v.letters))


class Portrait:
    """Per-vertex first-level permutations down to a depth."""

    def __init__(self, base_level, depth, labels):
        self.base_level = base_level
        self.depth = depth
        self.labels = labels  # Vertex -> Perm

    def label(self, vertex):
        return self.labels[vertex]

    def vertices(self):
        """Internal vertices in lexicographic order, shallow first."""
        return sorted(self.labels, key=_vertex_sort_key)


def portrait(a, depth, cap=DEFAULT_VERTEX_CAP):
    """The portrait of ``a`` down to ``depth``: every vertex above that
    depth is labeled with the first-level permutation of its section."""
    total = 0
    for d in range(depth):
        total += vertex_count(a.oracle, a.base_level, d)
        if total > cap:
            raise CapExceeded(f"portrait would label more than {cap} vertices")
    labels = {}

    def walk(node, path):
        labels[Vertex(a.base_level, path)] = root_perm(node)
        if len(path) + 1 < depth:
            lvl = build_alphabet(a.oracle, a.base_level + len(path) + 1)
            children = nontrivial_children(node)
            ident = IdentityAut(a.oracle, node.base_level + 1)
            for i in range(lvl.size):
                letter = lvl.letter_at(i)
                walk(children.get(i, ident), path + (letter,))

    if depth > 0:
        walk(a, ())
    return Portrait(a.base_level, depth, labels)


def portrait_text(p):
    lines = [f"portrait depth={p.depth}"]
    for v in p.vertices():
        lines.append(f"{v} {p.labels[v]}")
    return "\n".join(lines)


def portrait_dot(p):
    lines = ["digraph portrait {"]
    for v in p.vertices():
        lines.append(f'  "{v}" [label="{p.labels[v]}"];')
    for v in p.vertices():
        if v.depth > 0:
            parent = Vertex(p.base_level, v.letters[:-1])
            lines.append(f'  "{parent}" -> "{v}";')
    lines.append("}")
    return "\n".join(lines)


def wreath_decompose(a):
    """First-level wreath decomposition: the root permutation together
    with the full map from first-level letters to their sections."""
    lvl = build_alphabet(a.oracle, a.base_level + 1)
    children = {}
    for i in range(lvl.size):
        children[lvl.letter_at(i)] = section_at(a, i)
    return root_perm(a), children
