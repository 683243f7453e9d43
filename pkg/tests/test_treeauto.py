import random

import pytest

from branchgroups.alphabet import Letter, Seed, build_alphabet, marker_perm, random_marker_perm
from branchgroups.perm import Perm, compose, random_even_perm
from branchgroups.resfin import DihedralOracle, IntegerOracle, parse_word
from branchgroups.treeauto import (
    CapExceeded,
    Vertex,
    difference_vertex,
    directed,
    embed_shift,
    equal_to_depth,
    eval_vertex,
    identity_aut,
    invert,
    level_perm,
    nontrivial_vertex,
    portrait,
    portrait_dot,
    portrait_text,
    product,
    root_perm,
    rooted,
    section,
    section_at,
    vertex_at,
    vertex_count,
    wreath_decompose,
)


@pytest.fixture(scope="module")
def zz():
    return IntegerOracle()


@pytest.fixture(scope="module")
def dinf():
    return DihedralOracle()


def rng_seed_elem(oracle, rng, max_len=2):
    g = tuple(rng.randrange(len(oracle.gen_names)) for _ in range(rng.randrange(max_len + 1)))
    return Seed(oracle, g, random_marker_perm(rng))


def rand_token_aut(oracle, rng, level=0):
    lvl = build_alphabet(oracle, level + 1)
    if rng.random() < 0.5:
        return rooted(oracle, level, random_even_perm(lvl.alphabet, rng))
    return directed(oracle, rng_seed_elem(oracle, rng), level)


def rand_word_aut(oracle, rng, level=0, max_tokens=3):
    toks = [rand_token_aut(oracle, rng, level) for _ in range(rng.randrange(1, max_tokens + 1))]
    return product(toks, oracle=oracle, base_level=level)


def vx(oracle, base, *letters):
    return Vertex(base, tuple(letters))


def test_eval_identity(zz):
    v = vx(zz, 0, Letter(1, "x"), Letter(2, "y"))
    assert eval_vertex(identity_aut(zz), v) == v


def test_eval_rooted(zz):
    lvl = build_alphabet(zz, 1)
    sigma = Perm.from_cycles(lvl.alphabet, "(q0@1 q1@1 x@1)")
    a = rooted(zz, 0, sigma)
    v = vx(zz, 0, Letter(1, "coset", 0), Letter(2, "z"))
    out = eval_vertex(a, v)
    assert out.letters[0] == Letter(1, "coset", 1)
    assert out.letters[1] == Letter(2, "z")


def test_eval_directed_two_level_unfold(dinf):
    # below x then y, the grandchild letter moves by the coset action two
    # levels further down
    from branchgroups.alphabet import coset_action

    h = Seed(dinf, parse_word(dinf, "t"))
    a = directed(dinf, h, 0)
    lvl3 = build_alphabet(dinf, 3)
    c = Letter(3, "coset", 0)
    v = vx(dinf, 0, Letter(1, "x"), Letter(2, "y"), c)
    out = eval_vertex(a, v)
    expected = coset_action(dinf, 3, h)(lvl3.letter_index(c))
    assert out.letters[:2] == v.letters[:2]
    assert lvl3.letter_index(out.letters[2]) == expected


def test_directed_stabilizes_level_one(dinf):
    rng = random.Random(3)
    for _ in range(10):
        h = rng_seed_elem(dinf, rng)
        assert root_perm(directed(dinf, h, 0)).is_identity


def test_section_cases(dinf):
    h = Seed(dinf, parse_word(dinf, "t"), marker_perm("(x y z)"))
    a = directed(dinf, h, 0)
    lvl = build_alphabet(dinf, 1)
    xsec = section_at(a, lvl.x_index)
    assert xsec.key() == directed(dinf, h, 1).key()
    ysec = section_at(a, lvl.y_index)
    from branchgroups.alphabet import coset_action

    assert root_perm(ysec) == coset_action(dinf, 2, h)
    csec = section_at(a, 0)
    assert root_perm(csec).is_identity
    # rooted automorphisms have trivial sections below level 1
    sigma = random_even_perm(lvl.alphabet, random.Random(4))
    assert section(rooted(dinf, 0, sigma), vx(dinf, 0, Letter(1, "x"))).key() == identity_aut(dinf, 1).key()


def test_nontrivial_children_match_sections(dinf):
    from branchgroups.treeauto import identity_aut as ident, nontrivial_children

    rng = random.Random(42)
    lvl = build_alphabet(dinf, 1)
    for _ in range(15):
        a = rand_word_aut(dinf, rng, max_tokens=4)
        fast = nontrivial_children(a)
        for idx in range(lvl.size):
            sec = section_at(a, idx)
            if idx in fast:
                assert fast[idx].key() == sec.key()
            else:
                assert sec.key() == identity_aut(dinf, 1).key()


def test_section_formula_random(dinf):
    rng = random.Random(5)
    lvl = build_alphabet(dinf, 1)
    for _ in range(20):
        alpha = rand_word_aut(dinf, rng)
        beta = rand_word_aut(dinf, rng)
        ab = product([alpha, beta])
        for idx in range(lvl.size):
            image = root_perm(beta)(idx)
            lhs = section_at(ab, idx)
            rhs = product([section_at(alpha, image), section_at(beta, idx)],
                          oracle=dinf, base_level=1)
            assert equal_to_depth(lhs, rhs, 4)


def test_deep_sections_satisfy_defining_property(dinf):
    # a(v + w) = a(v) + section(a, v)(w) for paths v of length 2
    rng = random.Random(40)
    lvl2 = build_alphabet(dinf, 2)
    lvl3 = build_alphabet(dinf, 3)
    for _ in range(10):
        a = rand_word_aut(dinf, rng, max_tokens=3)
        v = vx(dinf, 0,
               build_alphabet(dinf, 1).letter_at(rng.randrange(build_alphabet(dinf, 1).size)),
               lvl2.letter_at(rng.randrange(lvl2.size)))
        sec = section(a, v)
        head = eval_vertex(a, v)
        for idx in range(0, lvl3.size, 5):
            tail = Vertex(2, (lvl3.letter_at(idx),))
            whole = Vertex(0, v.letters + tail.letters)
            expected = Vertex(0, head.letters + eval_vertex(sec, tail).letters)
            assert eval_vertex(a, whole) == expected


def test_wreath_decompose_at_higher_base_level(dinf):
    rng = random.Random(41)
    h = rng_seed_elem(dinf, rng)
    a = directed(dinf, h, 2)
    root, children = wreath_decompose(a)
    assert root.is_identity
    lvl = build_alphabet(dinf, 3)
    x3 = lvl.letter_at(lvl.x_index)
    assert children[x3].base_level == 3


def test_directed_is_homomorphism_small(dinf):
    rng = random.Random(6)
    for _ in range(10):
        u = rng_seed_elem(dinf, rng)
        v = rng_seed_elem(dinf, rng)
        lhs = directed(dinf, u.mul(v), 0)
        rhs = product([directed(dinf, u, 0), directed(dinf, v, 0)], oracle=dinf, base_level=0)
        assert equal_to_depth(lhs, rhs, 5)


def test_prefix_preservation(dinf):
    rng = random.Random(7)
    for _ in range(10):
        a = rand_word_aut(dinf, rng)
        v = vx(dinf, 0, Letter(1, "x"), Letter(2, "z"))
        w = v.child(Letter(3, "coset", 1))
        assert eval_vertex(a, w).letters[:2] == eval_vertex(a, v).letters


def test_inverse_roundtrip(dinf):
    rng = random.Random(8)
    for _ in range(10):
        a = rand_word_aut(dinf, rng)
        assert equal_to_depth(product([a, invert(a)]), identity_aut(dinf), 4)


def test_level_perm_examples(zz):
    assert level_perm(identity_aut(zz), 0).alphabet.size == 1
    lvl = build_alphabet(zz, 1)
    sigma = Perm.from_cycles(lvl.alphabet, "(q0@1 q1@1)(p@1 q@1)")
    # the level-1 permutation of a rooted automorphism is its own
    # permutation, letter by letter (alphabets differ only in naming)
    p = level_perm(rooted(zz, 0, sigma), 1)
    for i in range(lvl.size):
        assert p(i) == sigma(i)


def test_level_perm_is_homomorphism(dinf):
    rng = random.Random(9)
    for _ in range(8):
        a = rand_word_aut(dinf, rng)
        b = rand_word_aut(dinf, rng)
        lhs = level_perm(product([a, b]), 2)
        rhs = compose(level_perm(a, 2), level_perm(b, 2))
        assert lhs == rhs


def test_level_perm_matches_eval_vertex(dinf):
    rng = random.Random(10)
    for _ in range(5):
        a = rand_word_aut(dinf, rng)
        p = level_perm(a, 2)
        n = vertex_count(dinf, 0, 2)
        for idx in rng.sample(range(n), 25):
            v = vertex_at(dinf, 0, 2, idx)
            w = eval_vertex(a, v)
            expected = vertex_at(dinf, 0, 2, p(idx))
            assert w == expected


def test_level_perm_cap(dinf):
    a = directed(dinf, Seed(dinf, parse_word(dinf, "t")), 0)
    with pytest.raises(CapExceeded):
        level_perm(a, 3, cap=10)


def test_nontrivial_vertex_witness_is_moved(dinf):
    rng = random.Random(11)
    found = 0
    for _ in range(20):
        a = rand_word_aut(dinf, rng)
        w = nontrivial_vertex(a, 4)
        if w is not None:
            found += 1
            assert eval_vertex(a, w) != w
    assert found > 0


def test_equal_to_depth_detects_difference(dinf):
    h = Seed(dinf, (), marker_perm("(x y z)"))
    a = directed(dinf, h, 0)
    assert not equal_to_depth(a, identity_aut(dinf), 2)
    d = difference_vertex(a, identity_aut(dinf), 2)
    assert d is not None and d.depth == 2
    assert d.letters[0] == Letter(1, "z")


def test_portrait_directed_marker(dinf):
    # the seed with marker (x y z): depth-2 portrait has the 3-cycle at z1
    h = Seed(dinf, (), marker_perm("(x y z)"))
    a = directed(dinf, h, 0)
    p = portrait(a, 2)
    assert p.labels[Vertex(0)].is_identity
    z1 = Vertex(0, (Letter(1, "z"),))
    lvl2 = build_alphabet(dinf, 2)
    assert p.labels[z1] == Perm.from_cycles(lvl2.alphabet, "(x@2 y@2 z@2)")
    x1 = Vertex(0, (Letter(1, "x"),))
    assert p.labels[x1].is_identity


def test_portrait_identity_and_text(zz):
    p = portrait(identity_aut(zz), 2)
    assert all(perm.is_identity for perm in p.labels.values())
    text = portrait_text(p)
    lines = text.splitlines()
    assert lines[0] == "portrait depth=2"
    assert lines[1] == "- ()"
    assert len(lines) == 1 + 1 + build_alphabet(zz, 1).size
    dot = portrait_dot(p)
    assert dot.startswith("digraph portrait {") and dot.endswith("}")


def test_wreath_decompose_roundtrip(dinf):
    rng = random.Random(12)
    for _ in range(6):
        a = rand_word_aut(dinf, rng)
        root, children = wreath_decompose(a)
        shifts = [
            embed_shift(Vertex(0, (letter,)), sec)
            for letter, sec in children.items()
            if not sec.key()[0] == "id"
        ]
        recomposed = product([rooted(dinf, 0, root)] + shifts if not root.is_identity else shifts,
                             oracle=dinf, base_level=0)
        assert equal_to_depth(a, recomposed, 3)


def test_wreath_decompose_directed(dinf):
    h = Seed(dinf, parse_word(dinf, "t"), marker_perm("(x y z)"))
    a = directed(dinf, h, 0)
    root, children = wreath_decompose(a)
    assert root.is_identity
    assert children[Letter(1, "x")].key() == directed(dinf, h, 1).key()
    for letter, sec in children.items():
        if letter.kind == "coset" or letter.kind in ("p", "q"):
            assert sec.key() == identity_aut(dinf, 1).key()


def test_embed_shift(dinf):
    h = Seed(dinf, (), marker_perm("(o p q)"))
    inner = directed(dinf, h, 2)
    v = vx(dinf, 0, Letter(1, "x"), Letter(2, "x"))
    a = embed_shift(v, inner)
    # inside the subtree: acts as inner
    w = v.child(Letter(3, "x"))
    assert eval_vertex(a, w).letters == w.letters
    deep = Vertex(0, v.letters + (Letter(3, "z"), Letter(4, "coset", 0)))
    out = eval_vertex(a, deep)
    assert out.letters[:3] == deep.letters[:3]
    assert out != deep  # marker action moves the identity coset
    # outside: fixed
    other = vx(dinf, 0, Letter(1, "y"), Letter(2, "x"), Letter(3, "x"))
    assert eval_vertex(a, other) == other
    # identity inner collapses
    assert embed_shift(v, identity_aut(dinf, 2)).key() == identity_aut(dinf, 0).key()


def test_embed_shift_level_mismatch(dinf):
    with pytest.raises(ValueError):
        embed_shift(Vertex(0, (Letter(1, "x"),)), identity_aut(dinf, 3))


def test_eval_level_mismatch(dinf):
    with pytest.raises(ValueError):
        eval_vertex(identity_aut(dinf, 1), Vertex(0, (Letter(1, "x"),)))
