"""Small concrete algebras used by tests, scripts, and documentation examples."""

from __future__ import annotations

import random
from itertools import product

from .algebras import FiniteAlgebra, Operation, make_operation


def pair_selector_algebra() -> FiniteAlgebra:
    """Four elements seen as bit pairs; d(x, y) keeps x's high bit and y's low bit.

    d is idempotent, depends on both arguments, and satisfies the 2x2
    composition law, so it decomposes {0..3} as a product of two 2-element
    factors.
    """
    d = make_operation("d", 2, 4, lambda x, y: 2 * (x // 2) + (y % 2))
    return FiniteAlgebra(4, (d,))


def bit_selector_algebra() -> FiniteAlgebra:
    """Eight elements seen as bit triples; t(x, y, z) collects the high bits.

    t returns the element whose bits are (x's high bit, y's high bit, z's high
    bit).  It depends on all three arguments but is not idempotent, so the
    only idempotent term is the identity.
    """
    t = make_operation(
        "t", 3, 8, lambda x, y, z: 4 * (x // 4) + 2 * (y // 4) + (z // 4)
    )
    return FiniteAlgebra(8, (t,))


def meet_semilattice() -> FiniteAlgebra:
    """The two-element meet semilattice: not abelian, the standard failure case."""
    m = make_operation("m", 2, 2, min)
    return FiniteAlgebra(2, (m,))


def one_element_algebra() -> FiniteAlgebra:
    return FiniteAlgebra(1, (Operation("c", 1, (0,)),))


# ---------------------------------------------------------------------------
# Random tuple-selector algebras.
#
# The universe is a product of factor sets; every basic operation fills each
# output coordinate from one coordinate of one argument (sizes matching).
# Such operations are rectangular by construction, so the whole-universe
# congruence is always strongly abelian.


def encode_tuple(coords, factors) -> int:
    value = 0
    for c, f in zip(coords, factors):
        value = value * f + c
    return value


def decode_tuple(value: int, factors) -> tuple:
    coords = []
    for f in reversed(factors):
        coords.append(value % f)
        value //= f
    return tuple(reversed(coords))


def tuple_selector_operation(name, factors, arity, sources) -> Operation:
    """Selector op: output coordinate j copies coordinate c of argument a.

    sources is a list of (argument index, coordinate index) pairs, one per
    output coordinate, with matching factor sizes.
    """
    size = 1
    for f in factors:
        size *= f
    for j, (a, c) in enumerate(sources):
        if factors[c] != factors[j]:
            raise ValueError("selector source size mismatch")
        if not (0 <= a < arity):
            raise ValueError("selector argument out of range")

    def fn(*args):
        coords = [decode_tuple(v, factors) for v in args]
        return encode_tuple([coords[a][c] for (a, c) in sources], factors)

    return make_operation(name, arity, size, fn)


def random_selector_algebra(rng: random.Random) -> FiniteAlgebra:
    """A random tuple-selector algebra on at most 8 elements."""
    factors = rng.choice([(2,), (4,), (2, 2), (2, 4), (2, 2, 2)])
    size = 1
    for f in factors:
        size *= f
    n_ops = rng.randint(1, 3)
    ops = []
    for k in range(n_ops):
        arity = rng.randint(1, 3)
        sources = []
        for j, f in enumerate(factors):
            candidates = [c for c, g in enumerate(factors) if g == f]
            sources.append((rng.randrange(arity), rng.choice(candidates)))
        ops.append(tuple_selector_operation(f"f{k}", factors, arity, sources))
    return FiniteAlgebra(size, tuple(ops))


def random_binary_algebra(rng: random.Random, size: int) -> FiniteAlgebra:
    """An algebra with one uniformly random binary operation."""
    table = tuple(rng.randrange(size) for _ in range(size * size))
    return FiniteAlgebra(size, (Operation("f", 2, table),))


def all_binary_algebras(size: int):
    """Every algebra with a single binary operation on the given universe."""
    cells = size * size
    for table in product(range(size), repeat=cells):
        yield FiniteAlgebra(size, (Operation("f", 2, table),))
