"""Finite algebras as operation tables: terms, clones, essential variables, subpowers.

Universe elements are dense integers 0..size-1.  An operation table of arity m
is a flat tuple of length size**m in row-major (lexicographic argument tuple)
order.  All structures here are immutable after construction, so any function
in this module may be called concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Iterable, Iterator, Optional

import numpy as np

from .errors import (
    ArityMismatch,
    ResourceLimit,
    UnassignedVariable,
    UnknownOp,
)

DEFAULT_MAX_TABLES = 10**6
DEFAULT_MAX_ELEMENTS = 10**6


@dataclass(frozen=True)
class Operation:
    name: str
    arity: int
    table: tuple

    def __post_init__(self):
        if self.arity < 0:
            raise ArityMismatch(f"operation {self.name} has negative arity")
        object.__setattr__(self, "table", tuple(int(v) for v in self.table))


@dataclass(frozen=True)
class FiniteAlgebra:
    size: int
    ops: tuple

    def __post_init__(self):
        if self.size < 1:
            raise ValueError("algebra size must be positive")
        object.__setattr__(self, "ops", tuple(self.ops))
        names = [op.name for op in self.ops]
        if len(set(names)) != len(names):
            raise ValueError("operation names must be unique")
        for op in self.ops:
            if len(op.table) != self.size**op.arity:
                raise ArityMismatch(
                    f"operation {op.name}: table has {len(op.table)} entries, "
                    f"expected {self.size ** op.arity}"
                )
            if any(not (0 <= v < self.size) for v in op.table):
                raise ValueError(f"operation {op.name}: table entry out of range")
        object.__setattr__(self, "_by_name", {op.name: op for op in self.ops})
        object.__setattr__(self, "_arrays", {})

    def op(self, name: str) -> Operation:
        try:
            return self._by_name[name]
        except KeyError:
            raise UnknownOp(f"no operation named {name!r}") from None

    def op_array(self, name: str) -> np.ndarray:
        """Operation table as an ndarray of shape (size,)*arity (cached)."""
        arr = self._arrays.get(name)
        if arr is None:
            op = self.op(name)
            arr = np.array(op.table, dtype=np.int64).reshape((self.size,) * op.arity)
            arr.setflags(write=False)
            self._arrays[name] = arr
        return arr

    def max_arity(self) -> int:
        return max((op.arity for op in self.ops), default=0)


def make_operation(name: str, arity: int, size: int, fn) -> Operation:
    """Tabulate fn over all argument tuples of the given arity."""
    table = tuple(fn(*args) for args in product(range(size), repeat=arity))
    return Operation(name, arity, table)


# ---------------------------------------------------------------------------
# Terms


@dataclass(frozen=True)
class Term:
    """Either a variable (op is None, index set) or an application."""

    op: Optional[str]
    args: tuple = ()
    index: int = -1

    @staticmethod
    def var(i: int) -> "Term":
        return Term(None, (), i)

    @staticmethod
    def apply(op: str, args: Iterable["Term"]) -> "Term":
        return Term(op, tuple(args), -1)

    @property
    def is_var(self) -> bool:
        return self.op is None

    def variables(self) -> frozenset:
        if self.is_var:
            return frozenset([self.index])
        out = frozenset()
        for a in self.args:
            out |= a.variables()
        return out

    def render(self) -> str:
        if self.is_var:
            return f"v{self.index}"
        if not self.args:
            return self.op
        return f"{self.op}({', '.join(a.render() for a in self.args)})"


def eval_term(alg: FiniteAlgebra, t: Term, assignment) -> int:
    """Value of t under the assignment (sequence indexed by variable number)."""
    if t.is_var:
        if not (0 <= t.index < len(assignment)):
            raise UnassignedVariable(f"variable v{t.index} has no assigned value")
        return assignment[t.index]
    op = alg.op(t.op)
    if len(t.args) != op.arity:
        raise ArityMismatch(
            f"{t.op} applied to {len(t.args)} arguments, declared arity {op.arity}"
        )
    idx = 0
    for a in t.args:
        idx = idx * alg.size + eval_term(alg, a, assignment)
    return op.table[idx]


# ---------------------------------------------------------------------------
# Term operations and clone enumeration


@dataclass(frozen=True)
class TermOperation:
    """Semantic representative of a term: compares by (arity, table) only."""

    arity: int
    table: tuple
    witness: Term = field(compare=False, hash=False)

    def as_array(self, size: int) -> np.ndarray:
        return np.array(self.table, dtype=np.int64).reshape((size,) * self.arity)


def _projection_table(size: int, arity: int, slot: int) -> tuple:
    reps_after = size ** (arity - slot - 1)
    return tuple((i // reps_after) % size for i in range(size**arity))


def iter_term_operations(
    alg: FiniteAlgebra,
    arity: int,
    depth_bound: Optional[int] = None,
    max_tables: int = DEFAULT_MAX_TABLES,
) -> Iterator[TermOperation]:
    """Yield the arity-`arity` clone of alg in canonical (BFS) discovery order.

    Starts from the projections and composes with basic operations to a fixed
    point (or for depth_bound rounds).  Deduplicates semantically: the first
    witness term found for each table is kept, so consumers that stop early
    see a deterministic prefix.  Raises ResourceLimit past max_tables.
    """
    if arity < 0:
        raise ArityMismatch("clone arity must be non-negative")
    n = alg.size
    seen = set()
    flats = []
    witnesses = []

    def emit(table: tuple, witness: Term) -> Optional[TermOperation]:
        if table in seen:
            return None
        if len(flats) >= max_tables:
            raise ResourceLimit(f"clone enumeration exceeded {max_tables} stored tables")
        seen.add(table)
        flats.append(np.array(table, dtype=np.int64))
        witnesses.append(witness)
        return TermOperation(arity, table, witness)

    for i in range(arity):
        op = emit(_projection_table(n, arity, i), Term.var(i))
        if op is not None:
            yield op

    prev_count = 0
    depth = 0
    while depth_bound is None or depth < depth_bound:
        count = len(flats)
        for basic in alg.ops:
            arr = alg.op_array(basic.name)
            for combo in product(range(count), repeat=basic.arity):
                if depth > 0 and all(c < prev_count for c in combo):
                    continue
                if basic.arity == 0:
                    flat = np.full(max(n**arity, 1), int(arr[()]), dtype=np.int64)
                else:
                    flat = arr[tuple(flats[c] for c in combo)]
                table = tuple(int(v) for v in flat)
                witness = Term.apply(basic.name, tuple(witnesses[c] for c in combo))
                op = emit(table, witness)
                if op is not None:
                    yield op
        if len(flats) == count:
            break
        prev_count = count
        depth += 1


def enumerate_term_operations(
    alg: FiniteAlgebra,
    arity: int,
    depth_bound: Optional[int] = None,
    max_tables: int = DEFAULT_MAX_TABLES,
) -> list:
    """The arity-`arity` clone of alg as a list in canonical order."""
    return list(iter_term_operations(alg, arity, depth_bound, max_tables))


def essential_slots(table, shape) -> frozenset:
    """Indices of slots on which the tabulated function genuinely depends."""
    arr = np.asarray(table, dtype=np.int64).reshape(shape)
    out = set()
    for i in range(arr.ndim):
        moved = np.moveaxis(arr, i, 0)
        if moved.shape[0] > 1 and bool((moved != moved[0]).any()):
            out.add(i)
    return frozenset(out)


def essential_variables(op: TermOperation, size: Optional[int] = None) -> frozenset:
    """The set of variable indices op depends on, by exhaustive search."""
    if op.arity == 0:
        return frozenset()
    if size is None:
        size = round(len(op.table) ** (1.0 / op.arity))
        while size**op.arity < len(op.table):
            size += 1
    return essential_slots(op.table, (size,) * op.arity)


# ---------------------------------------------------------------------------
# Subpowers


@dataclass(frozen=True)
class PointAlgebra:
    """A generated subuniverse of alg**index_count, with its generators."""

    algebra: FiniteAlgebra
    index_count: int
    generators: tuple
    elements: tuple

    def index_of(self, vector) -> int:
        return self.elements.index(tuple(vector))


def generate_subpower(
    alg: FiniteAlgebra,
    index_count: int,
    generators,
    max_elements: int = DEFAULT_MAX_ELEMENTS,
) -> PointAlgebra:
    """Close the generator vectors under all operations applied coordinatewise."""
    gens = []
    for g in generators:
        vec = tuple(int(v) for v in g)
        if len(vec) != index_count or any(not (0 <= v < alg.size) for v in vec):
            raise ArityMismatch("generator vector does not fit the power")
        gens.append(vec)

    seen = set()
    elements = []
    for vec in gens:
        if vec not in seen:
            seen.add(vec)
            elements.append(vec)

    prev_count = 0
    while True:
        count = len(elements)
        if count == prev_count:
            break
        for basic in alg.ops:
            table = basic.table
            k = basic.arity
            n = alg.size
            for combo in product(range(count), repeat=k):
                if prev_count and all(c < prev_count for c in combo):
                    continue
                args = [elements[c] for c in combo]
                vec = []
                for pos in range(index_count):
                    idx = 0
                    for a in args:
                        idx = idx * n + a[pos]
                    vec.append(table[idx])
                tvec = tuple(vec)
                if tvec not in seen:
                    if len(elements) >= max_elements:
                        raise ResourceLimit(f"subpower exceeded {max_elements} points")
                    seen.add(tvec)
                    elements.append(tvec)
        prev_count = count

    return PointAlgebra(alg, index_count, tuple(gens), tuple(elements))
