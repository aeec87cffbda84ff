"""Multi-sorted signatures and algebras, the class-sorted and factor-sorted
constructions over a congruence, and sorted term enumeration.

Sort naming convention: class-sorted algebras use sort names `s{i}` for the
i-th congruence class (0-based, least-representative order); factor-sorted
("flat") algebras use `s{i}_{j}` for factor j of class i.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product
from typing import Optional

import numpy as np

from .algebras import DEFAULT_MAX_TABLES, FiniteAlgebra, essential_slots
from .boxmaps import Boxmap, Coordinatization, DecompositionOp
from .congruences import Congruence
from .errors import (
    ArityMismatch,
    NotStronglyAbelian,
    ResourceLimit,
    SortMismatch,
)


def mixed_index(values, sizes) -> int:
    idx = 0
    for v, s in zip(values, sizes):
        idx = idx * s + v
    return idx


def mixed_tuple(idx: int, sizes) -> tuple:
    out = []
    for s in reversed(sizes):
        out.append(idx % s)
        idx //= s
    return tuple(reversed(out))


@dataclass(frozen=True)
class SortedOpSymbol:
    name: str
    insorts: tuple
    outsort: int


@dataclass(frozen=True)
class SortedSignature:
    sort_names: tuple
    ops: tuple

    def __post_init__(self):
        names = [op.name for op in self.ops]
        if len(set(names)) != len(names):
            raise ValueError("sorted operation names must be unique")
        k = len(self.sort_names)
        for op in self.ops:
            if not (0 <= op.outsort < k) or any(not (0 <= s < k) for s in op.insorts):
                raise SortMismatch(f"operation {op.name} references an unknown sort")


@dataclass(frozen=True)
class SortedAlgebra:
    signature: SortedSignature
    carriers: tuple
    tables: tuple

    def __post_init__(self):
        if any(c < 1 for c in self.carriers):
            raise ValueError("carriers must be nonempty")
        if len(self.tables) != len(self.signature.ops):
            raise ArityMismatch("one table per operation required")
        for op, table in zip(self.signature.ops, self.tables):
            want = 1
            for s in op.insorts:
                want *= self.carriers[s]
            if len(table) != want:
                raise ArityMismatch(f"operation {op.name}: bad table length")
            if any(not (0 <= v < self.carriers[op.outsort]) for v in table):
                raise ValueError(f"operation {op.name}: entry out of carrier")
        object.__setattr__(self, "_arrays", {})

    @property
    def num_sorts(self) -> int:
        return len(self.signature.sort_names)

    def op_shape(self, i: int) -> tuple:
        return tuple(self.carriers[s] for s in self.signature.ops[i].insorts)

    def op_array(self, i: int) -> np.ndarray:
        arr = self._arrays.get(i)
        if arr is None:
            shape = self.op_shape(i)
            arr = np.array(self.tables[i], dtype=np.int64).reshape(shape or (1,))
            arr.setflags(write=False)
            self._arrays[i] = arr
        return arr

    def apply(self, i: int, args) -> int:
        op = self.signature.ops[i]
        if len(args) != len(op.insorts):
            raise ArityMismatch(f"{op.name} applied to {len(args)} arguments")
        sizes = [self.carriers[s] for s in op.insorts]
        return self.tables[i][mixed_index(args, sizes)]

    def max_arity(self) -> int:
        return max((len(op.insorts) for op in self.signature.ops), default=0)


# ---------------------------------------------------------------------------
# Sorted terms


@dataclass(frozen=True)
class SortedTerm:
    """Variable (op is None) or application of a signature op by index."""

    op: Optional[int]
    args: tuple = ()
    var: int = -1
    sort: int = -1

    @staticmethod
    def variable(index: int, sort: int) -> "SortedTerm":
        return SortedTerm(None, (), index, sort)

    @staticmethod
    def apply(op_index: int, args) -> "SortedTerm":
        return SortedTerm(op_index, tuple(args), -1, -1)

    @property
    def is_var(self) -> bool:
        return self.op is None

    def render(self, signature: SortedSignature) -> str:
        if self.is_var:
            return f"v{self.var}"
        name = signature.ops[self.op].name
        if not self.args:
            return name
        return f"{name}({', '.join(a.render(signature) for a in self.args)})"


def eval_sorted_term(salg: SortedAlgebra, t: SortedTerm, assignment) -> int:
    if t.is_var:
        return assignment[t.var]
    return salg.apply(t.op, [eval_sorted_term(salg, a, assignment) for a in t.args])


@dataclass(frozen=True)
class SortedTermOperation:
    """A sorted term up to renaming: typed variable list, table, witness term."""

    insorts: tuple
    outsort: int
    table: tuple
    term: SortedTerm = field(compare=False, hash=False)

    def shape(self, salg: SortedAlgebra) -> tuple:
        return tuple(salg.carriers[s] for s in self.insorts)

    def as_array(self, salg: SortedAlgebra) -> np.ndarray:
        return np.array(self.table, dtype=np.int64).reshape(self.shape(salg) or (1,))

    def essential(self, salg: SortedAlgebra) -> frozenset:
        if not self.insorts:
            return frozenset()
        return essential_slots(self.table, self.shape(salg))

    @property
    def arity(self) -> int:
        return len(self.insorts)


def typed_projection(salg: SortedAlgebra, sort: int) -> SortedTermOperation:
    c = salg.carriers[sort]
    return SortedTermOperation(
        (sort,), sort, tuple(range(c)), SortedTerm.variable(0, sort)
    )


def _identification_patterns(insorts):
    """All ways to identify same-sort slots, vars numbered by first occurrence."""
    patterns = []

    def rec(i, assign, var_sorts):
        if i == len(insorts):
            patterns.append((tuple(assign), tuple(var_sorts)))
            return
        for v, s in enumerate(var_sorts):
            if s == insorts[i]:
                rec(i + 1, assign + [v], var_sorts)
        rec(i + 1, assign + [len(var_sorts)], var_sorts + [insorts[i]])

    rec(0, [], [])
    return patterns


def _pattern_table(salg, op_index, assign, var_sorts) -> tuple:
    arr = salg.op_array(op_index)
    if not assign:
        return tuple(int(v) for v in arr.reshape(-1))
    var_shape = tuple(salg.carriers[s] for s in var_sorts)
    grids = np.indices(var_shape)
    out = arr[tuple(grids[a] for a in assign)]
    return tuple(int(v) for v in out.reshape(-1))


def sorted_term_operations(
    salg: SortedAlgebra,
    require_strongly_abelian: bool = True,
    arity_bound: Optional[int] = None,
) -> list:
    """The finite representative term set: typed projections plus every basic
    operation with all same-sort variable identifications, deduplicated by
    (variable sorts, output sort, table).

    When require_strongly_abelian is set (the default), the algebra is first
    checked against the sorted strong term condition; a failure raises
    NotStronglyAbelian, since only then is this set complete for all term
    operations up to renaming of variables.
    """
    if require_strongly_abelian:
        fail = sorted_strong_term_condition(salg, arity_bound)
        if fail is not None:
            raise NotStronglyAbelian(f"sorted strong term condition fails: {fail}")
    out = []
    seen = set()

    def emit(member: SortedTermOperation):
        key = (member.insorts, member.outsort, member.table)
        if key not in seen:
            seen.add(key)
            out.append(member)

    for s in range(salg.num_sorts):
        emit(typed_projection(salg, s))
    for i, op in enumerate(salg.signature.ops):
        for assign, var_sorts in _identification_patterns(op.insorts):
            table = _pattern_table(salg, i, assign, var_sorts)
            term = SortedTerm.apply(
                i, [SortedTerm.variable(a, var_sorts[a]) for a in assign]
            )
            emit(SortedTermOperation(var_sorts, op.outsort, table, term))
    return out


# ---------------------------------------------------------------------------
# Sorted clone enumeration and the sorted strong term condition


def sorted_clone(
    salg: SortedAlgebra,
    var_sorts,
    max_tables: int = DEFAULT_MAX_TABLES,
) -> list:
    """All term operations over a fixed typed variable list, to a fixed point."""
    var_sorts = tuple(var_sorts)
    shape = tuple(salg.carriers[s] for s in var_sorts)
    total = 1
    for c in shape:
        total *= c

    seen = set()
    items = []

    def emit(outsort, table, term):
        key = (outsort, table)
        if key in seen:
            return None
        if len(items) >= max_tables:
            raise ResourceLimit("sorted clone exceeded the table cap")
        seen.add(key)
        member = SortedTermOperation(var_sorts, outsort, table, term)
        items.append((member, np.array(table, dtype=np.int64)))
        return member

    for i, s in enumerate(var_sorts):
        reps_after = 1
        for c in shape[i + 1 :]:
            reps_after *= c
        table = tuple((j // reps_after) % shape[i] for j in range(total))
        emit(s, table, SortedTerm.variable(i, s))

    prev = 0
    while True:
        count = len(items)
        for oi, op in enumerate(salg.signature.ops):
            arr = salg.op_array(oi)
            pools = [
                [k for k in range(count) if items[k][0].outsort == s]
                for s in op.insorts
            ]
            for combo in product(*pools):
                if prev and all(c < prev for c in combo):
                    continue
                if not combo:
                    flat = np.full(max(total, 1), int(salg.tables[oi][0]), dtype=np.int64)
                else:
                    flat = arr[tuple(items[c][1] for c in combo)]
                table = tuple(int(v) for v in flat)
                term = SortedTerm.apply(oi, [items[c][0].term for c in combo])
                emit(op.outsort, table, term)
        if len(items) == count:
            break
        prev = count
    return [m for m, _ in items]


@dataclass(frozen=True)
class SortedTCFailure:
    term: SortedTerm
    var_sorts: tuple
    row_slot: int
    rows: tuple
    columns: tuple
    outputs: tuple


def _scan_sorted_table(member: SortedTermOperation, salg, strong: bool):
    """Term-condition scan at the top congruence, every slot as the row."""
    m = member.arity
    if m == 0:
        return None
    shape = member.shape(salg)
    arr = member.as_array(salg)
    for r in range(m):
        if shape[r] < 2:
            continue
        mat = np.moveaxis(arr, r, 0).reshape(shape[r], -1)
        ctx_sizes = tuple(shape[q] for q in range(m) if q != r)
        registry = {}
        for j in range(mat.shape[1]):
            col = mat[:, j]
            for a in range(shape[r]):
                v = int(col[a])
                key = v if strong else (a, v)
                prev = registry.get(key)
                if prev is None:
                    registry[key] = (j, a)
                    continue


                j0, a0 = prev
                if j0 == j:
                    continue
                col0 = mat[:, j0]
                diff = np.flatnonzero(col0 != col)
                if len(diff) == 0:
                    continue
                c = int(diff[0])
                b = a if strong else a0
                return SortedTCFailure(
                    term=member.term,
                    var_sorts=member.insorts,
                    row_slot=r,
                    rows=(a0, b, c),
                    columns=(mixed_tuple(j0, ctx_sizes), mixed_tuple(j, ctx_sizes)),
                    outputs=(int(col0[a0]), int(col[a]), int(col0[c]), int(col[c])),
                )
    return None


def default_sorted_arity_bound(salg: SortedAlgebra) -> int:
    biggest = max(salg.carriers)
    return max(1, math.ceil(math.log2(max(biggest, 1)))) + 1


def sorted_strong_term_condition(
    salg: SortedAlgebra,
    arity_bound: Optional[int] = None,
    max_tables: int = DEFAULT_MAX_TABLES,
) -> Optional[SortedTCFailure]:
    """Strong term condition at the top congruence of a sorted algebra.

    Scans the sorted clone for every typed variable tuple up to the bound.
    Returns the first failure or None.
    """
    if arity_bound is None:
        arity_bound = default_sorted_arity_bound(salg)
    for length in range(1, arity_bound + 1):
        for var_sorts in product(range(salg.num_sorts), repeat=length):
            for member in sorted_clone(salg, var_sorts, max_tables):
                fail = _scan_sorted_table(member, salg, True)
                if fail is not None:
                    return fail
    return None


def sorted_abelian_term_condition(
    salg: SortedAlgebra,
    arity_bound: Optional[int] = None,
    max_tables: int = DEFAULT_MAX_TABLES,
) -> Optional[SortedTCFailure]:
    """Ordinary term condition at the top congruence of a sorted algebra."""
    if arity_bound is None:
        arity_bound = default_sorted_arity_bound(salg)
    for length in range(1, arity_bound + 1):
        for var_sorts in product(range(salg.num_sorts), repeat=length):
            for member in sorted_clone(salg, var_sorts, max_tables):
                fail = _scan_sorted_table(member, salg, False)
                if fail is not None:
                    return fail
    return None


# ---------------------------------------------------------------------------
# The class-sorted construction


@dataclass(frozen=True)
class ClassSortedConstruction:
    algebra: SortedAlgebra
    blocks: tuple
    op_sources: tuple  # per sorted op: (basic op name, class tuple)


def build_frz(alg: FiniteAlgebra, tau: Congruence) -> ClassSortedConstruction:
    """One sort per tau-class; each basic operation typed per class tuple.

    Tables are restrictions of the original operations, with output sorts
    read off the quotient action.
    """
    blocks = tuple(tuple(b) for b in tau.blocks())
    m = len(blocks)
    sort_names = tuple(f"s{i}" for i in range(m))
    local = {}
    for i, block in enumerate(blocks):
        for pos, x in enumerate(block):
            local[x] = (i, pos)

    symbols = []
    tables = []
    sources = []
    for op in alg.ops:
        for classes in product(range(m), repeat=op.arity):
            reps = [blocks[c][0] for c in classes]
            idx = 0
            for v in reps:
                idx = idx * alg.size + v
            outsort = local[op.table[idx]][0]
            table = []
            for combo in product(*(blocks[c] for c in classes)):
                j = 0
                for v in combo:
                    j = j * alg.size + v
                value = op.table[j]
                vs, vp = local[value]
                if vs != outsort:
                    raise SortMismatch("partition is not a congruence")
                table.append(vp)
            name = "_".join([op.name] + [str(c) for c in classes])
            symbols.append(SortedOpSymbol(name, classes, outsort))
            tables.append(tuple(table))
            sources.append((op.name, classes))

    sig = SortedSignature(sort_names, tuple(symbols))
    carriers = tuple(len(b) for b in blocks)
    return ClassSortedConstruction(
        SortedAlgebra(sig, carriers, tuple(tables)), blocks, tuple(sources)
    )


# ---------------------------------------------------------------------------
# The factor-sorted (flat) construction


@dataclass(frozen=True)
class FactorSortedConstruction:
    algebra: SortedAlgebra
    sort_pairs: tuple  # (class index, factor index) per sort
    blocks: tuple
    decompositions: tuple  # per class: (DecompositionOp, Coordinatization)
    boxmaps: tuple
    op_sources: tuple  # per sorted op: (boxmap index, output coordinate)


def build_frzflt(
    alg: FiniteAlgebra,
    tau: Congruence,
    decompositions,
    boxmaps,
) -> FactorSortedConstruction:
    """One sort per (class, factor); one typed op per boxmap output coordinate.

    Each boxmap of the enumerated set induces, for every output coordinate j,
    an operation assembling its inputs through the class coordinatizations,
    applying the boxmap, and projecting coordinate j.  Operations are
    deduplicated by (input sorts, output sort, table).
    """
    blocks = tuple(tuple(b) for b in tau.blocks())
    decomps = tuple(decompositions)
    if len(decomps) != len(blocks):
        raise ArityMismatch("one decomposition per class required")

    sort_pairs = []
    sort_of = {}
    carriers = []
    for i, (_, coord) in enumerate(decomps):
        for j, size in enumerate(coord.factors):
            sort_of[(i, j)] = len(sort_pairs)
            sort_pairs.append((i, j))
            carriers.append(size)
    sort_names = tuple(f"s{i}_{j}" for (i, j) in sort_pairs)

    symbols = []
    tables = []
    sources = []
    seen = {}
    for bi, bm in enumerate(boxmaps):
        in_classes = bm.input_classes
        out_class = bm.output_class
        out_coord = decomps[out_class][1]
        insorts = []
        for c in in_classes:
            insorts.extend(sort_of[(c, j)] for j in range(len(decomps[c][1].factors)))
        insorts = tuple(insorts)
        shape = tuple(carriers[s] for s in insorts)
        box_sizes = tuple(len(blocks[c]) for c in in_classes)

        for j in range(len(out_coord.factors)):
            table = []
            for combo in product(*(range(c) for c in shape)) if shape else [()]:
                pos = 0
                locs = []
                for c in in_classes:
                    k = len(decomps[c][1].factors)
                    coords = combo[pos : pos + k]
                    pos += k
                    locs.append(decomps[c][1].from_coordinates(coords))
                value = bm.table[mixed_index(locs, box_sizes)] if locs else bm.table[0]
                table.append(out_coord.coordinates_of_element(value)[j])
            table = tuple(table)
            key = (insorts, sort_of[(out_class, j)], table)
            if key in seen:
                continue
            seen[key] = True
            name = f"b{bi}c{j}"
            symbols.append(SortedOpSymbol(name, insorts, sort_of[(out_class, j)]))
            tables.append(table)
            sources.append((bi, j))

    sig = SortedSignature(sort_names, tuple(symbols))
    return FactorSortedConstruction(
        SortedAlgebra(sig, tuple(carriers), tuple(tables)),
        tuple(sort_pairs),
        blocks,
        decomps,
        tuple(boxmaps),
        tuple(sources),
    )


# ---------------------------------------------------------------------------
# Structural correspondence checks for the class-sorted construction


def verify_substructure_correspondence(alg, tau, sub_elements) -> bool:
    """A subalgebra meeting every class yields a sorted substructure."""
    sub = sorted(set(sub_elements))
    subset = set(sub)
    for op in alg.ops:
        for combo in product(sub, repeat=op.arity):
            idx = 0
            for v in combo:
                idx = idx * alg.size + v
            if op.table[idx] not in subset:
                return False
    blocks = tau.blocks()
    if any(not subset.intersection(b) for b in blocks):
        return False
    whole = build_frz(alg, tau)
    sub_tau = Congruence(
        len(sub), tuple(tau.block_of(x) for x in sub)
    )
    sub_alg_ops = []
    from .algebras import Operation

    position = {x: i for i, x in enumerate(sub)}
    for op in alg.ops:
        table = []
        for combo in product(sub, repeat=op.arity):
            idx = 0
            for v in combo:
                idx = idx * alg.size + v
            table.append(position[op.table[idx]])
        sub_alg_ops.append(Operation(op.name, op.arity, tuple(table)))
    sub_frz = build_frz(FiniteAlgebra(len(sub), tuple(sub_alg_ops)), sub_tau)

    # the inclusion must be a typed embedding: same signature shape, matching
    # tables under the per-sort inclusion maps
    if len(sub_frz.algebra.signature.ops) != len(whole.algebra.signature.ops):
        return False
    embed = {}
    for si, block in enumerate(sub_frz.blocks):
        wblock = whole.blocks[si]
        embed[si] = [wblock.index(sub[x]) for x in block]
    for k, symbol in enumerate(sub_frz.algebra.signature.ops):
        wsym = whole.algebra.signature.ops[k]
        if symbol.insorts != wsym.insorts or symbol.outsort != wsym.outsort:
            return False
        shape = sub_frz.algebra.op_shape(k)
        for combo in product(*(range(c) for c in shape)) if shape else [()]:
            v = sub_frz.algebra.apply(k, combo)
            wcombo = [embed[s][x] for s, x in zip(symbol.insorts, combo)]
            if whole.algebra.apply(k, wcombo) != embed[symbol.outsort][v]:
                return False
    return True


def verify_quotient_correspondence(alg, tau, theta) -> bool:
    """theta below tau yields a sorted homomorphic image."""
    if not theta.refines(tau):
        return False
    from .congruences import quotient

    q = quotient(alg, theta)
    q_tau = Congruence(
        q.size, tuple(tau.block_of(block[0]) for block in theta.blocks())
    )
    whole = build_frz(alg, tau)
    quot = build_frz(q, q_tau)
    if len(whole.algebra.signature.ops) != len(quot.algebra.signature.ops):
        return False
    # natural per-sort surjections
    maps = {}
    for si, block in enumerate(whole.blocks):
        qblock = quot.blocks[si]
        maps[si] = [qblock.index(theta.block_of(x)) for x in block]
    for k, symbol in enumerate(whole.algebra.signature.ops):
        shape = whole.algebra.op_shape(k)
        for combo in product(*(range(c) for c in shape)) if shape else [()]:
            v = whole.algebra.apply(k, combo)
            qcombo = [maps[s][x] for s, x in zip(symbol.insorts, combo)]
            if quot.algebra.apply(k, qcombo) != maps[symbol.outsort][v]:
                return False
    return True


def verify_product_correspondence(alg, tau) -> bool:
    """The tau-fiber square of the algebra matches the sorted direct square."""
    from .algebras import Operation

    pairs = [
        (a, b)
        for a in range(alg.size)
        for b in range(alg.size)
        if tau.related(a, b)
    ]
    position = {p: i for i, p in enumerate(pairs)}
    ops = []
    for op in alg.ops:
        table = []
        for combo in product(pairs, repeat=op.arity):
            ia = 0
            ib = 0
            for (x, y) in combo:
                ia = ia * alg.size + x
                ib = ib * alg.size + y
            table.append(position[(op.table[ia], op.table[ib])])
        ops.append(Operation(op.name, op.arity, tuple(table)))
    fiber = FiniteAlgebra(len(pairs), tuple(ops))
    fiber_tau = Congruence(len(pairs), tuple(tau.block_of(a) for (a, b) in pairs))
    fibered = build_frz(fiber, fiber_tau)
    whole = build_frz(alg, tau)

    # carriers must biject with per-sort squares, and ops act coordinatewise
    for si, block in enumerate(fibered.blocks):
        base = whole.blocks[si]
        if len(block) != len(base) ** 2:
            return False
    for k, symbol in enumerate(fibered.algebra.signature.ops):
        shape = fibered.algebra.op_shape(k)
        for combo in product(*(range(c) for c in shape)) if shape else [()]:
            v = fibered.algebra.apply(k, combo)
            lefts = []
            rights = []
            for s, x in zip(symbol.insorts, combo):
                a, b = fibered.blocks[s][x]
                lefts.append(whole.blocks[s].index(a))
                rights.append(whole.blocks[s].index(b))
            vl = whole.algebra.apply(k, lefts)
            vr = whole.algebra.apply(k, rights)
            out = symbol.outsort
            va, vb = fibered.blocks[out][v]
            if (whole.blocks[out].index(va), whole.blocks[out].index(vb)) != (vl, vr):
                return False
    return True
