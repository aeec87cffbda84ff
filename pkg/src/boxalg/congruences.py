"""Congruences of finite algebras and the (strong) abelian term conditions.

A congruence is stored as a block-id vector in least-representative numbering:
element 0 lies in block 0, and each later element either joins an existing
block or opens the next unused id.  Term-condition checks enumerate the clone
up to an arity bound; every returned failure re-evaluates to a genuine
violation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from typing import Optional

import numpy as np

from .algebras import (
    DEFAULT_MAX_TABLES,
    FiniteAlgebra,
    Term,
    TermOperation,
    eval_term,
    iter_term_operations,
    Operation,
)
from .errors import NotACongruence, ResourceLimit, SizeMismatch


@dataclass(frozen=True)
class Congruence:
    algebra_size: int
    block_ids: tuple

    def __post_init__(self):
        if len(self.block_ids) != self.algebra_size:
            raise SizeMismatch("block-id vector does not cover the universe")
        object.__setattr__(self, "block_ids", _canonical_ids(self.block_ids))

    @staticmethod
    def equality(size: int) -> "Congruence":
        return Congruence(size, tuple(range(size)))

    @staticmethod
    def total(size: int) -> "Congruence":
        return Congruence(size, (0,) * size)

    @staticmethod
    def from_blocks(size: int, blocks) -> "Congruence":
        ids = [-1] * size
        for b, block in enumerate(blocks):
            for x in block:
                ids[x] = b
        if any(i < 0 for i in ids):
            raise SizeMismatch("blocks do not cover the universe")
        return Congruence(size, tuple(ids))

    def num_blocks(self) -> int:
        return max(self.block_ids) + 1 if self.block_ids else 0

    def blocks(self) -> list:
        out = [[] for _ in range(self.num_blocks())]
        for x, b in enumerate(self.block_ids):
            out[b].append(x)
        return out

    def block_of(self, x: int) -> int:
        return self.block_ids[x]

    def related(self, x: int, y: int) -> bool:
        return self.block_ids[x] == self.block_ids[y]

    def max_block_size(self) -> int:
        return max(len(b) for b in self.blocks())

    def refines(self, other: "Congruence") -> bool:
        """True when every block of self is contained in a block of other."""
        seen = {}
        for x in range(self.algebra_size):
            b = self.block_ids[x]
            ob = other.block_ids[x]
            if b in seen and seen[b] != ob:
                return False
            seen[b] = ob
        return True


def _canonical_ids(ids) -> tuple:
    relabel = {}
    out = []
    for i in ids:
        if i not in relabel:
            relabel[i] = len(relabel)
        out.append(relabel[i])
    return tuple(out)


def is_congruence(alg: FiniteAlgebra, partition: Congruence) -> bool:
    """Compatibility with every basic operation, one changed slot at a time."""
    if partition.algebra_size != alg.size:
        raise SizeMismatch("partition size does not match the algebra")
    ids = partition.block_ids
    pairs = [
        (a, b)
        for block in partition.blocks()
        for i, a in enumerate(block)
        for b in block[i + 1 :]
    ]
    if not pairs:
        return True
    for op in alg.ops:
        table = op.table
        n = alg.size
        for slot in range(op.arity):
            for ctx in product(range(n), repeat=op.arity - 1):
                base = list(ctx[:slot]) + [0] + list(ctx[slot:])
                for a, b in pairs:
                    base[slot] = a
                    ia = 0
                    for v in base:
                        ia = ia * n + v
                    base[slot] = b
                    ib = 0
                    for v in base:
                        ib = ib * n + v
                    if ids[table[ia]] != ids[table[ib]]:
                        return False
    return True


def cg(alg: FiniteAlgebra, pairs) -> Congruence:
    """Smallest congruence containing the pairs (Mal'cev closure)."""
    n = alg.size
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    work = []

    def union(x, y):
        rx, ry = find(x), find(y)
        if rx == ry:
            return
        if rx > ry:
            rx, ry = ry, rx
        parent[ry] = rx
        work.append((rx, ry))

    for a, b in pairs:
        union(int(a), int(b))

    while work:
        a, b = work.pop()
        for op in alg.ops:
            table = op.table
            for slot in range(op.arity):
                for ctx in product(range(n), repeat=op.arity - 1):
                    ia = 0
                    ib = 0
                    for pos in range(op.arity):
                        if pos == slot:
                            va, vb = a, b
                        elif pos < slot:
                            va = vb = ctx[pos]
                        else:
                            va = vb = ctx[pos - 1]
                        ia = ia * n + va
                        ib = ib * n + vb
                    union(table[ia], table[ib])

    return Congruence(n, tuple(find(x) for x in range(n)))


def join(theta1: Congruence, theta2: Congruence) -> Congruence:
    """Join in the congruence lattice: transitive closure of the union."""
    n = theta1.algebra_size
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for theta in (theta1, theta2):
        for block in theta.blocks():
            for x in block[1:]:
                ra, rb = find(block[0]), find(x)
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)
    return Congruence(n, tuple(find(x) for x in range(n)))


def con_lattice(alg: FiniteAlgebra, max_congruences: int = 100000) -> list:
    """All congruences: join-closure of the principal ones plus equality."""
    found = {Congruence.equality(alg.size)}
    for a in range(alg.size):
        for b in range(a + 1, alg.size):
            found.add(cg(alg, [(a, b)]))
    while True:
        new = set()
        items = sorted(found, key=lambda c: c.block_ids)
        for i, t1 in enumerate(items):
            for t2 in items[i + 1 :]:
                j = join(t1, t2)
                if j not in found:
                    new.add(j)
        if not new:
            break
        found |= new
        if len(found) > max_congruences:
            raise ResourceLimit(f"congruence lattice exceeded {max_congruences}")
    return sorted(found, key=lambda c: (c.num_blocks(), c.block_ids), reverse=True)


def quotient(alg: FiniteAlgebra, theta: Congruence) -> FiniteAlgebra:
    """The quotient algebra on theta's blocks (ordered by least element)."""
    if not is_congruence(alg, theta):
        raise NotACongruence("partition is not compatible with the operations")
    blocks = theta.blocks()
    reps = [b[0] for b in blocks]
    m = len(blocks)
    ops = []
    for op in alg.ops:
        table = []
        for combo in product(range(m), repeat=op.arity):
            idx = 0
            for c in combo:
                idx = idx * alg.size + reps[c]
            table.append(theta.block_of(op.table[idx]))
        ops.append(Operation(op.name, op.arity, tuple(table)))
    return FiniteAlgebra(m, tuple(ops))


# ---------------------------------------------------------------------------
# Term conditions


@dataclass(frozen=True)
class TCFailure:
    """A concrete violation of a term condition.

    rows is (a, b, c): the premise is t(a, u) = t(b, v) and the conclusion
    t(c, u) = t(c, v) fails.  For the ordinary (abelian) condition a == b.
    outputs records the four evaluated values in that order.  The row variable
    sits at row_slot of the term; columns are the remaining slots in order.
    """

    term: Term
    row_slot: int
    rows: tuple
    columns: tuple
    outputs: tuple

    def assignments(self):
        """The four full argument tuples, in output order."""
        a, b, c = self.rows
        u, v = self.columns

        def full(row, ctx):
            ctx = list(ctx)
            return tuple(ctx[: self.row_slot] + [row] + ctx[self.row_slot :])

        return (full(a, u), full(b, v), full(c, u), full(c, v))

    def reevaluate(self, alg: FiniteAlgebra) -> tuple:
        return tuple(eval_term(alg, self.term, asg) for asg in self.assignments())


def default_arity_bound(tau: Congruence) -> int:
    """ceil(log2(largest class size)) + 2, the module-wide default."""
    return max(1, math.ceil(math.log2(max(tau.max_block_size(), 1)))) + 2


def _decode_context(j: int, size: int, width: int) -> tuple:
    out = []
    for _ in range(width):
        out.append(j % size)
        j //= size
    return tuple(reversed(out))


def _column_signatures(size: int, width: int, block_ids) -> np.ndarray:
    """Signature code of each context column: the tuple of block ids, encoded."""
    total = size**width
    codes = np.zeros(total, dtype=np.int64)
    idx = np.arange(total)
    blocks = np.asarray(block_ids, dtype=np.int64)
    nb = int(blocks.max()) + 1
    for pos in range(width):
        digit = (idx // (size ** (width - pos - 1))) % size
        codes = codes * nb + blocks[digit]
    return codes


def _scan_table_for_failure(size, tau, top: TermOperation, strong: bool):
    """Earliest failure of the (strong) term condition on one term table.

    Every slot is taken as the row in turn; this equals checking the condition
    on all variable-permuted copies of the term, which the clone contains at
    its fixed point anyway, and gives an exact per-term dual to the
    rectangularity certificate.
    """
    m = top.arity
    if m == 0:
        return None
    arr = top.as_array(size)
    ids = tau.block_ids
    classes = [b for b in tau.blocks() if len(b) > 1]
    if not classes:
        return None
    for r in range(m):
        mat = np.moveaxis(arr, r, 0).reshape(size, -1)
        width = m - 1
        ncols = mat.shape[1]
        if width == 0:
            sigs = np.zeros(1, dtype=np.int64)
        else:
            sigs = _column_signatures(size, width, ids)
        for rows in classes:
            sub = mat[rows]
            if ncols > 2048:
                if not _fast_group_check(sub, sigs, strong):
                    continue
            fail = _walk_failure(top, r, rows, sub, sigs, size, width, strong)
            if fail is not None:
                return fail
    return None


def _fast_group_check(sub: np.ndarray, sigs: np.ndarray, strong: bool) -> bool:
    """True if some signature group may contain a violation (exact, no witness)."""
    order = np.argsort(sigs, kind="stable")
    sorted_sigs = sigs[order]
    boundaries = np.flatnonzero(np.diff(sorted_sigs)) + 1
    for group in np.split(order, boundaries):
        if len(group) < 2:
            continue
        cols = np.unique(sub[:, group], axis=1)
        if cols.shape[1] < 2:
            continue
        if strong:
            for v in np.unique(cols):
                if int((cols == v).any(axis=0).sum()) > 1:
                    return True
        else:
            for i in range(cols.shape[0]):
                if len(np.unique(cols[i])) < cols.shape[1]:
                    return True
    return False


def _walk_failure(top, r, rows, sub, sigs, size, width, strong):
    """Deterministic earliest-witness walk over columns in index order."""
    ncols = sub.shape[1]
    registry = {}
    for j in range(ncols):
        sig = int(sigs[j]) if width else 0
        col = sub[:, j]
        for i, row in enumerate(rows):
            v = int(col[i])
            key = (sig, v) if strong else (sig, i, v)
            prev = registry.get(key)
            if prev is None:
                registry[key] = (j, i)
                continue
            j0, i0 = prev
            if j0 == j:
                continue
            col0 = sub[:, j0]
            diff = np.flatnonzero(col0 != col)
            if len(diff) == 0:
                continue
            k = int(diff[0])
            a = rows[i0]
            b = rows[i]
            c = rows[k]
            u = _decode_context(j0, size, width)
            v_ctx = _decode_context(j, size, width)
            if not strong:
                b = a
            return TCFailure(
                term=top.witness,
                row_slot=r,
                rows=(a, b, c),
                columns=(u, v_ctx),
                outputs=(int(col0[i0]), int(col[i]), int(col0[k]), int(col[k])),
            )
    return None


def _term_condition(alg, tau, arity_bound, strong, max_tables):
    if tau.algebra_size != alg.size:
        raise SizeMismatch("congruence size does not match the algebra")
    if arity_bound is None:
        arity_bound = default_arity_bound(tau)
    for arity in range(1, arity_bound + 1):
        for top in iter_term_operations(alg, arity, max_tables=max_tables):
            fail = _scan_table_for_failure(alg.size, tau, top, strong)
            if fail is not None:
                return fail
    return None


def strong_term_condition(
    alg: FiniteAlgebra,
    tau: Congruence,
    arity_bound: Optional[int] = None,
    max_tables: int = DEFAULT_MAX_TABLES,
) -> Optional[TCFailure]:
    """First failure of the strong term condition up to the bound, or None.

    The strong condition: for term t, rows a, b, c in one tau-class (at any
    slot) and componentwise tau-related contexts u, v:
    t(a,u) = t(b,v) implies t(c,u) = t(c,v).
    """
    return _term_condition(alg, tau, arity_bound, True, max_tables)


def abelian_term_condition(
    alg: FiniteAlgebra,
    tau: Congruence,
    arity_bound: Optional[int] = None,
    max_tables: int = DEFAULT_MAX_TABLES,
) -> Optional[TCFailure]:
    """First failure of the ordinary term condition, or None.

    The ordinary condition: t(a,u) = t(a,v) implies t(c,u) = t(c,v) for a, c
    in one tau-class and componentwise tau-related contexts.
    """
    return _term_condition(alg, tau, arity_bound, False, max_tables)


# ---------------------------------------------------------------------------
# Rectangularity certificates


@dataclass(frozen=True)
class RectangularityFailure:
    tuple_x: tuple
    tuple_y: tuple
    value_x: int
    value_y: int
    bad_slot: int


def rectangularity_certificate(
    alg: FiniteAlgebra, tau: Congruence, top: TermOperation, class_tuple
):
    """Per-slot equivalence relations certifying rectangular behavior on a box.

    Builds E_i as the agreement kernels (x E_i y iff the table agrees whenever
    only slot i flips between x and y) and then checks the full biconditional
    t(x) = t(y) iff x_i E_i y_i for all i.  Returns the list of per-slot
    partitions (block-id vectors over the class elements) on success, or a
    RectangularityFailure witness.
    """
    blocks = tau.blocks()
    box = [blocks[c] for c in class_tuple]
    if len(box) != top.arity:
        raise SizeMismatch("class tuple does not match the term arity")
    if top.arity == 0:
        return []
    arr = top.as_array(alg.size)
    sub = arr[np.ix_(*box)]

    kernels = []
    for i in range(top.arity):
        moved = np.moveaxis(sub, i, 0).reshape(len(box[i]), -1)
        _, labels = np.unique(moved, axis=0, return_inverse=True)
        kernels.append(tuple(int(x) for x in labels))

    flat = sub.reshape(-1)
    shape = sub.shape
    by_value = {}
    for j, value in enumerate(flat):
        sig = []
        rem = j
        for i in range(len(shape) - 1, -1, -1):
            sig.append(kernels[i][rem % shape[i]])
            rem //= shape[i]
        sig = tuple(reversed(sig))
        value = int(value)
        prev = by_value.get(value)
        if prev is None:
            by_value[value] = (j, sig)
        elif prev[1] != sig:
            j0, sig0 = prev
            bad = next(i for i in range(len(sig)) if sig0[i] != sig[i])
            return RectangularityFailure(
                tuple_x=_unflatten(j0, shape, box),
                tuple_y=_unflatten(j, shape, box),
                value_x=value,
                value_y=value,
                bad_slot=bad,
            )
    # reverse direction: equal signatures must give equal values
    by_sig = {}
    for j, value in enumerate(flat):
        sig = []
        rem = j
        for i in range(len(shape) - 1, -1, -1):
            sig.append(kernels[i][rem % shape[i]])
            rem //= shape[i]
        sig = tuple(reversed(sig))
        value = int(value)
        prev = by_sig.get(sig)
        if prev is None:
            by_sig[sig] = (j, value)
        elif prev[1] != value:
            j0, v0 = prev
            return RectangularityFailure(
                tuple_x=_unflatten(j0, shape, box),
                tuple_y=_unflatten(j, shape, box),
                value_x=v0,
                value_y=value,
                bad_slot=-1,
            )
    return kernels


def _unflatten(j: int, shape, box) -> tuple:
    out = []
    for i in range(len(shape) - 1, -1, -1):
        out.append(box[i][j % shape[i]])
        j //= shape[i]
    return tuple(reversed(out))


def rectangularity_all_terms(
    alg: FiniteAlgebra,
    tau: Congruence,
    arity_bound: Optional[int] = None,
    max_tables: int = DEFAULT_MAX_TABLES,
):
    """First term/box pair failing the rectangularity certificate, or None.

    Independent dual of strong_term_condition: scans the same clone but
    decides via certificates rather than the row/column implication.
    """
    if arity_bound is None:
        arity_bound = default_arity_bound(tau)
    nblocks = tau.num_blocks()
    for arity in range(1, arity_bound + 1):
        for top in iter_term_operations(alg, arity, max_tables=max_tables):
            for class_tuple in product(range(nblocks), repeat=arity):
                result = rectangularity_certificate(alg, tau, top, class_tuple)
                if isinstance(result, RectangularityFailure):
                    return top, class_tuple, result
    return None


# ---------------------------------------------------------------------------
# Strongly abelian congruence search


@dataclass(frozen=True)
class RadicalSearch:
    congruences: tuple
    maximal: tuple
    unique_maximum: Optional[Congruence]
    arity_bounds: tuple


def strongly_abelian_congruences(
    alg: FiniteAlgebra,
    arity_bound: Optional[int] = None,
    max_tables: int = DEFAULT_MAX_TABLES,
) -> RadicalSearch:
    """Congruences passing the strong term condition, with maxima flagged.

    The radical candidate is the unique maximum when one exists; when several
    incomparable maximal strongly abelian congruences exist, callers must
    treat the result as ambiguous.
    """
    passing = []
    bounds = []
    for theta in con_lattice(alg):
        bound = arity_bound if arity_bound is not None else default_arity_bound(theta)
        if strong_term_condition(alg, theta, bound, max_tables) is None:
            passing.append(theta)
            bounds.append(bound)
    maximal = [
        t
        for t in passing
        if not any(t is not other and t.refines(other) for other in passing)
    ]
    unique = maximal[0] if len(maximal) == 1 else None
    return RadicalSearch(tuple(passing), tuple(maximal), unique, tuple(bounds))
