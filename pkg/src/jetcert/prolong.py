"""Level-by-level prolongation of the eliminated system into a sparse
polynomial matrix.

Rows are derivatives of the three base equations: the first two are
differentiated through every multi-index of degree <= n, the third through
degree <= n+2 (it starts two orders lower).  Columns are the derivatives of
the two unknowns up to order n+3, with the six first-order space derivatives
pinned to the leading positions.  Coefficient polynomials are interned in a
deduplication pool; repeated derivatives are memoized against it.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

from .multiindex import (
    MultiIndex,
    ZERO as MI_ZERO,
    count_F,
    count_G,
    count_H,
    index_of,
    iter_degree,
    iter_up_to,
)
from .poly import DerivationParams, Poly, derive_space, derive_time
from .system import (
    Equation,
    RHS_UNKNOWNS,
    Z1,
    Z2,
    build_eliminated_system,
    derive_equation,
)

__all__ = [
    "RowId",
    "ColId",
    "PolyMatrix",
    "MatrixStats",
    "SubBlock",
    "derive_equation",
    "prolong",
    "build_main_matrix",
    "stats",
    "submatrix_blocks",
]


class RowId(NamedTuple):
    base_eq: int  # 1..3
    applied: MultiIndex


class ColId(NamedTuple):
    unknown: str  # "z1" or "z2" (phi1..phi4 on the right-hand side)
    deriv: MultiIndex


SPECIAL_COLS: tuple[ColId, ...] = (
    ColId(Z1, MultiIndex(0, 1, 0, 0)),
    ColId(Z1, MultiIndex(0, 0, 1, 0)),
    ColId(Z1, MultiIndex(0, 0, 0, 1)),
    ColId(Z2, MultiIndex(0, 1, 0, 0)),
    ColId(Z2, MultiIndex(0, 0, 1, 0)),
    ColId(Z2, MultiIndex(0, 0, 0, 1)),
)


def column_universe(n: int) -> list[ColId]:
    """Fixed six leading columns, then graded order per unknown."""
    special = set(SPECIAL_COLS)
    cols = list(SPECIAL_COLS)
    for unknown in (Z1, Z2):
        for mi in iter_up_to(n + 3):
            cid = ColId(unknown, mi)
            if cid not in special:
                cols.append(cid)
    return cols


def rhs_universe(n: int) -> list[ColId]:
    cols = []
    for phi in RHS_UNKNOWNS:
        for mi in iter_up_to(n + 3):
            cols.append(ColId(phi, mi))
    return cols


@dataclass
class PolyMatrix:
    """Sparse polynomial matrix with full row/column metadata.

    ``row_entries`` holds one {column index: Poly} map per row; the
    right-hand side is carried separately and never counts toward ncols.
    """

    n: int
    params: DerivationParams
    rows: list[RowId]
    cols: list[ColId]
    col_index: dict[ColId, int]
    row_entries: list[dict[int, Poly]]
    rhs_cols: list[ColId]
    rhs_index: dict[ColId, int]
    row_rhs: list[dict[int, Poly]]
    row_index: dict[RowId, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.row_index:
            self.row_index = {rid: i for i, rid in enumerate(self.rows)}

    @property
    def nrows(self) -> int:
        return len(self.rows)

    @property
    def ncols(self) -> int:
        return len(self.cols)

    def triplets(self) -> Iterator[tuple[int, int, Poly]]:
        for i, row in enumerate(self.row_entries):
            for j in sorted(row):
                yield i, j, row[j]

    def nnz(self) -> int:
        return sum(len(row) for row in self.row_entries)


@dataclass(frozen=True)
class MatrixStats:
    nnz: int
    density: float
    avg_nnz_per_row: float


def stats(pm: PolyMatrix) -> MatrixStats:
    """Counts over identically-nonzero polynomial entries."""
    nnz = pm.nnz()
    total = pm.nrows * pm.ncols
    return MatrixStats(
        nnz=nnz,
        density=nnz / total if total else 0.0,
        avg_nnz_per_row=nnz / pm.nrows if pm.nrows else 0.0,
    )


class _Pool:
    """Poly interning plus memoized derivatives keyed by interned value."""

    def __init__(self, params: DerivationParams):
        self.params = params
        self.polys: dict[Poly, Poly] = {}
        self.derivs: dict[tuple[int, Poly], Poly] = {}

    def intern(self, p: Poly) -> Poly:
        return self.polys.setdefault(p, p)

    def derive(self, p: Poly, axis: int) -> Poly:
        key = (axis, p)
        out = self.derivs.get(key)
        if out is None:
            if axis == 0:
                out = derive_time(p, self.params)
            else:
                out = derive_space(p, axis)
            out = self.intern(out)
            self.derivs[key] = out
        return out


def _derive_fast(eq: Equation, axis: int, pool: _Pool) -> Equation:
    """Same contract as ``derive_equation`` but memoized through the pool."""
    def table(src: dict) -> dict:
        out: dict = {}
        for (unknown, mi), coeff in src.items():
            dc = pool.derive(coeff, axis)
            if not dc.is_zero:
                key = (unknown, mi)
                acc = out.get(key)
                merged = dc if acc is None else pool.intern(acc + dc)
                if merged.is_zero:
                    del out[key]
                else:
                    out[key] = merged
            key = (unknown, mi.bump(axis))
            acc = out.get(key)
            merged = coeff if acc is None else pool.intern(acc + coeff)
            if merged.is_zero:
                del out[key]
            else:
                out[key] = merged
        return out

    return Equation(lhs=table(eq.lhs), rhs=table(eq.rhs), level=eq.level + 1)


def _parent_axis(mi: MultiIndex) -> int:
    """Smallest axis whose decrement yields a valid lower-level index."""
    for axis, order in enumerate(mi):
        if order > 0:
            return axis
    raise ValueError("level-0 index has no parent")


def prolong(
    system: list[Equation],
    n: int,
    params: DerivationParams | None = None,
    threads: int = 1,
) -> PolyMatrix:
    """Differentiate the 3-equation system to levels (n, n, n+2) and assemble.

    Each level-m equation is derived from its level-(m-1) parent along the
    smallest decrementable axis; mixed partials commute, so any valid parent
    gives the same row and the rule only fixes determinism.  Output is
    independent of ``threads``.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    if len(system) != 3:
        raise ValueError("expected the 3-equation eliminated system")
    params = params or DerivationParams()
    pool = _Pool(params)

    cols = column_universe(n)
    col_index = {cid: i for i, cid in enumerate(cols)}
    rhs_cols = rhs_universe(n)
    rhs_index = {cid: i for i, cid in enumerate(rhs_cols)}

    rows: list[RowId] = []
    row_entries: list[dict[int, Poly]] = []
    row_rhs: list[dict[int, Poly]] = []

    def emit(base: int, mi: MultiIndex, eq: Equation) -> None:
        rows.append(RowId(base, mi))
        row_entries.append(
            {col_index[ColId(u, d)]: pool.intern(c) for (u, d), c in eq.lhs.items()}
        )
        row_rhs.append(
            {rhs_index[ColId(u, d)]: pool.intern(c) for (u, d), c in eq.rhs.items()}
        )

    depths = (n, n, n + 2)
    for base, base_eq in enumerate(system, start=1):
        depth = depths[base - 1]
        base_eq = Equation(
            lhs={k: pool.intern(v) for k, v in base_eq.lhs.items()},
            rhs={k: pool.intern(v) for k, v in base_eq.rhs.items()},
            level=0,
        )
        emit(base, MI_ZERO, base_eq)
        prev: dict[MultiIndex, Equation] = {MI_ZERO: base_eq}
        for m in range(1, depth + 1):
            level_indices = list(iter_degree(m))

            def job(mi: MultiIndex) -> Equation:
                axis = _parent_axis(mi)
                return _derive_fast(prev[mi.drop(axis)], axis, pool)

            if threads > 1:
                with ThreadPoolExecutor(max_workers=threads) as pool_exec:
                    level_eqs = list(pool_exec.map(job, level_indices))
            else:
                level_eqs = [job(mi) for mi in level_indices]
            cur = dict(zip(level_indices, level_eqs))
            for mi in level_indices:
                emit(base, mi, cur[mi])
            prev = cur

    pm = PolyMatrix(
        n=n,
        params=params,
        rows=rows,
        cols=cols,
        col_index=col_index,
        row_entries=row_entries,
        rhs_cols=rhs_cols,
        rhs_index=rhs_index,
        row_rhs=row_rhs,
    )
    assert pm.nrows == count_G(n) and pm.ncols == count_H(n)
    return pm


def build_main_matrix(
    n: int = 19, params: DerivationParams | None = None, threads: int = 1
) -> PolyMatrix:
    """Build the eliminated system and prolong it in one call."""
    params = params or DerivationParams()
    return prolong(build_eliminated_system(params), n, params, threads)


@dataclass
class SubBlock:
    """One of the six (base equation, unknown) blocks, columns in graded order."""

    name: str
    base_eq: int
    unknown: str
    nrows: int
    ncols: int
    global_rows: list[int]
    entries: list[dict[int, Poly]]  # block-local columns: index_of(deriv)


def submatrix_blocks(pm: PolyMatrix) -> list[SubBlock]:
    """Split into A1, B1, A2, B2, A3, B3 (rows by base equation, columns by
    unknown); reassembling the six blocks reproduces the matrix exactly."""
    ncols_block = count_F(pm.n + 3)
    col_local = {}
    for j, cid in enumerate(pm.cols):
        col_local[j] = (cid.unknown, index_of(cid.deriv))
    blocks = []
    for base in (1, 2, 3):
        for unknown, letter in ((Z1, "A"), (Z2, "B")):
            rows = [i for i, rid in enumerate(pm.rows) if rid.base_eq == base]
            entries = []
            for i in rows:
                row = {}
                for j, p in pm.row_entries[i].items():
                    u, local = col_local[j]
                    if u == unknown:
                        row[local] = p
                entries.append(row)
            blocks.append(
                SubBlock(
                    name=f"{letter}{base}",
                    base_eq=base,
                    unknown=unknown,
                    nrows=len(rows),
                    ncols=ncols_block,
                    global_rows=rows,
                    entries=entries,
                )
            )
    order = {"A1": 0, "B1": 1, "A2": 2, "B2": 3, "A3": 4, "B3": 5}
    blocks.sort(key=lambda b: order[b.name])
    return blocks
