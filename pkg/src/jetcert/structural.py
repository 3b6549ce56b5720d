"""Structural linear algebra on the evaluated matrix.

Exact rational evaluation at the certification point, null-column analysis,
structural rank through maximum bipartite matching, and the coarse + fine
Dulmage-Mendelsohn decomposition used to carve out the invertible block.
Every matching produced here is re-verified in pure Python (no augmenting
path), so maximality never rests on the matching engine alone.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .multiindex import index_of
from .poly import Poly, evaluate
from .prolong import ColId, PolyMatrix

__all__ = [
    "RatMatrix",
    "NullColumns",
    "DmResult",
    "PqrPartition",
    "RobustnessViolation",
    "evaluate_matrix",
    "null_columns",
    "max_matching",
    "verify_maximum_matching",
    "sprank",
    "dm_decompose",
    "staircase_valid",
    "overdetermined_square",
    "unknown_major_col_key",
    "extract_pqr",
    "target_column_check",
]


@dataclass
class RatMatrix:
    """Sparse exact-rational matrix; ``rows[i]`` maps column -> value."""

    nrows: int
    ncols: int
    rows: list[dict[int, Fraction]]
    #: original (row, col) ids when this is a submatrix of a bigger one
    row_ids: list[int] | None = None
    col_ids: list[int] | None = None

    def nnz(self) -> int:
        return sum(len(r) for r in self.rows)

    def pattern_csr(self) -> csr_matrix:
        indptr = np.zeros(self.nrows + 1, dtype=np.int64)
        cols: list[int] = []
        for i, row in enumerate(self.rows):
            sorted_cols = sorted(row)
            cols.extend(sorted_cols)
            indptr[i + 1] = indptr[i] + len(sorted_cols)
        data = np.ones(len(cols), dtype=np.int8)
        return csr_matrix(
            (data, np.asarray(cols, dtype=np.int64), indptr),
            shape=(self.nrows, self.ncols),
        )

    def col_support(self) -> list[list[int]]:
        cols: list[list[int]] = [[] for _ in range(self.ncols)]
        for i, row in enumerate(self.rows):
            for j in row:
                cols[j].append(i)
        return cols

    def submatrix(self, rows: Sequence[int], cols: Sequence[int]) -> "RatMatrix":
        col_map = {j: local for local, j in enumerate(cols)}
        out_rows = []
        for i in rows:
            src = self.rows[i]
            out_rows.append(
                {col_map[j]: v for j, v in src.items() if j in col_map}
            )
        return RatMatrix(
            nrows=len(rows),
            ncols=len(cols),
            rows=out_rows,
            row_ids=list(rows),
            col_ids=list(cols),
        )

    @staticmethod
    def from_triplets(
        nrows: int, ncols: int, triplets: Iterable[tuple[int, int, Fraction]]
    ) -> "RatMatrix":
        rows: list[dict[int, Fraction]] = [{} for _ in range(nrows)]
        for i, j, v in triplets:
            if v != 0:
                rows[i][j] = rows[i].get(j, Fraction(0)) + v
        for row in rows:
            dead = [j for j, v in row.items() if v == 0]
            for j in dead:
                del row[j]
        return RatMatrix(nrows=nrows, ncols=ncols, rows=rows)


def evaluate_matrix(
    pm: PolyMatrix, point: Sequence
) -> tuple[RatMatrix, set[tuple[int, int]]]:
    """Evaluate every entry at the point; return the rational matrix plus the
    positions that are nonzero as polynomials but vanish at the point."""
    cache: dict[Poly, Fraction] = {}
    rows: list[dict[int, Fraction]] = []
    ghosts: set[tuple[int, int]] = set()
    for i, row in enumerate(pm.row_entries):
        out: dict[int, Fraction] = {}
        for j, p in row.items():
            val = cache.get(p)
            if val is None:
                val = evaluate(p, point)
                cache[p] = val
            if val == 0:
                ghosts.add((i, j))
            else:
                out[j] = val
        rows.append(out)
    return RatMatrix(nrows=pm.nrows, ncols=pm.ncols, rows=rows), ghosts


@dataclass(frozen=True)
class NullColumns:
    count: int
    indices: tuple[int, ...]
    all_symbolically_null: bool


def null_columns(pm: PolyMatrix, rm: RatMatrix) -> NullColumns:
    """Columns of the evaluated matrix with no entries, and whether each one
    is also identically zero in the polynomial matrix."""
    seen_eval = [False] * rm.ncols
    for row in rm.rows:
        for j in row:
            seen_eval[j] = True
    seen_sym = [False] * pm.ncols
    for row in pm.row_entries:
        for j in row:
            seen_sym[j] = True
    idx = tuple(j for j in range(rm.ncols) if not seen_eval[j])
    all_sym = all(not seen_sym[j] for j in idx)
    return NullColumns(count=len(idx), indices=idx, all_symbolically_null=all_sym)


# -- matching and structural rank -------------------------------------------

def max_matching(rm: RatMatrix) -> dict[int, int]:
    """Maximum bipartite matching on the nonzero pattern, column -> row.

    Computed by Hopcroft-Karp and then certified maximum in pure Python by
    the absence of an augmenting path (see ``verify_maximum_matching``).
    """
    if rm.nnz() == 0:
        return {}
    pattern = rm.pattern_csr()
    row_of_col = maximum_bipartite_matching(pattern, perm_type="row")
    matching = {j: int(i) for j, i in enumerate(row_of_col) if i != -1}
    ok, reason = verify_maximum_matching(rm, matching)
    if not ok:
        raise AssertionError(f"matching engine returned a bad matching: {reason}")
    return matching


def _augment_all(nleft: int, adj: list[list[int]], nright: int) -> list[int]:
    """Depth-first maximum transversal with cheap assignment, augmenting from
    each left node in natural order; returns right -> left (-1 unmatched)."""
    jmatch = [-1] * nright
    cheap = [0] * nleft
    visited = [-1] * nleft
    js: list[int] = [0] * (nleft + 1)
    is_: list[int] = [0] * (nleft + 1)
    ps: list[int] = [0] * (nleft + 1)
    for k in range(nleft):
        found = False
        head = 0
        js[0] = k
        while head >= 0:
            j = js[head]
            neighbors = adj[j]
            if visited[j] != k:
                visited[j] = k
                p = cheap[j]
                while p < len(neighbors) and not found:
                    i = neighbors[p]
                    found = jmatch[i] == -1
                    p += 1
                cheap[j] = p
                if found:
                    is_[head] = i
                    break
                ps[head] = 0
            advanced = False
            for p in range(ps[head], len(neighbors)):
                i = neighbors[p]
                if visited[jmatch[i]] == k:
                    continue
                ps[head] = p + 1
                is_[head] = i
                head += 1
                js[head] = jmatch[i]
                advanced = True
                break
            if not advanced:
                head -= 1
        if found:
            for p in range(head, -1, -1):
                jmatch[is_[p]] = js[p]
    return jmatch


def dfs_matching(rm: RatMatrix, side: str = "cols") -> dict[int, int]:
    """Maximum matching by natural-order depth-first transversal.

    Augments column by column (or row by row with ``side="rows"``;
    ``side="auto"`` picks the side with fewer nonempty lines) in the style
    of the classic maximum-transversal codes behind block-triangular
    reordering tools, with cheap assignment before each depth-first search.
    The decomposition chain uses this engine so the block structure it
    discovers is reproducible.  Returns column -> row.
    """
    if side == "auto":
        n_nonempty_rows = sum(1 for row in rm.rows if row)
        n_nonempty_cols = rm.ncols - sum(
            1 for rows in rm.col_support() if not rows
        )
        side = "rows" if n_nonempty_rows < n_nonempty_cols else "cols"
    if side == "rows":
        adj = [sorted(row) for row in rm.rows]
        col_to_row = _augment_all(rm.nrows, adj, rm.ncols)
        matching = {j: i for j, i in enumerate(col_to_row) if i != -1}
    elif side == "cols":
        adj = [sorted(rows) for rows in rm.col_support()]
        row_to_col = _augment_all(rm.ncols, adj, rm.nrows)
        matching = {j: i for i, j in enumerate(row_to_col) if j != -1}
    else:
        raise ValueError("side must be 'rows', 'cols' or 'auto'")
    ok, reason = verify_maximum_matching(rm, matching)
    if not ok:
        raise AssertionError(f"dfs matching is not maximum: {reason}")
    return matching


def verify_maximum_matching(
    rm: RatMatrix, matching: dict[int, int]
) -> tuple[bool, str]:
    """Certify validity (edges exist, injective) and maximality (no
    augmenting alternating path from any unmatched row)."""
    match_row: dict[int, int] = {}
    for j, i in matching.items():
        if i < 0 or i >= rm.nrows or j not in rm.rows[i]:
            return False, f"matched pair ({i},{j}) is not an entry"
        if i in match_row:
            return False, f"row {i} matched twice"
        match_row[i] = j
    # BFS over alternating paths: row -> any column, column -> matched row
    visited_cols: set[int] = set()
    queue = deque(i for i in range(rm.nrows) if i not in match_row)
    seen_rows = set(queue)
    while queue:
        i = queue.popleft()
        for j in rm.rows[i]:
            if j in visited_cols:
                continue
            visited_cols.add(j)
            if j not in matching:
                return False, f"augmenting path reaches unmatched column {j}"
            nxt = matching[j]
            if nxt not in seen_rows:
                seen_rows.add(nxt)
                queue.append(nxt)
    return True, "ok"


def sprank(rm: RatMatrix) -> int:
    """Structural rank: size of a maximum matching on the nonzero pattern."""
    return len(max_matching(rm))


# -- Dulmage-Mendelsohn ------------------------------------------------------

@dataclass
class DmResult:
    """Coarse row/column partition plus the fine block-triangular refinement.

    Permutations list original indices in permuted order: rows as
    [underdetermined; well-determined; overdetermined matched; overdetermined
    unmatched], columns as [unmatched under; matched under; well; over].
    """

    nrows: int
    ncols: int
    matching: dict[int, int]
    sprank: int
    h_rows: list[int]
    h_cols_unmatched: list[int]
    h_cols_matched: list[int]
    s_rows: list[int]
    s_cols: list[int]
    v_rows_matched: list[int]
    v_rows_unmatched: list[int]
    v_cols: list[int]
    row_perm: list[int] = field(default_factory=list)
    col_perm: list[int] = field(default_factory=list)
    #: fine decomposition of the well-determined part: aligned (rows, cols)
    fine_blocks: list[tuple[list[int], list[int]]] = field(default_factory=list)

    @property
    def coarse_sizes(self) -> dict[str, int]:
        return {
            "underdetermined_rows": len(self.h_rows),
            "underdetermined_cols": len(self.h_cols_unmatched) + len(self.h_cols_matched),
            "well_determined": len(self.s_rows),
            "overdetermined_rows": len(self.v_rows_matched) + len(self.v_rows_unmatched),
            "overdetermined_cols": len(self.v_cols),
        }


def _alternating_reach_from_rows(
    rm: RatMatrix, match_row: dict[int, int], matching: dict[int, int]
) -> tuple[set[int], set[int]]:
    rows = set(i for i in range(rm.nrows) if i not in match_row)
    cols: set[int] = set()
    queue = deque(rows)
    while queue:
        i = queue.popleft()
        for j in rm.rows[i]:
            if j in cols:
                continue
            cols.add(j)
            nxt = matching.get(j)
            if nxt is not None and nxt not in rows:
                rows.add(nxt)
                queue.append(nxt)
    return rows, cols


def _alternating_reach_from_cols(
    rm: RatMatrix, matching: dict[int, int], col_rows: list[list[int]]
) -> tuple[set[int], set[int]]:
    cols = set(j for j in range(rm.ncols) if j not in matching)
    rows: set[int] = set()
    queue = deque(cols)
    match_row = {i: j for j, i in matching.items()}
    while queue:
        j = queue.popleft()
        for i in col_rows[j]:
            if i in rows:
                continue
            rows.add(i)
            nxt = match_row.get(i)
            if nxt is not None and nxt not in cols:
                cols.add(nxt)
                queue.append(nxt)
    return rows, cols


def dm_decompose(
    rm: RatMatrix,
    col_sort_key: Callable[[int], object] | None = None,
    prefer_cols_last: Sequence[int] = (),
    matching: dict[int, int] | None = None,
    matching_side: str = "cols",
) -> DmResult:
    """Coarse Dulmage-Mendelsohn partition plus fine block triangular form.

    The matching defaults to the natural-order depth-first transversal; a
    caller that already holds an aligned matching (e.g. for a square block
    inherited from a coarser decomposition) passes it in so the fine
    structure is computed against that diagonal.  The fine refinement orders
    the strongly connected components of the matching-directed graph so the
    form is upper block triangular; among the topologically free choices,
    sinks carrying ``prefer_cols_last`` columns (then larger, then smaller
    leading column) are pushed to the end.
    """
    if matching is None:
        matching = dfs_matching(rm, side=matching_side)
    else:
        ok, reason = verify_maximum_matching(rm, matching)
        if not ok:
            raise ValueError(f"supplied matching rejected: {reason}")
    match_row = {i: j for j, i in matching.items()}
    col_rows = rm.col_support()

    v_rows, v_cols = _alternating_reach_from_rows(rm, match_row, matching)
    h_rows, h_cols = _alternating_reach_from_cols(rm, matching, col_rows)
    if (v_rows & h_rows) or (v_cols & h_cols):
        raise AssertionError("overdetermined and underdetermined parts overlap")

    s_rows = [i for i in range(rm.nrows) if i not in v_rows and i not in h_rows]
    s_cols_set = {
        j for j in range(rm.ncols) if j not in v_cols and j not in h_cols
    }

    h_cols_unmatched = sorted(j for j in h_cols if j not in matching)
    h_cols_matched = sorted(j for j in h_cols if j in matching)
    v_cols_sorted = sorted(v_cols)
    v_rows_matched = [matching[j] for j in v_cols_sorted]
    v_rows_unmatched = sorted(set(v_rows) - set(v_rows_matched))
    s_cols = sorted(s_cols_set)

    fine = _fine_blocks(
        rm, matching, sorted(s_cols_set), col_sort_key, prefer_cols_last
    )

    h_rows_sorted = sorted(h_rows)
    s_rows_fine = [i for block_rows, _ in fine for i in block_rows]
    s_cols_fine = [j for _, block_cols in fine for j in block_cols]
    if set(s_rows_fine) != set(s_rows):
        raise AssertionError("fine blocks do not cover the well-determined rows")

    row_perm = h_rows_sorted + s_rows_fine + v_rows_matched + v_rows_unmatched
    col_perm = h_cols_unmatched + h_cols_matched + s_cols_fine + v_cols_sorted

    result = DmResult(
        nrows=rm.nrows,
        ncols=rm.ncols,
        matching=matching,
        sprank=len(matching),
        h_rows=h_rows_sorted,
        h_cols_unmatched=h_cols_unmatched,
        h_cols_matched=h_cols_matched,
        s_rows=s_rows_fine,
        s_cols=s_cols_fine,
        v_rows_matched=v_rows_matched,
        v_rows_unmatched=v_rows_unmatched,
        v_cols=v_cols_sorted,
        row_perm=row_perm,
        col_perm=col_perm,
        fine_blocks=fine,
    )
    # structural rank decomposes over the three coarse parts
    assert result.sprank == (
        len(h_cols_matched) + len(result.s_cols) + len(v_cols_sorted)
    )
    return result


def _fine_blocks(
    rm: RatMatrix,
    matching: dict[int, int],
    s_cols: list[int],
    col_sort_key: Callable[[int], object] | None,
    prefer_cols_last: Sequence[int],
) -> list[tuple[list[int], list[int]]]:
    """Upper block triangular refinement of the well-determined part via
    strongly connected components of the matching-directed column graph."""
    if not s_cols:
        return []
    s_set = set(s_cols)
    # directed graph on columns: j -> k when the row matched to j meets k
    adj: dict[int, list[int]] = {}
    for j in s_cols:
        r = matching[j]
        adj[j] = [k for k in rm.rows[r] if k != j and k in s_set]

    sccs = _tarjan_scc(s_cols, adj)

    # condensation with edge direction j-block -> k-block
    comp_of = {}
    for ci, comp in enumerate(sccs):
        for j in comp:
            comp_of[j] = ci
    out_edges: list[set[int]] = [set() for _ in sccs]
    in_edges: list[set[int]] = [set() for _ in sccs]
    for j in s_cols:
        for k in adj[j]:
            a, b = comp_of[j], comp_of[k]
            if a != b:
                out_edges[a].add(b)
                in_edges[b].add(a)

    prefer = set(prefer_cols_last)

    def desirability(ci: int) -> tuple:
        comp = sccs[ci]
        n_pref = sum(1 for j in comp if j in prefer)
        return (n_pref, len(comp), -min(comp))

    # peel sinks from the back so the most desirable sink lands last
    remaining = set(range(len(sccs)))
    live_out = [set(e) for e in out_edges]
    order_rev: list[int] = []
    sinks = {ci for ci in remaining if not live_out[ci]}
    while remaining:
        if not sinks:
            raise AssertionError("condensation is not acyclic")
        best = max(sinks, key=desirability)
        sinks.remove(best)
        remaining.remove(best)
        order_rev.append(best)
        for pred in in_edges[best]:
            if pred in remaining:
                live_out[pred].discard(best)
                if not live_out[pred]:
                    sinks.add(pred)
    order = list(reversed(order_rev))

    key = col_sort_key if col_sort_key is not None else (lambda j: j)
    blocks = []
    for ci in order:
        cols = sorted(sccs[ci], key=key)
        rows = [matching[j] for j in cols]
        blocks.append((rows, cols))
    return blocks


def _tarjan_scc(nodes: list[int], adj: dict[int, list[int]]) -> list[list[int]]:
    """Iterative Tarjan; components returned in discovery order."""
    index: dict[int, int] = {}
    lowlink: dict[int, int] = {}
    on_stack: set[int] = set()
    stack: list[int] = []
    sccs: list[list[int]] = []
    counter = 0

    for root in nodes:
        if root in index:
            continue
        work: list[list] = [[root, 0]]
        while work:
            frame = work[-1]
            v, pi = frame
            if pi == 0:
                index[v] = lowlink[v] = counter
                counter += 1
                stack.append(v)
                on_stack.add(v)
            neighbors = adj[v]
            descended = False
            while pi < len(neighbors):
                w = neighbors[pi]
                pi += 1
                if w not in index:
                    frame[1] = pi
                    work.append([w, 0])
                    descended = True
                    break
                if w in on_stack:
                    lowlink[v] = min(lowlink[v], index[w])
            if descended:
                continue
            work.pop()
            if lowlink[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                sccs.append(sorted(comp))
            if work:
                parent = work[-1][0]
                lowlink[parent] = min(lowlink[parent], lowlink[v])
    return sccs


def staircase_valid(rm: RatMatrix, dm: DmResult) -> tuple[bool, str]:
    """Check the zero regions implied by the decomposition, per coordinate."""
    h_cols = set(dm.h_cols_unmatched) | set(dm.h_cols_matched)
    s_cols = set(dm.s_cols)
    for i in dm.s_rows:
        if any(j in h_cols for j in rm.rows[i]):
            return False, f"well-determined row {i} meets an underdetermined column"
    for i in dm.v_rows_matched + dm.v_rows_unmatched:
        for j in rm.rows[i]:
            if j in h_cols or j in s_cols:
                return False, f"overdetermined row {i} meets column {j} outside its part"
    # fine staircase: each block's rows see no earlier block's columns
    seen: set[int] = set()
    for rows, cols in dm.fine_blocks:
        for i in rows:
            if any(j in seen for j in rm.rows[i]):
                return False, f"fine block row {i} reaches back into an earlier block"
        seen.update(cols)
    return True, "ok"


def overdetermined_square(rm: RatMatrix, dm: DmResult) -> tuple[list[int], list[int]]:
    """Matched square submatrix of the overdetermined part (rows, cols),
    aligned so the diagonal is structurally nonzero."""
    return list(dm.v_rows_matched), list(dm.v_cols)


# -- PQR extraction -----------------------------------------------------------

class RobustnessViolation(RuntimeError):
    """A symbolically nonzero entry landed inside the designated zero block."""

    def __init__(self, positions: list[tuple[int, int]]):
        super().__init__(
            f"{len(positions)} symbolic entries inside the zero block; first: "
            f"{positions[:5]}"
        )
        self.positions = positions


@dataclass
class PqrPartition:
    """Top-left square block P with its full-width zero block certificate.

    ``p_rows``/``p_cols`` are original matrix indices in final order; the row
    permutation lists P's rows first, the column permutation P's columns.
    """

    p_rows: list[int]
    p_cols: list[int]
    row_perm: list[int]
    col_perm: list[int]
    zero_block_shape: tuple[int, int]
    theta_in_zero_block: list[tuple[int, int]]

    @property
    def size(self) -> int:
        return len(self.p_rows)


def unknown_major_col_key(pm: PolyMatrix) -> Callable[[int], object]:
    """Within-block ordering of global columns: unknown first, the pinned
    first-order derivatives ahead of the rest, then graded order."""

    def key(j: int):
        cid: ColId = pm.cols[j]
        unknown_rank = 0 if cid.unknown == "z1" else 1
        if j < 6:
            return (unknown_rank, 0, j)
        return (unknown_rank, 1, index_of(cid.deriv))

    return key


def extract_pqr(
    pm: PolyMatrix,
    p_rows: list[int],
    p_cols: list[int],
) -> PqrPartition:
    """Apply the chosen block to the symbolic matrix and certify that the
    zero block carries no symbolically nonzero entry.

    Raises RobustnessViolation when an entry that vanishes at the evaluation
    point (but not as a polynomial) sits in the zero block.
    """
    p_col_set = set(p_cols)
    violations: list[tuple[int, int]] = []
    for i in p_rows:
        for j in pm.row_entries[i]:
            if j not in p_col_set:
                violations.append((i, j))
    rest_rows = [i for i in range(pm.nrows) if i not in set(p_rows)]
    rest_cols = [j for j in range(pm.ncols) if j not in p_col_set]
    partition = PqrPartition(
        p_rows=list(p_rows),
        p_cols=list(p_cols),
        row_perm=list(p_rows) + rest_rows,
        col_perm=list(p_cols) + rest_cols,
        zero_block_shape=(len(p_rows), pm.ncols - len(p_cols)),
        theta_in_zero_block=sorted(violations),
    )
    if violations:
        raise RobustnessViolation(partition.theta_in_zero_block)
    return partition


@dataclass(frozen=True)
class TargetColumnReport:
    ok: bool
    positions: dict[str, int]  # column label -> 1-based position within P


def target_column_check(pm: PolyMatrix, partition: PqrPartition) -> TargetColumnReport:
    """All six pinned first-derivative columns must lie inside P; report their
    1-based positions within P's column order."""
    labels = [
        "d1_z1", "d2_z1", "d3_z1", "d1_z2", "d2_z2", "d3_z2",
    ]
    pos = {}
    ok = True
    col_pos = {j: k for k, j in enumerate(partition.p_cols)}
    for j, label in enumerate(labels):
        if j in col_pos:
            pos[label] = col_pos[j] + 1
        else:
            ok = False
    return TargetColumnReport(ok=ok, positions=pos)
