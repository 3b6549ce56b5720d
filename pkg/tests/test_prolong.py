import random
from fractions import Fraction

import pytest

from jetcert import poly
from jetcert.multiindex import MultiIndex, count_F, count_G, count_H, index_of
from jetcert.poly import DerivationParams, Poly, derive_space, derive_time
from jetcert.prolong import (
    ColId,
    SPECIAL_COLS,
    build_main_matrix,
    column_universe,
    prolong,
    stats,
    submatrix_blocks,
)
from jetcert.system import build_eliminated_system, derive_equation

PARAMS = DerivationParams()


@pytest.fixture(scope="module")
def pm4():
    return build_main_matrix(n=4)


def test_dimensions_small():
    for n in (0, 1, 2, 3):
        pm = build_main_matrix(n=n)
        assert (pm.nrows, pm.ncols) == (count_G(n), count_H(n))


def test_level_zero_rows_are_the_base_system():
    pm = build_main_matrix(n=0)
    # the three level-0 rows carry the 12 + 12 + 2 base coefficients
    zero = MultiIndex(0, 0, 0, 0)
    base_rows = [i for i, rid in enumerate(pm.rows) if rid.applied == zero]
    assert [len(pm.row_entries[i]) for i in base_rows] == [12, 12, 2]
    # third equation prolonged two levels deeper: 17 rows total
    assert pm.nrows == 17 and pm.ncols == 70


def test_column_universe_layout():
    cols = column_universe(0)
    assert tuple(cols[:6]) == SPECIAL_COLS
    assert len(cols) == count_H(0)
    assert len(set(cols)) == len(cols)


def test_row_ordering_graded(pm4):
    for base in (1, 2, 3):
        rows = [rid for rid in pm4.rows if rid.base_eq == base]
        keys = [index_of(rid.applied) for rid in rows]
        assert keys == sorted(keys)
        assert keys == list(range(len(rows)))


def test_rows_prolong_the_scalar_residual(pm4):
    """Every row applied to random polynomial test functions must equal the
    corresponding derivative of the level-0 scalar residual (exact)."""
    random.seed(7)

    def rand_xpoly():
        terms = {}
        for _ in range(5):
            e = (0, 0, random.randint(0, 3), random.randint(0, 3), random.randint(0, 3))
            terms[e] = Fraction(random.randint(-5, 5))
        return Poly(terms)

    z = {"z1": rand_xpoly(), "z2": rand_xpoly()}

    def space_multi(p, mi):
        for axis, k in ((1, mi.a1), (2, mi.a2), (3, mi.a3)):
            for _ in range(k):
                p = derive_space(p, axis)
        return p

    base = build_eliminated_system(PARAMS)

    def residual(eq):
        out = poly.ZERO
        for (u, mi), coeff in eq.lhs.items():
            if mi.a0 > 0:
                continue  # time derivative of an x-only test function
            out = out + coeff * space_multi(z[u], mi)
        return out

    residuals = [residual(eq) for eq in base]

    def ring_multi(p, mi):
        for _ in range(mi.a0):
            p = derive_time(p, PARAMS)
        return space_multi(p, mi)

    for ridx, rid in enumerate(pm4.rows):
        lhs = poly.ZERO
        for j, coeff in pm4.row_entries[ridx].items():
            cid = pm4.cols[j]
            if cid.deriv.a0 > 0:
                continue
            lhs = lhs + coeff * space_multi(z[cid.unknown], cid.deriv)
        assert lhs == ring_multi(residuals[rid.base_eq - 1], rid.applied), rid


def test_prolong_matches_naive_derivation(pm4):
    """Rows equal naive repeated derive_equation along any axis order."""
    base = build_eliminated_system(PARAMS)
    random.seed(3)
    for _ in range(25):
        ridx = random.randrange(pm4.nrows)
        rid = pm4.rows[ridx]
        eq = base[rid.base_eq - 1]
        axes = []
        for axis, reps in enumerate(rid.applied):
            axes.extend([axis] * reps)
        random.shuffle(axes)  # mixed partials commute
        for axis in axes:
            eq = derive_equation(eq, axis, PARAMS)
        want = {
            (pm4.col_index[ColId(u, mi)]): c for (u, mi), c in eq.lhs.items()
        }
        assert pm4.row_entries[ridx] == want


def test_rhs_prolongation(pm4):
    # rhs of a derivative row is the derivative of the base rhs (constants)
    rid_idx = pm4.row_index[(3, MultiIndex(0, 1, 0, 0))]
    row_rhs = pm4.row_rhs[rid_idx]
    assert len(row_rhs) == 1
    (j, coeff), = row_rhs.items()
    assert pm4.rhs_cols[j] == ColId("phi4", MultiIndex(0, 1, 0, 0))
    assert coeff == poly.ONE


def test_stats_consistency(pm4):
    st = stats(pm4)
    assert st.nnz == pm4.nnz()
    assert st.avg_nnz_per_row == pytest.approx(st.nnz / pm4.nrows)
    assert 0 < st.density < 1


def test_submatrix_blocks_dimensions(pm4):
    blocks = submatrix_blocks(pm4)
    names = [b.name for b in blocks]
    assert names == ["A1", "B1", "A2", "B2", "A3", "B3"]
    for b in blocks:
        want_rows = count_F(4) if b.base_eq in (1, 2) else count_F(6)
        assert (b.nrows, b.ncols) == (want_rows, count_F(7))


def test_submatrix_blocks_reassemble(pm4):
    blocks = submatrix_blocks(pm4)
    rebuilt = [dict() for _ in range(pm4.nrows)]
    col_of = {}
    for j, cid in enumerate(pm4.cols):
        col_of[(cid.unknown, index_of(cid.deriv))] = j
    for b in blocks:
        for local_row, row in zip(b.global_rows, b.entries):
            for local_col, p in row.items():
                rebuilt[local_row][col_of[(b.unknown, local_col)]] = p
    assert rebuilt == pm4.row_entries


def test_thread_count_does_not_change_output(tmp_path):
    from jetcert.formats import write_polymtx

    paths = []
    for t in (1, 3):
        pm = build_main_matrix(n=3, threads=t)
        path = tmp_path / f"t{t}.polymtx"
        write_polymtx(pm, path)
        paths.append(path.read_bytes())
    assert paths[0] == paths[1]


def test_rebuild_is_deterministic(tmp_path):
    from jetcert.formats import write_polymtx

    blobs = []
    for _ in range(2):
        pm = build_main_matrix(n=2)
        path = tmp_path / "out.polymtx"
        write_polymtx(pm, path)
        blobs.append(path.read_bytes())
    assert blobs[0] == blobs[1]


def test_invalid_inputs():
    base = build_eliminated_system(PARAMS)
    with pytest.raises(ValueError):
        prolong(base, -1, PARAMS)
    with pytest.raises(ValueError):
        prolong(base[:2], 1, PARAMS)
