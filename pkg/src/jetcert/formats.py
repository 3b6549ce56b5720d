"""Text serialization: the .polymtx format for symbolic matrices and a
rational-valued Matrix Market coordinate format for evaluated matrices.

Both writers emit deterministic, line-ending-normalized ASCII so rebuilt
artifacts are byte-identical and safe to content-hash.
"""

from __future__ import annotations

import hashlib
from fractions import Fraction
from pathlib import Path

from . import poly
from .multiindex import MultiIndex
from .poly import DerivationParams, Poly
from .prolong import ColId, PolyMatrix, RowId
from .structural import RatMatrix

__all__ = [
    "write_polymtx",
    "read_polymtx",
    "write_matrix_market",
    "read_matrix_market",
    "sha256_file",
]


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_polymtx(pm: PolyMatrix, path: str | Path) -> None:
    """Header `rows cols nnz`, one `row col <poly>` line per symbolic entry,
    then metadata tables mapping indices to row/column identities."""
    with open(path, "w", newline="\n") as fh:
        fh.write(f"{pm.nrows} {pm.ncols} {pm.nnz()}\n")
        for i, j, p in pm.triplets():
            fh.write(f"{i} {j} {poly.to_text(p)}\n")
        fh.write("rows-meta\n")
        for i, rid in enumerate(pm.rows):
            a = rid.applied
            fh.write(f"{i} {rid.base_eq} {a.a0} {a.a1} {a.a2} {a.a3}\n")
        fh.write("cols-meta\n")
        for j, cid in enumerate(pm.cols):
            d = cid.deriv
            fh.write(f"{j} {cid.unknown} {d.a0} {d.a1} {d.a2} {d.a3}\n")
        fh.write("rhs-cols-meta\n")
        for j, cid in enumerate(pm.rhs_cols):
            d = cid.deriv
            fh.write(f"{j} {cid.unknown} {d.a0} {d.a1} {d.a2} {d.a3}\n")
        rhs_nnz = sum(len(r) for r in pm.row_rhs)
        fh.write(f"rhs-entries {rhs_nnz}\n")
        for i, row in enumerate(pm.row_rhs):
            for j in sorted(row):
                fh.write(f"{i} {j} {poly.to_text(row[j])}\n")
        fh.write("build-meta\n")
        fh.write(f"levels {pm.n}\n")
        nu = pm.params.nu
        fh.write(f"nu {nu.numerator}/{nu.denominator}\n")


def read_polymtx(path: str | Path) -> PolyMatrix:
    with open(path) as fh:
        lines = fh.read().splitlines()
    pos = 0
    nrows, ncols, nnz = map(int, lines[pos].split())
    pos += 1
    entries = []
    for _ in range(nnz):
        i_s, j_s, rest = lines[pos].split(maxsplit=2)
        entries.append((int(i_s), int(j_s), poly.from_text(rest)))
        pos += 1

    def expect(tag: str) -> None:
        nonlocal pos
        if lines[pos] != tag:
            raise ValueError(f"expected {tag!r} at line {pos + 1}")
        pos += 1

    expect("rows-meta")
    rows: list[RowId] = []
    for _ in range(nrows):
        idx, base, a0, a1, a2, a3 = lines[pos].split()
        assert int(idx) == len(rows)
        rows.append(RowId(int(base), MultiIndex(int(a0), int(a1), int(a2), int(a3))))
        pos += 1
    expect("cols-meta")
    cols: list[ColId] = []
    for _ in range(ncols):
        idx, unknown, a0, a1, a2, a3 = lines[pos].split()
        assert int(idx) == len(cols)
        cols.append(ColId(unknown, MultiIndex(int(a0), int(a1), int(a2), int(a3))))
        pos += 1
    expect("rhs-cols-meta")
    rhs_cols: list[ColId] = []
    while not lines[pos].startswith("rhs-entries"):
        idx, unknown, a0, a1, a2, a3 = lines[pos].split()
        assert int(idx) == len(rhs_cols)
        rhs_cols.append(
            ColId(unknown, MultiIndex(int(a0), int(a1), int(a2), int(a3)))
        )
        pos += 1
    rhs_nnz = int(lines[pos].split()[1])
    pos += 1
    row_rhs: list[dict[int, Poly]] = [{} for _ in range(nrows)]
    for _ in range(rhs_nnz):
        i_s, j_s, rest = lines[pos].split(maxsplit=2)
        row_rhs[int(i_s)][int(j_s)] = poly.from_text(rest)
        pos += 1
    expect("build-meta")
    levels = int(lines[pos].split()[1])
    pos += 1
    nu = Fraction(lines[pos].split()[1])

    row_entries: list[dict[int, Poly]] = [{} for _ in range(nrows)]
    for i, j, p in entries:
        row_entries[i][j] = p
    return PolyMatrix(
        n=levels,
        params=DerivationParams(nu=nu),
        rows=rows,
        cols=cols,
        col_index={cid: j for j, cid in enumerate(cols)},
        row_entries=row_entries,
        rhs_cols=rhs_cols,
        rhs_index={cid: j for j, cid in enumerate(rhs_cols)},
        row_rhs=row_rhs,
    )


def write_matrix_market(
    rm: RatMatrix, path: str | Path, comments: tuple[str, ...] = ()
) -> None:
    """Coordinate format with exact rationals rendered as num/den, 1-based."""
    with open(path, "w", newline="\n") as fh:
        fh.write("%%MatrixMarket matrix coordinate rational general\n")
        for line in comments:
            fh.write(f"% {line}\n")
        fh.write(f"{rm.nrows} {rm.ncols} {rm.nnz()}\n")
        for i, row in enumerate(rm.rows):
            for j in sorted(row):
                v = row[j]
                fh.write(f"{i + 1} {j + 1} {v.numerator}/{v.denominator}\n")


def read_matrix_market(path: str | Path) -> RatMatrix:
    nrows = ncols = nnz = None
    rows: list[dict[int, Fraction]] = []
    seen = 0
    with open(path) as fh:
        header = fh.readline()
        if not header.startswith("%%MatrixMarket matrix coordinate"):
            raise ValueError("not a Matrix Market coordinate file")
        for line in fh:
            line = line.strip()
            if not line or line.startswith("%"):
                continue
            if nrows is None:
                nrows, ncols, nnz = map(int, line.split())
                rows = [{} for _ in range(nrows)]
                continue
            i_s, j_s, v_s = line.split()
            rows[int(i_s) - 1][int(j_s) - 1] = Fraction(v_s)
            seen += 1
    if nrows is None:
        raise ValueError("missing size line")
    if seen != nnz:
        raise ValueError(f"expected {nnz} entries, found {seen}")
    return RatMatrix(nrows=nrows, ncols=ncols, rows=rows)
