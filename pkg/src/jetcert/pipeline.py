"""End-to-end certification: build, evaluate, structural analysis, exact
rank, and the JSON certificate.

The chain mirrors the block-triangular construction: prolong the eliminated
system, evaluate at the certification point, strip null columns, take the
level-(15,15,17) sub-selection, find the matched square block of its
overdetermined part, refine it into fine blocks, and certify the final
block's rank with exact modular arithmetic.  When the final block fails
exact certification, the pipeline quantifies the obstruction instead of
hiding it: it computes the exact column rank of the whole overdetermined
part (an upper bound for every support-closed block) and counts how many of
the six target directions fall outside its row space.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from . import __version__
from .multiindex import count_E, count_F, count_G, count_H
from .poly import DerivationParams
from .prolong import PolyMatrix, stats, submatrix_blocks
from .structural import (
    PqrPartition,
    RatMatrix,
    RobustnessViolation,
    dm_decompose,
    evaluate_matrix,
    extract_pqr,
    max_matching,
    null_columns,
    overdetermined_square,
    unknown_major_col_key,
    staircase_valid,
    target_column_check,
)
from .modrank import DEFAULT_PRIMES, PrimeField, RankCertificate, pivots_mod_p
from .system import (
    build_trajectory,
    crosscheck_explicit_system,
    eliminate_pressure,
    build_adjoint_system,
    verify_trajectory_pde,
)

#: The certification point: e = 0 (reciprocal remaining time), s = 1
#: (control amplitude scale), x = (1.1, 1.2, 1.3).
DEFAULT_POINT = (
    Fraction(0),
    Fraction(1),
    Fraction(11, 10),
    Fraction(12, 10),
    Fraction(13, 10),
)

#: Reference values reproduced by the main build (levels = 19 at the default
#: point).  Soft expectations; deviations are warnings with both values shown.
REFERENCE = {
    "rows": 30360,
    "cols": 29900,
    "a1_block": (8855, 14950),
    "evaluated_nnz": 651128,
    "avg_nnz_per_row": 21.44,
    "null_columns": 140,
    "sprank": 28654,
    "square_block": 9050,
    "fine_blocks": 352,
    "last_block": 7321,
    "target_positions": {
        "d1_z1": 1, "d2_z1": 2, "d3_z1": 3,
        "d1_z2": 3633, "d2_z2": 3634, "d3_z2": 3635,
    },
    "operator_order": 17,
}

SUB_LEVELS = (15, 15, 17)
SUB_COL_ORDER = 18


@dataclass
class Check:
    name: str
    status: str  # "pass" | "warn" | "fail"
    hard: bool
    expected: object
    actual: object
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "status": self.status,
            "hard": self.hard,
            "expected": self.expected,
            "actual": self.actual,
            "detail": self.detail,
        }


@dataclass
class StencilManifest:
    """Which derivative of which base equation forms each certified row, and
    which unknown derivatives form the columns."""

    rows: list[tuple[int, tuple[int, int, int, int]]]
    cols: list[tuple[str, tuple[int, int, int, int]]]
    max_row_level: int
    #: order of the solution operator: each row of the first two base
    #: equations carries one extra derivative from the pressure elimination
    operator_order: int

    def to_dict(self) -> dict:
        return {
            "rows": [[b, list(a)] for b, a in self.rows],
            "cols": [[u, list(d)] for u, d in self.cols],
            "max_row_level": self.max_row_level,
            "operator_order": self.operator_order,
        }


@dataclass
class CertifyResult:
    certificate: dict
    checks: list[Check]
    pm: PolyMatrix | None = None
    rm: RatMatrix | None = None
    p_rows: list[int] = field(default_factory=list)
    p_cols: list[int] = field(default_factory=list)
    #: full permutation data of both decompositions, for external tooling
    decomposition: dict | None = None

    @property
    def ok(self) -> bool:
        return all(c.status != "fail" for c in self.checks if c.hard)

    @property
    def exit_code(self) -> int:
        return 0 if self.ok else 1


def _check(
    checks: list[Check],
    name: str,
    hard: bool,
    expected,
    actual,
    good: bool | None = None,
    detail: str = "",
) -> None:
    if good is None:
        good = expected == actual
    if good:
        status = "pass"
    else:
        status = "fail" if hard else "warn"
    checks.append(Check(name, status, hard, expected, actual, detail))


def run_certify(
    levels: int = 19,
    params: DerivationParams | None = None,
    point: tuple = DEFAULT_POINT,
    primes: tuple[int, ...] = DEFAULT_PRIMES,
    threads: int = 1,
    keep_matrices: bool = False,
    progress=None,
) -> CertifyResult:
    """Run the full certification chain and assemble the certificate."""
    params = params or DerivationParams()
    point = tuple(Fraction(v) for v in point)
    checks: list[Check] = []
    notes: list[str] = []
    timings: dict[str, float] = {}
    say = progress or (lambda msg: None)
    at_reference = levels == 19 and point == DEFAULT_POINT

    def clock(name):
        timings[name] = time.time()

    def done(name):
        timings[name] = round(time.time() - timings[name], 2)

    # -- symbolic system ----------------------------------------------------
    say("building trajectory and eliminated system")
    clock("system")
    fields = build_trajectory(params)
    traj = verify_trajectory_pde(fields, params)
    _check(checks, "trajectory-divergence-free", True, True, traj.divergence.is_zero)
    _check(
        checks,
        "trajectory-momentum-residuals-zero",
        True,
        True,
        traj.residual1.is_zero and traj.residual2.is_zero,
    )
    eliminated = eliminate_pressure(build_adjoint_system(fields), params)
    crosscheck = crosscheck_explicit_system(eliminated)
    _check(
        checks,
        "explicit-system-crosscheck",
        True,
        0,
        len(crosscheck.undocumented),
        detail="undocumented coefficient deviations from the transcription",
    )
    done("system")

    # -- prolongation ---------------------------------------------------------
    say(f"prolonging to levels ({levels}, {levels}, {levels + 2})")
    clock("build")
    from .prolong import prolong

    pm = prolong(eliminated, levels, params, threads)
    done("build")
    st = stats(pm)
    _check(checks, "dimensions-rows", True, count_G(levels), pm.nrows)
    _check(checks, "dimensions-cols", True, count_H(levels), pm.ncols)
    blocks = submatrix_blocks(pm)
    a1 = blocks[0]
    _check(
        checks,
        "a1-block-dimensions",
        True,
        [count_F(levels), count_F(levels + 3)],
        [a1.nrows, a1.ncols],
    )

    # -- evaluation -----------------------------------------------------------
    say("evaluating at the certification point")
    clock("evaluate")
    rm, ghosts = evaluate_matrix(pm, point)
    done("evaluate")
    per_row = [len(r) for r in rm.rows]
    if at_reference:
        _check(checks, "evaluated-nnz", False, REFERENCE["evaluated_nnz"], rm.nnz())
        avg = round(rm.nnz() / pm.nrows, 2)
        _check(
            checks,
            "avg-nnz-per-row",
            False,
            REFERENCE["avg_nnz_per_row"],
            avg,
            good=abs(avg - REFERENCE["avg_nnz_per_row"]) <= 0.01,
        )

    nc = null_columns(pm, rm)
    _check(
        checks,
        "null-columns-symbolically-null",
        True,
        True,
        nc.all_symbolically_null,
    )
    if at_reference:
        _check(checks, "null-column-count", False, REFERENCE["null_columns"], nc.count)

    say("structural rank of the null-stripped matrix")
    clock("sprank")
    keep_cols = [j for j in range(rm.ncols) if j not in set(nc.indices)]
    n0 = rm.submatrix(list(range(rm.nrows)), keep_cols)
    sprank_n0 = len(max_matching(n0))
    done("sprank")
    if at_reference:
        _check(checks, "sprank", False, REFERENCE["sprank"], sprank_n0)

    # -- sub-selection and decomposition ---------------------------------------
    say("sub-selection and block triangular decomposition")
    clock("dm")
    lv12 = min(SUB_LEVELS[0], levels)
    lv3 = min(SUB_LEVELS[2], levels + 2)
    col_order = min(SUB_COL_ORDER, levels + 3)
    sub_rows = [
        i
        for i, rid in enumerate(pm.rows)
        if rid.applied.degree <= (lv12 if rid.base_eq in (1, 2) else lv3)
    ]
    sub_cols = [j for j, cid in enumerate(pm.cols) if cid.deriv.degree <= col_order]
    sub = rm.submatrix(sub_rows, sub_cols)
    key = unknown_major_col_key(pm)

    def sub_key(j: int):
        return key(sub.col_ids[j])

    dm1 = dm_decompose(sub, col_sort_key=sub_key, matching_side="rows")
    ok_stairs, why = staircase_valid(sub, dm1)
    _check(checks, "coarse-staircase-valid", True, True, ok_stairs, detail=why)
    vr, vc = overdetermined_square(sub, dm1)
    _check(
        checks,
        "overdetermined-square-matched",
        True,
        True,
        len(vr) == len(vc) and all(vc[k] in dm1.matching for k in range(len(vc))),
        detail="matched square block of the overdetermined part",
    )
    if at_reference:
        _check(checks, "square-block-size", False, REFERENCE["square_block"], len(vc))

    square = sub.submatrix(vr, vc)
    diag = {k: k for k in range(square.ncols)}
    gcols = [sub.col_ids[j] for j in vc]
    grows = [sub.row_ids[i] for i in vr]
    specials_local = [k for k, g in enumerate(gcols) if g < 6]
    dm2 = dm_decompose(
        square,
        col_sort_key=lambda j: sub_key(square.col_ids[j]),
        prefer_cols_last=specials_local,
        matching=diag,
    )
    fine_sizes = [len(c) for _, c in dm2.fine_blocks]
    if at_reference:
        _check(checks, "fine-block-count", False, REFERENCE["fine_blocks"], len(fine_sizes))
        _check(
            checks,
            "last-fine-block-size",
            False,
            REFERENCE["last_block"],
            fine_sizes[-1] if fine_sizes else 0,
        )
    done("dm")

    last_rows, last_cols = dm2.fine_blocks[-1] if dm2.fine_blocks else ([], [])
    btf_cols = [gcols[j] for j in last_cols]
    btf_rows = [grows[i] for i in last_rows]

    decomposition = {
        "subselection_rows": sub_rows,
        "subselection_cols": sub_cols,
        "coarse": {
            "row_perm": dm1.row_perm,
            "col_perm": dm1.col_perm,
            "boundaries": dm1.coarse_sizes,
            "matching_size": dm1.sprank,
        },
        "square_block": {
            "rows": [sub.row_ids[i] for i in vr],
            "cols": [sub.col_ids[j] for j in vc],
        },
        "fine": {
            "row_perm": dm2.row_perm,
            "col_perm": dm2.col_perm,
            "block_sizes": fine_sizes,
        },
    }

    # -- rank certification -----------------------------------------------------
    say("exact rank certification")
    clock("rank")
    attempts: list[dict] = []
    primes_used: list[int] = []
    sub_row_set = list(sub_rows)

    def candidates(cols: list[int]) -> list[int]:
        """Rows whose full symbolic support lies inside the given columns."""
        cset = set(cols)
        return [
            i for i in sub_row_set if all(j in cset for j in pm.row_entries[i])
        ]

    def rank_of(rows_: list[int], cols_: list[int], p: int):
        rect = rm.submatrix(rows_, cols_)
        rank, prow_loc, pcol_loc = pivots_mod_p(rect, PrimeField(p))
        if p not in primes_used:
            primes_used.append(p)
        return rank, [rows_[k] for k in prow_loc], pcol_loc

    p_rows: list[int] = list(btf_rows)
    p_cols: list[int] = list(btf_cols)
    best_rank = 0
    certified = False
    if btf_cols:
        # the block rows are exactly the rows supported inside the block
        # columns; retry once with the fallback prime before concluding
        block_cand = candidates(btf_cols)
        for p in primes[:2]:
            rank, rows_found, _ = rank_of(block_cand, btf_cols, p)
            attempts.append(
                {"target": "final-block", "cols": len(btf_cols),
                 "candidates": len(block_cand), "rank": rank, "prime": p}
            )
            best_rank = max(best_rank, rank)
            if rank == len(btf_cols):
                p_rows = rows_found
                certified = True
                break

    deficiency_analysis = None
    if not certified and vc:
        # the deficiency is analyzed against the whole overdetermined part:
        # its columns dominate every support-closed block, so its exact
        # column rank bounds any certifiable block, and the rank jump when
        # the six target unit vectors are stacked on top counts the target
        # directions that no block drawn from this part can reach
        say("final block deficient; running deficiency analysis")
        v_cols_sorted = sorted((sub.col_ids[j] for j in vc), key=key)
        v_rows_all = sorted(set(vr) | set(dm1.v_rows_unmatched))
        v_rows_global = [sub.row_ids[i] for i in v_rows_all]
        cols_pos = {g: k for k, g in enumerate(v_cols_sorted)}
        target_rows = [
            {cols_pos[t]: Fraction(1)} for t in range(6) if t in cols_pos
        ]
        base = rm.submatrix(v_rows_global, v_cols_sorted)
        stacked = RatMatrix(
            nrows=base.nrows + len(target_rows),
            ncols=base.ncols,
            rows=[dict(r) for r in base.rows] + target_rows,
        )
        v_ranks = {}
        jumps = {}
        for p in primes[:2]:
            v_rank, _, _ = rank_of(v_rows_global, v_cols_sorted, p)
            s_rank, _, _ = pivots_mod_p(stacked, PrimeField(p))
            v_ranks[p] = v_rank
            jumps[p] = s_rank - v_rank
        v_rank = max(v_ranks.values())
        jump = min(jumps.values())
        deficiency_analysis = {
            "overdetermined_part": [base.nrows, base.ncols],
            "column_rank_per_prime": {str(p): r for p, r in v_ranks.items()},
            "column_rank": v_rank,
            "column_deficiency": base.ncols - v_rank,
            "targets_outside_row_space_per_prime": {
                str(p): j for p, j in jumps.items()
            },
            "targets_outside_row_space": jump,
        }
        notes.append(
            "final block of the block-triangular form is rank-deficient at "
            "the certification point; the overdetermined part itself has "
            f"column rank {v_rank} < {base.ncols}, and {jump} of the six "
            "target directions lie outside its row space, so no "
            "support-closed block drawn from it can be both invertible and "
            "contain all six target columns"
        )
    done("rank")

    block_rank_cert = RankCertificate(
        nrows=len(p_rows),
        ncols=len(p_cols),
        method="mod-p",
        primes=primes_used,
        rank=len(p_cols) if certified else best_rank,
        conclusion="certified-full-rank" if certified else "certified-lower-bound",
        notes=[f"attempts: {attempts}"] if attempts else [],
    )
    _check(
        checks,
        "final-block-certified-full-rank",
        True,
        "certified-full-rank",
        block_rank_cert.conclusion,
    )
    if at_reference:
        _check(
            checks,
            "final-block-size",
            False,
            REFERENCE["last_block"],
            len(p_cols),
        )

    # -- robustness and target columns -----------------------------------------
    partition: PqrPartition | None = None
    if p_cols:
        try:
            partition = extract_pqr(pm, p_rows, p_cols)
            _check(checks, "theta-robustness", True, 0, 0,
                   detail="no symbolic entry in the zero block")
        except RobustnessViolation as exc:
            _check(
                checks,
                "theta-robustness",
                True,
                0,
                len(exc.positions),
                detail="symbolic entries inside the designated zero block",
            )
        if partition is not None:
            tc = target_column_check(pm, partition)
            _check(checks, "target-columns-inside-block", True, True, tc.ok)
            if at_reference:
                _check(
                    checks,
                    "target-column-positions",
                    False,
                    REFERENCE["target_positions"],
                    tc.positions,
                )
    else:
        _check(checks, "theta-robustness", True, 0, None,
               good=False, detail="no certified block")
        _check(checks, "target-columns-inside-block", True, True, False)

    # -- stencil manifest -------------------------------------------------------
    manifest = None
    if p_rows:
        rows_meta = [
            (pm.rows[i].base_eq, tuple(pm.rows[i].applied)) for i in p_rows
        ]
        cols_meta = [
            (pm.cols[j].unknown, tuple(pm.cols[j].deriv)) for j in p_cols
        ]
        max_level = max(sum(a) for _, a in rows_meta)
        order = max(
            sum(a) + (1 if b in (1, 2) else 0) for b, a in rows_meta
        )
        manifest = StencilManifest(
            rows=rows_meta,
            cols=cols_meta,
            max_row_level=max_level,
            operator_order=order,
        )
        if at_reference:
            _check(
                checks,
                "operator-order",
                False,
                REFERENCE["operator_order"],
                order,
            )

    notes.append(
        "column count uses derivatives through order levels+3; the shorter "
        "order printed alongside the unknown count in the source derivation "
        "is inconsistent with its own counting formula"
    )
    notes.append(
        "the certification point x = (1.1, 1.2, 1.3) is taken verbatim; the "
        "algebraic argument needs no containment in the physical cylinder"
    )
    for name, artifact in crosscheck_artifact_summary(crosscheck).items():
        notes.append(f"transcription artifact {name}: {artifact}")

    nnz_diff = None
    if at_reference and rm.nnz() != REFERENCE["evaluated_nnz"]:
        nnz_diff = {
            "per_row_nnz_min": min(per_row),
            "per_row_nnz_max": max(per_row),
            "rows_with_entries": sum(1 for c in per_row if c),
        }

    certificate = {
        "tool": {"name": "jetcert", "version": __version__},
        "parameters": {
            "levels": levels,
            "nu": f"{params.nu.numerator}/{params.nu.denominator}",
            "point": [f"{v.numerator}/{v.denominator}" for v in point],
            "primes": list(primes),
            "threads": threads,
        },
        "counts": {
            "E": {str(k): count_E(k) for k in (0, 15, 18, 19)},
            "F": {str(k): count_F(k) for k in (15, 18, 19, 21, 22)},
            "G": {str(k): count_G(k) for k in (15, 18, 19)},
            "H": {str(k): count_H(k) for k in (15, 18, 19)},
        },
        "dimensions": {"rows": pm.nrows, "cols": pm.ncols},
        "nnz": {
            "symbolic": st.nnz,
            "evaluated": rm.nnz(),
            "vanishing_at_point": len(ghosts),
            "avg_evaluated_per_row": round(rm.nnz() / pm.nrows, 4),
            "per_row_diff": nnz_diff,
        },
        "null_columns": {
            "count": nc.count,
            "all_symbolically_null": nc.all_symbolically_null,
        },
        "structural_rank_null_stripped": sprank_n0,
        "subselection": {"rows": sub.nrows, "cols": sub.ncols},
        "coarse": dm1.coarse_sizes,
        "fine": {
            "blocks": len(fine_sizes),
            "last_block": fine_sizes[-1] if fine_sizes else 0,
            "block_sizes_tail": fine_sizes[-5:],
        },
        "rank_attempts": attempts,
        "deficiency_analysis": deficiency_analysis,
        "final_block": {
            "size": len(p_cols),
            "zero_block": [len(p_rows), pm.ncols - len(p_cols)]
            if p_cols
            else None,
        },
        "rank_certificate": block_rank_cert.to_dict(),
        "target_columns": (
            target_column_check(pm, partition).positions if partition else {}
        ),
        "stencil_manifest": manifest.to_dict() if manifest else None,
        "timings_s": timings,
        "notes": notes,
        "checks": [c.to_dict() for c in checks],
        "conclusion": "pass"
        if all(c.status != "fail" for c in checks if c.hard)
        else "fail",
    }
    return CertifyResult(
        certificate=certificate,
        checks=checks,
        pm=pm if keep_matrices else None,
        rm=rm if keep_matrices else None,
        p_rows=p_rows,
        p_cols=p_cols,
        decomposition=decomposition,
    )


def crosscheck_artifact_summary(report) -> dict[str, int]:
    out: dict[str, int] = {}
    for rec in report.records:
        if rec.status.startswith("artifact:"):
            name = rec.status.split(":", 1)[1]
            out[name] = out.get(name, 0) + 1
    return out


def certificate_to_json(certificate: dict) -> str:
    return json.dumps(certificate, indent=2, sort_keys=True) + "\n"


def load_certificate(path: str | Path) -> dict:
    with open(path) as fh:
        return json.load(fh)
