from fractions import Fraction

import pytest

from jetcert import poly
from jetcert.multiindex import MultiIndex
from jetcert.poly import DerivationParams, Poly, S, X1, X2, X3, constant
from jetcert.system import (
    Equation,
    PressureEliminationError,
    TrajectoryFields,
    build_adjoint_system,
    build_eliminated_system,
    build_trajectory,
    crosscheck_explicit_system,
    derive_equation,
    eliminate_pressure,
    verify_trajectory_pde,
)

PARAMS = DerivationParams()
M = MultiIndex


@pytest.fixture(scope="module")
def fields():
    return build_trajectory(PARAMS)


@pytest.fixture(scope="module")
def eliminated():
    return build_eliminated_system(PARAMS)


def test_trajectory_closed_forms(fields):
    r2 = X1 * X1 + X2 * X2
    assert fields.ybar1 == (S * X1 * X3 * r2).scale(2)
    assert fields.ybar2 == (S * X2 * X3 * r2).scale(2)
    assert fields.ybar3 == (S * r2 * X3 * X3).scale(-4)


def test_trajectory_divergence_free(fields):
    chk = verify_trajectory_pde(fields, PARAMS)
    assert chk.divergence.is_zero


def test_trajectory_momentum_residuals_vanish(fields):
    chk = verify_trajectory_pde(fields, PARAMS)
    assert chk
    assert chk.residual1.is_zero and chk.residual2.is_zero


def test_trajectory_vanishes_without_amplitude(fields):
    # every component carries the amplitude factor S
    for comp in (fields.ybar1, fields.ybar2, fields.ybar3):
        assert all(e[1] >= 1 for e in comp.terms)


def test_perturbed_trajectory_fails(fields):
    bad = TrajectoryFields(
        ybar1=fields.ybar1 + X1,
        ybar2=fields.ybar2,
        ybar3=fields.ybar3,
        pbar_x1=fields.pbar_x1,
        pbar_x2=fields.pbar_x2,
    )
    chk = verify_trajectory_pde(bad, PARAMS)
    assert not chk
    assert not chk.residual1.is_zero or not chk.divergence.is_zero


def test_zero_trajectory_passes():
    zero = TrajectoryFields(poly.ZERO, poly.ZERO, poly.ZERO, poly.ZERO, poly.ZERO)
    assert verify_trajectory_pde(zero, PARAMS)


def test_adjoint_pressure_coefficient(fields):
    adj = build_adjoint_system(fields)
    assert adj[0].lhs[("pi", M(0, 1, 0, 0))] == constant(-1)
    assert adj[1].lhs[("pi", M(0, 0, 1, 0))] == constant(-1)
    assert adj[2].lhs[("pi", M(0, 0, 0, 1))] == constant(-1)


def test_adjoint_zeroth_order_coefficient(fields):
    # coefficient of z1 itself in row 1 is d(ybar1)/dx1 = 2 S X3 (3X1^2 + X2^2)
    adj = build_adjoint_system(fields)
    want = Poly({(0, 1, 2, 0, 1): Fraction(6), (0, 1, 0, 2, 1): Fraction(2)})
    assert adj[0].lhs[("z1", M(0, 0, 0, 0))] == want


def test_adjoint_divergence_row(fields):
    adj = build_adjoint_system(fields)
    assert adj[3].lhs == {
        ("z1", M(0, 1, 0, 0)): constant(-1),
        ("z2", M(0, 0, 1, 0)): constant(-1),
    }


def test_eliminated_third_equation_unchanged(eliminated):
    assert eliminated[2].lhs == {
        ("z1", M(0, 1, 0, 0)): constant(-1),
        ("z2", M(0, 0, 1, 0)): constant(-1),
    }
    assert eliminated[2].rhs == {("phi4", M(0, 0, 0, 0)): poly.ONE}


def test_eliminated_mixed_time_term(eliminated):
    assert eliminated[0].lhs[("z1", M(1, 0, 0, 1))] == constant(-1)
    assert eliminated[1].lhs[("z2", M(1, 0, 0, 1))] == constant(-1)


def test_eliminated_orders(eliminated):
    for eq, max_order in zip(eliminated, (3, 3, 1)):
        assert max(mi.degree for _, mi in eq.lhs) == max_order


def test_pressure_fully_eliminated(eliminated):
    for eq in eliminated:
        assert all(unknown in ("z1", "z2") for unknown, _ in eq.lhs)


def test_elimination_detects_wiring_bug(fields):
    adj = build_adjoint_system(fields)
    # corrupt the third row's pressure coefficient so cancellation fails
    broken = Equation(
        lhs={**adj[2].lhs, ("pi", M(0, 0, 0, 1)): constant(-2)},
        rhs=dict(adj[2].rhs),
    )
    with pytest.raises(PressureEliminationError):
        eliminate_pressure([adj[0], adj[1], broken, adj[3]], PARAMS)


def test_eliminated_rhs_structure(eliminated):
    assert eliminated[0].rhs == {
        ("phi1", M(0, 0, 0, 1)): poly.ONE,
        ("phi3", M(0, 1, 0, 0)): constant(-1),
    }
    assert eliminated[1].rhs == {
        ("phi2", M(0, 0, 0, 1)): poly.ONE,
        ("phi3", M(0, 0, 1, 0)): constant(-1),
    }


def test_eliminated_entry_counts(eliminated):
    # 12 + 12 + 2 distinct coefficient entries in the three equations
    assert [len(eq.lhs) for eq in eliminated] == [12, 12, 2]


def test_crosscheck_specific_coefficients(eliminated):
    eq1, eq2, _ = eliminated
    assert eq1.lhs[("z1", M(0, 0, 0, 1))] == Poly(
        {(0, 1, 2, 0, 1): Fraction(14), (0, 1, 0, 2, 1): Fraction(10)}
    )
    assert eq1.lhs[("z1", M(0, 0, 0, 2))] == Poly(
        {(0, 1, 2, 0, 2): Fraction(4), (0, 1, 0, 2, 2): Fraction(4)}
    )
    assert eq2.lhs[("z2", M(0, 0, 1, 0))] == Poly(
        {(0, 1, 2, 1, 0): Fraction(-4), (0, 1, 0, 3, 0): Fraction(-4)}
    )


def test_crosscheck_full_match_with_documented_artifacts(eliminated):
    report = crosscheck_explicit_system(eliminated)
    assert report.ok
    assert not report.undocumented
    artifact_names = sorted(
        {r.status.split(":", 1)[1] for r in report.records if ":" in r.status}
    )
    assert artifact_names == [
        "eq1-dangling-subscript",
        "eq1-third-derivative-subscript-misprint",
        "eq2-missing-amplitude-factor",
    ]


def test_crosscheck_flags_planted_corruption(eliminated):
    eq1 = eliminated[0]
    key = ("z1", M(0, 1, 0, 0))
    corrupted = Equation(
        lhs={**eq1.lhs, key: eq1.lhs[key].scale(-1)},  # sign flip
        rhs=dict(eq1.rhs),
    )
    report = crosscheck_explicit_system([corrupted, eliminated[1], eliminated[2]])
    assert not report.ok
    assert any(
        r.status == "mismatch" and (r.unknown, r.deriv) == key for r in report.records
    )


def test_derive_equation_constant_row(eliminated):
    d = derive_equation(eliminated[2], 1, PARAMS)
    assert d.lhs == {
        ("z1", M(0, 2, 0, 0)): constant(-1),
        ("z2", M(0, 1, 1, 0)): constant(-1),
    }
    assert d.level == 1


def test_derive_equation_product_rule():
    coeff = S * (X1 * X1).scale(3)
    eq = Equation(lhs={("z1", M(0, 1, 0, 0)): coeff}, rhs={})
    d = derive_equation(eq, 1, PARAMS)
    assert d.lhs[("z1", M(0, 1, 0, 0))] == S * X1.scale(6)
    assert d.lhs[("z1", M(0, 2, 0, 0))] == coeff


def test_derive_equation_mixed_partials_commute(eliminated):
    a = derive_equation(derive_equation(eliminated[0], 1, PARAMS), 3, PARAMS)
    b = derive_equation(derive_equation(eliminated[0], 3, PARAMS), 1, PARAMS)
    assert a.lhs == b.lhs and a.rhs == b.rhs


def test_elimination_invariant_under_assembly_order(fields):
    # rebuilding everything twice gives identical coefficient maps
    a = build_eliminated_system(PARAMS)
    b = eliminate_pressure(build_adjoint_system(fields), PARAMS)
    for ea, eb in zip(a, b):
        assert ea.lhs == eb.lhs and ea.rhs == eb.rhs
