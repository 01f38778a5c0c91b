import json

import numpy as np
import pytest

from tikhcond import (
    BasisMismatch,
    ConditionTriple,
    MNotSingleRow,
    SizeCapExceeded,
    StructuredMatrix,
    TikhonovProblem,
    ZeroDenominator,
    canonical_basis,
    componentwise_ratio,
    cond_cauchy,
    cond_exact,
    cond_single_component,
    cond_structured_linear,
    cond_unstructured,
    cond_vandermonde,
    fd_condition_oracle,
    frechet_linear,
    frechet_operator,
    gen_example,
    materialize,
)

from props import central_difference, check_adjoint, check_full_basis_collapse, \
    check_single_component, check_structured_le_unstructured, random_problem

RTOL = 5e-3


def identity_problem(n=3, b=None, M=None):
    b = np.eye(n)[0] if b is None else b
    h = StructuredMatrix("symtoeplitz", n, n, np.eye(n)[0])
    return TikhonovProblem(None, b, 1.0, M=M, handle=h)


def rel(a, b):
    return abs(a - b) / abs(b)


# ---------------------------------------------------------------------------
# hand-checkable cases


def test_identity_symmetric_basis_cancels():
    pr = identity_problem()
    op = frechet_linear(pr, canonical_basis("symtoeplitz", 3, 3))
    np.testing.assert_allclose(op.jacobian(), 0, atol=1e-16)
    db = np.array([0.3, -1.0, 2.0])
    u = np.concatenate([np.zeros(op.k), db])
    np.testing.assert_allclose(op.forward(u), db / 2, rtol=1e-15)


def test_identity_unstructured_mixed_is_one():
    assert cond_unstructured(identity_problem()).mixed == pytest.approx(1.0, rel=1e-14)


def test_identity_single_component_closed_form():
    pr = identity_problem(M=np.eye(3)[[0]])
    out = cond_single_component(pr)
    d = np.eye(3)[0] / 2  # the row of P A^T = I/2
    a_b = np.concatenate([np.eye(3)[0], np.eye(3)[0]])
    expected = np.sqrt(0 + d @ d) * np.linalg.norm(a_b) / 0.5
    assert out.normwise == pytest.approx(expected, rel=1e-14)
    assert out.method == "closed-form"


def test_single_component_requires_one_row():
    with pytest.raises(MNotSingleRow):
        cond_single_component(identity_problem())


def test_cauchy_one_by_one_against_hand_values():
    h = StructuredMatrix.cauchy([2.0], [1.0])
    pr = TikhonovProblem(None, [1.0], 1.0, L=[[1.0]], handle=h)
    # A = 1, x = b / 2, r = b / 2; dA/du = -1, dA/dv = 1
    # x(u, v, b) = A b / (A^2 + 1) so dx/dA = b (1 - A^2) / (A^2 + 1)^2 = 0 at A = 1
    op = frechet_operator(pr)
    np.testing.assert_allclose(op.matrix(), [[0.0, 0.0, 0.5]], atol=1e-16)
    u = np.array([0.3, -0.2, 0.7])
    fd = central_difference(pr, h, u, 1e-6)
    np.testing.assert_allclose(op.forward(u), fd, atol=1e-8)


def test_vandermonde_single_row_has_no_parameter_part():
    h = StructuredMatrix("vandermonde", 1, 1, [0.7])
    pr = TikhonovProblem(None, [2.0], 0.5, handle=h)
    op = frechet_operator(pr)
    np.testing.assert_array_equal(op.jacobian(), 0)


# ---------------------------------------------------------------------------
# reference examples


def test_toeplitz5_structured():
    out = cond_exact(gen_example("toeplitz5").problem(4.9988e-4))
    assert out.structure == "symtoeplitz"
    assert rel(out.normwise, 1.3242e3) <= RTOL
    assert rel(out.mixed, 4.4971) <= RTOL
    assert rel(out.componentwise, 1.6056e7) <= RTOL


def test_toeplitz5_unstructured():
    out = cond_unstructured(gen_example("toeplitz5").problem(4.9988e-4))
    assert rel(out.normwise, 4.4761e3) <= RTOL
    assert rel(out.mixed, 2.0035e3) <= RTOL
    assert rel(out.componentwise, 1.6064e7) <= RTOL


def test_toeplitz5_frechet_matrix_norm():
    pr = gen_example("toeplitz5").problem(4.9988e-4)
    op = frechet_operator(pr)
    val = np.linalg.norm(op.matrix(), 2) * np.linalg.norm(op.data) / np.linalg.norm(op.x)
    assert rel(val, 1.3242e3) <= RTOL


def test_hankel6():
    out = cond_exact(gen_example("hankel6").problem(7.5918e-4))
    assert rel(out.normwise, 1.0372e3) <= RTOL
    assert rel(out.mixed, 3.4999) <= RTOL
    assert rel(out.componentwise, 1.1576e7) <= RTOL


def test_vandermonde25x10():
    pr = gen_example("vandermonde25x10").problem(5.69)
    out = cond_vandermonde(pr)
    assert rel(out.normwise, 1.2499e1) <= RTOL
    assert rel(out.mixed, 2.0828e1) <= RTOL
    assert rel(out.componentwise, 4.0178e1) <= RTOL


def test_cauchy10x8_unstructured_normwise_mixed():
    out = cond_unstructured(gen_example("cauchy10x8").problem(1.72))
    assert rel(out.normwise, 27.426) <= RTOL
    assert rel(out.mixed, 10.465) <= RTOL


def test_cauchy10x8_structured_normwise_mixed():
    ex = gen_example("cauchy10x8")
    out = cond_cauchy(ex.problem(1.72), ex.handle.u, ex.handle.v)
    assert rel(out.normwise, 54.144) <= RTOL
    assert rel(out.mixed, 7.2573) <= RTOL


def test_cauchy10x8_componentwise_tracks_lambda():
    # the componentwise value is the most lambda-sensitive cell; at the
    # unrounded parameter all cells agree to about 1e-5
    ex = gen_example("cauchy10x8")
    out = cond_exact(ex.problem(1.72273))
    assert rel(out.componentwise, 390.86) <= 1e-3
    assert rel(out.normwise, 54.144) <= 1e-3
    assert rel(cond_unstructured(ex.problem(1.72273)).componentwise, 870.45) <= 1e-3


def test_toeplitz5_single_row_closed_form_matches_general():
    pr = gen_example("toeplitz5").problem(5.0e-4, M=np.eye(5)[[0]])
    fast = cond_single_component(pr)
    ref = cond_exact(pr)
    assert rel(fast.normwise, ref.normwise) <= 1e-10
    assert rel(fast.mixed, ref.mixed) <= 1e-10


def test_toeplitz5_third_row_against_difference_jacobian():
    # an independent Jacobian from central differences of a stacked solve
    pr = gen_example("toeplitz5").problem(5.0e-4, M=np.eye(5)[[2]])
    op = frechet_operator(pr)
    J = np.column_stack([central_difference(pr, pr.handle, e, 1e-7) for e in np.eye(op.dim)])
    d = op.data
    out = cond_exact(pr)
    assert rel(out.normwise, np.linalg.norm(J, 2) * np.linalg.norm(d) / np.linalg.norm(op.Mx)) <= 1e-6
    assert rel(out.mixed, (np.abs(J) @ np.abs(d)).max() / np.abs(op.Mx).max()) <= 1e-6


# ---------------------------------------------------------------------------
# structure handling and error paths


def test_structure_dispatch_from_dense():
    pr = gen_example("hankel6").problem(1e-3)
    dense = TikhonovProblem(pr.A, pr.b, pr.lam)
    a = cond_exact(dense, "hankel")
    b = cond_exact(pr)
    assert rel(a.normwise, b.normwise) <= 1e-12
    assert cond_exact(dense).structure == "unstructured"
    assert cond_exact(pr, "none").structure == "unstructured"


def test_basis_mismatch():
    pr = gen_example("toeplitz5").problem(1e-3)
    with pytest.raises(BasisMismatch):
        cond_structured_linear(pr, canonical_basis("hankel", 5, 5))


def test_componentwise_ratio_conventions():
    val, bad = componentwise_ratio(np.array([1.0, 2.0, 0.0]), np.array([1.0, 0.0, 0.0]))
    assert val is None and bad == (1,)
    val, bad = componentwise_ratio(np.array([1.0, 0.0]), np.array([2.0, 0.0]))
    assert val == 0.5 and bad == ()
    t = ConditionTriple("unstructured", "exact", 1.0, 1.0, None, (1,))
    assert json.loads(t.to_json())["undefined_components"] == [1]


def test_componentwise_zero_over_zero_is_dropped():
    # x_2 = 0 exactly and no nonzero data entry reaches it
    A = np.diag([1.0, 2.0])
    pr = TikhonovProblem(A, [1.0, 0.0], 0.5)
    out = cond_unstructured(pr)
    assert out.undefined_components == ()
    assert out.componentwise == pytest.approx(out.mixed, rel=1e-14)
    from tikhcond import estimate_componentwise_power
    with pytest.raises(ZeroDenominator):
        estimate_componentwise_power(frechet_operator(pr))


def test_size_cap_and_blockwise_route():
    pr = gen_example("vandermonde25x10").problem(5.69)
    with pytest.raises(SizeCapExceeded):
        cond_unstructured(pr, size_cap=100)
    a = cond_unstructured(pr)
    b = cond_unstructured(pr, size_cap=100, blockwise=True)
    assert rel(b.normwise, a.normwise) <= 1e-10
    assert rel(b.mixed, a.mixed) <= 1e-12
    assert rel(b.componentwise, a.componentwise) <= 1e-12


def test_report_fields():
    out = cond_exact(gen_example("toeplitz5").problem(4.9988e-4))
    d = out.to_dict()
    assert set(d) == {"structure", "method", "normwise", "mixed", "componentwise",
                      "undefined_components"}
    assert d["method"] == "exact"
    s = out.scaled(1e-8)
    assert s.mixed == pytest.approx(out.mixed * 1e-8)
    assert isinstance(s, ConditionTriple)


def test_componentwise_dominates_mixed_on_random_problems():
    for seed in range(30):
        pr = random_problem(np.random.default_rng([seed, 31]), ("toeplitz", "vandermonde", "cauchy")[seed % 3])
        out = cond_exact(pr)
        assert out.componentwise >= out.mixed * (1 - 1e-12)


def test_scaling_b_changes_values_as_formulas_dictate():
    # x and r scale with b, so Dphi's parameter block scales and the b block does not
    pr = gen_example("hankel6").problem(1e-2)
    op1 = frechet_operator(pr)
    op2 = frechet_operator(pr.replace(b=3.0 * pr.b))
    J1, J2 = op1.matrix(), op2.matrix()
    np.testing.assert_allclose(J2[:, :op1.k], 3 * J1[:, :op1.k], rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(J2[:, op1.k:], J1[:, op1.k:], rtol=1e-10, atol=1e-14)
    out2 = cond_exact(pr.replace(b=3.0 * pr.b))
    num = np.abs(J2) @ np.abs(op2.data)
    assert rel(out2.mixed, num.max() / np.abs(op2.Mx).max()) <= 1e-12


# ---------------------------------------------------------------------------
# sampling oracle


def test_oracle_identity_case():
    pr = identity_problem()
    out = fd_condition_oracle(pr, "none", n_samples=200)
    assert out.mixed == pytest.approx(1.0, rel=1e-6)


def test_oracle_lower_bounds_exact():
    for seed in range(5):
        pr = random_problem(np.random.default_rng([seed, 41]), "toeplitz")
        ex = cond_exact(pr)
        lo = fd_condition_oracle(pr, n_samples=300, seed=seed)
        assert lo.normwise <= ex.normwise * (1 + 1e-5)
        assert lo.mixed <= ex.mixed * (1 + 1e-5)


def test_oracle_reaches_toeplitz5_mixed():
    pr = gen_example("toeplitz5").problem(4.9988e-4)
    lo = fd_condition_oracle(pr, n_samples=10_000)
    assert lo.mixed >= 0.3 * cond_exact(pr).mixed


# ---------------------------------------------------------------------------
# seeded suites


def test_adjoint_identity_suite():
    out = check_adjoint()
    assert out.passed, out.line()


def test_structured_not_above_unstructured_suite():
    out = check_structured_le_unstructured()
    assert out.passed, out.line()


def test_full_basis_collapse_suite():
    out = check_full_basis_collapse()
    assert out.passed, out.line()


def test_single_component_suite():
    out = check_single_component()
    assert out.passed, out.line()


def test_general_linear_user_basis():
    from tikhcond import LinearBasis

    rng = np.random.default_rng(8)
    B = LinearBasis(rng.standard_normal((3, 5, 4)))
    h = StructuredMatrix.general(B, rng.standard_normal(3))
    pr = TikhonovProblem(materialize(h), rng.standard_normal(5), 0.3, handle=h)
    op = frechet_operator(pr)
    u = rng.standard_normal(op.dim)
    fd = central_difference(pr, h, u, 1e-6)
    assert np.linalg.norm(op.forward(u) - fd) <= 1e-6 * np.linalg.norm(fd)
