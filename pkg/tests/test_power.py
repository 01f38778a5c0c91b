import time

import numpy as np
import pytest

from tikhcond import (
    InputError,
    PowerOpts,
    StructuredMatrix,
    TikhonovProblem,
    ZeroDenominator,
    ZeroOperator,
    cond_exact,
    cond_power,
    estimate_componentwise_power,
    estimate_mixed_power,
    estimate_normwise_power,
    frechet_operator,
    gen_example,
)

from props import random_problem


def identity_problem(b):
    h = StructuredMatrix("symtoeplitz", 3, 3, np.eye(3)[0])
    return TikhonovProblem(None, b, 1.0, handle=h)


def test_identity_normwise_converges_at_once():
    op = frechet_operator(identity_problem(np.eye(3)[0]))
    # the parameter block of D phi vanishes, leaving [0, I/2]
    res = estimate_normwise_power(op, scaling=(1.0, 1.0), opts=PowerOpts(tol=1e-12))
    assert res.raw_norm == pytest.approx(0.5, rel=1e-14)
    assert res.iterations == 2  # the second step only confirms the first
    assert res.converged


def test_identity_mixed_is_one():
    op = frechet_operator(identity_problem(np.eye(3)[0]))
    assert estimate_mixed_power(op).estimate == pytest.approx(1.0, rel=1e-14)


def test_identity_uniform_solution_componentwise_equals_mixed():
    op = frechet_operator(identity_problem(np.ones(3)))
    mx = estimate_mixed_power(op).estimate
    cw = estimate_componentwise_power(op).estimate
    assert mx == pytest.approx(1.0, rel=1e-14)
    assert cw == pytest.approx(mx, rel=1e-14)


def test_random_toeplitz_normwise_sandwich():
    for seed in range(30):
        pr = random_problem(np.random.default_rng([seed, 31]), "toeplitz")
        op = frechet_operator(pr)
        smax = np.linalg.svd(op.matrix(), compute_uv=False)[0]
        res = estimate_normwise_power(op, scaling=(1.0, 1.0), opts=PowerOpts(seed=seed))
        assert smax / 10 <= res.raw_norm <= smax * (1 + 1e-3)


def test_normwise_with_restarts_never_far_below_exact():
    opts = PowerOpts(restarts=5)
    for seed in range(30):
        pr = random_problem(np.random.default_rng([seed, 32]), ("toeplitz", "hankel", "cauchy")[seed % 3])
        exact = cond_exact(pr).normwise
        est = estimate_normwise_power(frechet_operator(pr), opts=opts).estimate
        assert exact / 10 <= est <= exact * (1 + 1e-3)


def test_random_hankel_mixed_sandwich():
    for seed in range(30):
        pr = random_problem(np.random.default_rng([seed, 33]), "hankel")
        op = frechet_operator(pr)
        exact = cond_exact(pr).mixed
        est = estimate_mixed_power(op).estimate
        assert est <= exact * (1 + 1e-12)
        assert est >= exact / (op.k + pr.m)


def test_random_toeplitz_componentwise_within_factor():
    for seed in range(30):
        pr = random_problem(np.random.default_rng([seed, 34]), "toeplitz")
        op = frechet_operator(pr)
        exact = cond_exact(pr).componentwise
        est = estimate_componentwise_power(op).estimate
        assert exact / (op.k + pr.m) <= est <= exact * (1 + 1e-12)


def test_single_row_mixed_is_exact():
    # with one output row the 1-norm iteration lands on the only row
    for seed in range(20):
        pr = random_problem(np.random.default_rng([seed, 35]), ("toeplitz", "vandermonde")[seed % 2])
        pr = pr.replace(M=np.eye(pr.n)[[seed % pr.n]])
        est = estimate_mixed_power(frechet_operator(pr)).estimate
        assert est == pytest.approx(cond_exact(pr).mixed, rel=1e-12)


def test_toeplitz5_first_row_agreement():
    pr = gen_example("toeplitz5").problem(5.00e-4, M=np.eye(5)[[0]])
    exact = cond_exact(pr)
    op = frechet_operator(pr)
    t0 = time.perf_counter()
    m = estimate_mixed_power(op).estimate
    k = estimate_normwise_power(op).estimate
    assert time.perf_counter() - t0 < 0.1
    assert abs(m - exact.mixed) <= 5e-6 * exact.mixed
    assert exact.normwise / 10 <= k <= exact.normwise * (1 + 1e-3)


def test_toeplitz5_componentwise_within_factor_ten():
    pr = gen_example("toeplitz5").problem(4.9988e-4)
    est = estimate_componentwise_power(frechet_operator(pr)).estimate
    assert 1.6056e7 / 10 <= est <= 1.6056e7 * 10


def test_one_forward_and_one_adjoint_per_iteration():
    pr = gen_example("hankel6").problem(7.5918e-4)
    op = frechet_operator(pr)
    res = estimate_normwise_power(op, opts=PowerOpts(max_iters=6, tol=1e-300))
    assert res.iterations == 6
    assert res.forward_calls == 6 and res.adjoint_calls == 6
    res = estimate_mixed_power(op)
    assert res.forward_calls == res.adjoint_calls == res.iterations


def test_given_start_vector_and_restarts_take_max():
    op = frechet_operator(gen_example("toeplitz5").problem(4.9988e-4))
    single = estimate_normwise_power(op, opts=PowerOpts(init=np.ones(5), max_iters=1))
    many = estimate_normwise_power(op, opts=PowerOpts(init=np.ones(5), max_iters=1, restarts=4))
    assert many.raw_norm >= single.raw_norm
    with pytest.raises(InputError):
        estimate_normwise_power(op, opts=PowerOpts(init=np.ones(3)))


def test_zero_operator():
    # a zero selector row annihilates D phi
    pr = TikhonovProblem(np.eye(2), [1.0, 1.0], 1.0, M=np.zeros((1, 2)))
    op = frechet_operator(pr)
    with pytest.raises(ZeroOperator):
        estimate_normwise_power(op, scaling=(1.0, 1.0))


def test_zero_solution_component():
    pr = TikhonovProblem(np.diag([1.0, 2.0]), [1.0, 0.0], 0.5)
    op = frechet_operator(pr)
    with pytest.raises(ZeroDenominator) as info:
        estimate_componentwise_power(op)
    assert tuple(info.value.indices) == (1,)
    out = cond_power(pr)
    assert out.componentwise is None and out.undefined_components == (1,)


def test_options_validated():
    with pytest.raises(InputError):
        PowerOpts(max_iters=0)
    with pytest.raises(InputError):
        PowerOpts(tol=0.0)
    with pytest.raises(InputError):
        PowerOpts(init="zeros")


def test_cond_power_triple():
    out = cond_power(gen_example("vandermonde25x10").problem(5.69))
    ref = cond_exact(gen_example("vandermonde25x10").problem(5.69))
    assert out.method == "power" and out.structure == "vandermonde"
    assert out.mixed <= ref.mixed * (1 + 1e-12)
    assert ref.normwise / 10 <= out.normwise <= ref.normwise * (1 + 1e-3)
