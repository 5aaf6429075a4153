import warnings
from fractions import Fraction

import numpy as np
import pytest

from dalyap.catalog import example_map
from dalyap.errors import NoConvergence, NotAContraction, NotCenteredAtOrigin
from dalyap.lyapunov import (DirectSum, PerDegreeSolve, Picard, check_hypotheses,
                             conjugate_by_scale, default_direct_sum_terms, layer_residuals,
                             orbit_sum, positivity_probe, residual, solve_embryo)
from dalyap.polymap import PolyMap, parse_map
from dalyap.series import TruncatedSeries, squared_norm_series
from oracles import F1, F3, F4, F5, exact_embryo_diagonal


def fd(V):
    return V.to_float_dict()


def rel_agree(A, B):
    """Worst coefficientwise relative disagreement (missing terms count as 1)."""
    worst = 0.0
    for j in set(A) | set(B):
        a, b = A.get(j, 0.0), B.get(j, 0.0)
        if a == b:
            continue
        worst = max(worst, abs(a - b) / max(abs(a), abs(b)))
    return worst


def layer_aware(A, B):
    """Relative error for coefficients above 1e-16 of their layer maximum,
    error relative to the layer maximum for the rest."""
    lm = {}
    for j, v in A.items():
        lm[sum(j)] = max(lm.get(sum(j), 0.0), abs(v))
    worst = 0.0
    for j in set(A) | set(B):
        a, b = A.get(j, 0.0), B.get(j, 0.0)
        L = lm.get(sum(j), 1.0)
        den = abs(a) if abs(a) >= 1e-16 * L else L
        worst = max(worst, abs(a - b) / den)
    return worst


# ----------------------------------------------------------- hypotheses

def test_check_hypotheses_examples():
    assert check_hypotheses(example_map(1)) == 0.5
    assert check_hypotheses(example_map(3)) == 0.0
    with pytest.raises(NotAContraction) as info:
        check_hypotheses(example_map(2))
    assert info.value.norm == pytest.approx(1.0, abs=1e-10)
    with pytest.raises(NotCenteredAtOrigin):
        check_hypotheses(parse_map("vars: x\nx -> 0.1 + 1/2*x\n"))


# -------------------------------------------------------------- examples

@pytest.mark.parametrize("method", [PerDegreeSolve(), Picard(), DirectSum()])
def test_zero_map(method):
    f = parse_map("vars: x\nx -> 0*x\n")
    for p in (2, 7, 40):
        assert fd(solve_embryo(f, p, method)) == {(2,): 1.0}


def test_example_1_hand_values():
    V = solve_embryo(example_map(1), 3)
    assert V.nonzero_layers() == [2, 3]
    assert float(V.coeff((2,))) == pytest.approx(4 / 3, rel=1e-12)
    assert float(V.coeff((3,))) == pytest.approx(-32 / 21, rel=1e-12)


def test_example_3_p6():
    assert fd(solve_embryo(example_map(3), 6)) == {(2, 0): 1.0, (0, 2): 1.0, (6, 0): 16.0, (0, 6): 81.0}


@pytest.mark.parametrize("a", [0.1 * k for k in range(1, 10)])
def test_linear_closed_form(a):
    f = PolyMap.from_dicts([{(1,): a}])
    for method in (PerDegreeSolve(), DirectSum()):
        V = fd(solve_embryo(f, 12, method))
        assert V.keys() == {(2,)}
        assert V[(2,)] == pytest.approx(1 / (1 - a * a), rel=1e-13)


@pytest.mark.parametrize("F,name,p", [(F1, 1, 14), (F3, 3, 20), (F4, 4, 14), (F5, 5, 9)])
def test_per_degree_matches_exact_oracle(F, name, p):
    want = exact_embryo_diagonal(F, p)
    got = fd(solve_embryo(example_map(name), p))
    assert got.keys() == {j for j, v in want.items() if v != 0}
    for j, v in want.items():
        assert got[j] == pytest.approx(float(v), rel=1e-12)


def test_frozen_example_1_coefficients():
    # exact rationals from the oracle, frozen
    assert exact_embryo_diagonal(F1, 5) == {(2,): Fraction(4, 3), (3,): Fraction(-32, 21),
                                            (4,): Fraction(192, 35), (5,): Fraction(-60416, 3255)}


# --------------------------------------------------------------- residual

def test_residual_examples():
    f = example_map(1)
    V = solve_embryo(f, 40)
    assert residual(V, f) <= 1e-12
    assert residual(TruncatedSeries.zero(1, 10), f) == 1.0
    d = V.to_dict()
    d[(2,)] = d[(2,)] + 0.01
    bumped = TruncatedSeries.from_terms(d, 40)
    assert layer_residuals(bumped, f)[2] == pytest.approx(0.0075 / (4 / 3 + 0.01), rel=1e-9)
    assert layer_residuals(bumped, f)[2] == pytest.approx(0.005625, rel=1e-2)


@pytest.mark.parametrize("k", [1, 3, 4, 5])
@pytest.mark.parametrize("method", [PerDegreeSolve(), Picard(), DirectSum()])
def test_solver_residuals(k, method):
    f = example_map(k)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        V = solve_embryo(f, 32, method)
    assert V.nonzero_layers()[0] == 2
    limit = 1e-12 if isinstance(method, PerDegreeSolve) else 1e-9
    assert residual(V, f) <= limit


def test_squared_norm_series():
    assert fd(squared_norm_series(3, 4)) == {(2, 0, 0): 1.0, (0, 2, 0): 1.0, (0, 0, 2): 1.0}


# --------------------------------------------------------- cross-checks

@pytest.mark.parametrize("k", [1, 4])
def test_method_agreement_specified_parameters(k):
    f = example_map(k)
    A = fd(solve_embryo(f, 64))
    B = fd(solve_embryo(f, 64, Picard(1e-12, 10000)))
    C = fd(solve_embryo(f, 64, DirectSum()))
    assert rel_agree(A, B) <= 1e-8
    assert rel_agree(A, C) <= 1e-8


@pytest.mark.xfail(strict=True, reason="coefficients near 1e-300 on Example 5 are still moving "
                   "when Picard(1e-12) stops and are not yet reached by alpha^K <= 1e-14 terms")
def test_method_agreement_specified_parameters_example_5():
    f = example_map(5)
    A = fd(solve_embryo(f, 64))
    assert rel_agree(A, fd(solve_embryo(f, 64, Picard(1e-12, 10000)))) <= 1e-8
    assert rel_agree(A, fd(solve_embryo(f, 64, DirectSum()))) <= 1e-8


def test_method_agreement_example_5_layer_relative():
    f = example_map(5)
    A = fd(solve_embryo(f, 64))
    assert layer_aware(A, fd(solve_embryo(f, 64, Picard(1e-12, 10000)))) <= 1e-8
    assert layer_aware(A, fd(solve_embryo(f, 64, DirectSum()))) <= 1e-8


def test_picard_uniqueness():
    f = example_map(5)
    p = 24
    a = fd(solve_embryo(f, p, Picard(1e-14, 10000)))
    b = fd(solve_embryo(f, p, Picard(1e-14, 10000, initial=squared_norm_series(2, p))))
    assert layer_aware(a, b) <= 1e-9
    f1 = example_map(1)
    a = fd(solve_embryo(f1, 40, Picard(1e-14)))
    b = fd(solve_embryo(f1, 40, Picard(1e-14, initial=squared_norm_series(1, 40))))
    assert rel_agree(a, b) <= 1e-9


def test_picard_no_convergence():
    with pytest.raises(NoConvergence):
        solve_embryo(example_map(1), 20, Picard(1e-12, 3))


@pytest.mark.parametrize("s", [0.5, 2.0, 0.3])
def test_scaling_covariance(s):
    for k in (1, 5):
        f = example_map(k)
        V = fd(solve_embryo(f, 8))
        W = fd(solve_embryo(conjugate_by_scale(f, 1.0 / s), 8))
        # x = u / s: B_j -> B_j s^(2 - |j|)
        for j, v in V.items():
            assert W[j] == pytest.approx(v * s ** (2 - sum(j)), rel=1e-12)


def test_scaled_solve_returns_original_variables():
    f = example_map(1)
    a = fd(solve_embryo(f, 30))
    b = fd(solve_embryo(f, 30, scale=0.25))
    assert rel_agree(a, b) <= 1e-12


def test_direct_sum_default_terms():
    assert default_direct_sum_terms(example_map(1), 64) == 47
    # zero linear part: f^k has lowest degree 3^k, so 2*3^k <= 54 allows k <= 3
    assert default_direct_sum_terms(example_map(3), 54) == 3


def test_orbit_sum_about_a_center_matches_shift():
    from dalyap.series import taylor_shift
    f = example_map(1)
    V = solve_embryo(f, 200, DirectSum(200))
    c = (0.05,)
    W = orbit_sum(f, 60, K=200, center=c)
    S = taylor_shift(V, c).truncate(60)
    a, b = fd(W), fd(S)
    for j in range(0, 30):
        assert a[(j,)] == pytest.approx(b[(j,)], rel=1e-8)


def test_amplification_warning():
    with pytest.warns(RuntimeWarning, match="amplified"):
        solve_embryo(example_map(4), 300)


def test_positivity_probe():
    V = solve_embryo(example_map(1), 20)
    assert positivity_probe(V, [[0.1], [-0.1], [0.2], [-0.2]]).ok
    sq = TruncatedSeries.from_terms({(2,): 1.0}, 2)
    r = positivity_probe(sq, [[0.0]])
    assert r.ok and list(r.boundary) == [0]
    neg = TruncatedSeries.from_terms({(2,): -1.0}, 2)
    r = positivity_probe(neg, [[0.1]])
    assert not r.ok and list(r.nonpositive) == [0]


def test_embryo_structure():
    V = solve_embryo(example_map(5), 10)
    assert V.center == (0.0, 0.0)
    assert min(V.nonzero_layers()) == 2
    assert all(sum(j) <= 10 for j in V.to_dict())
    assert np.all(np.isfinite(list(fd(V).values())))
