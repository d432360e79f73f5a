"""Weighted averages: three evaluation routes, limits, and splits."""

import numpy as np
import pytest

from ncergo._rng import generator
from ncergo.algebra import Algebra, Box, Projection, lp_norm, trace
from ncergo.averages import (
    ergodic_average_family,
    limit_oracle,
    split_real_imag,
    weighted_average_direct,
    weighted_average_factorized,
    weighted_average_grid,
)
from ncergo.contraction import (
    apply_power,
    convex_combination,
    identity_map,
    pinching,
    scaled_unitary,
    substochastic,
)
from ncergo.errors import BudgetError
from ncergo.weights import TrigPolynomial, TrigTerm


def diag_projection(alg, block, idxs):
    mats = [np.zeros((d, d), dtype=complex) for d in alg.block_dims]
    for i in idxs:
        mats[block][i, i] = 1.0
    return Projection(alg.element(mats))


def rotation(alg, theta):
    c, s = np.cos(theta), np.sin(theta)
    u = np.array([[c, -s], [s, c]], dtype=complex)
    blocks = [u if d == 2 else np.eye(d, dtype=complex) for d in alg.block_dims]
    return scaled_unitary(alg, alg.element(blocks))


def mixed_maps(alg, seed):
    rng = generator(seed, "maps")
    theta = float(rng.uniform(0.2, 1.2))
    t1 = rotation(alg, theta)
    t2 = convex_combination(
        [
            (0.5, pinching([diag_projection(alg, 0, [0])])),
            (0.4, rotation(alg, theta / 2)),
        ]
    )
    return [t1, t2]


def trig_weight(dim, seed):
    rng = generator(seed, "weight")
    terms = [TrigTerm(0.4 + 0.0j, (0.0,) * dim)]
    for _ in range(2):
        coeff = complex(rng.uniform(0.1, 0.3), rng.uniform(-0.1, 0.1))
        phases = tuple(float(p) for p in rng.uniform(0.3, 2.8, size=dim))
        terms.append(TrigTerm(coeff, phases))
    return TrigPolynomial(dim, tuple(terms))


def naive_average(a, maps, x, n):
    # reference: literal double loop over the box
    from itertools import product

    acc = x.algebra.zero()
    for k in product(*[range(1, c + 1) for c in n]):
        acc = acc + complex(a.eval(k)) * apply_power(maps, k, x)
    return (1.0 / np.prod(n)) * acc


# ---------------------------------------------------------------------------
# the three routes agree with the naive loop and each other

def test_direct_matches_naive_loop():
    alg = Algebra((2, 2), (1.0, 0.5))
    rng = generator(1, "x")
    x = alg.random_element(rng, kind="general")
    maps = mixed_maps(alg, 1)
    a = trig_weight(2, 1)
    for n in [(1, 1), (3, 2), (5, 5)]:
        got = weighted_average_direct(a, maps, x, n)
        want = naive_average(a, maps, x, n)
        assert (got - want).max_abs() < 1e-11


def test_three_routes_agree_seeded():
    for seed in range(6):
        d = 1 + seed % 3
        alg = Algebra((2,)) if seed % 2 else Algebra((2, 2), (1.0, 0.25))
        rng = generator(seed, "x3")
        x = alg.random_element(rng, kind="general")
        maps = (mixed_maps(alg, seed) * 3)[:d]
        a = trig_weight(d, seed)
        n = (4, 3, 2)[:d]
        direct = weighted_average_direct(a, maps, x, n)
        fact = weighted_average_factorized(a, maps, x, n)
        grid = weighted_average_grid(a, maps, x, Box.full(n)).value(n)
        assert (direct - fact).max_abs() < 1e-10
        assert (direct - grid).max_abs() < 1e-10


def test_grid_family_consistent_across_boxes():
    alg = Algebra((2,))
    rng = generator(9, "xg")
    x = alg.random_element(rng, kind="hermitian")
    maps = mixed_maps(alg, 9)
    a = trig_weight(2, 9)
    big = weighted_average_grid(a, maps, x, Box.full((6, 6)))
    small = weighted_average_grid(a, maps, x, Box((2, 3), (5, 5)))
    for idx, el in small.items():
        assert (el - big.value(idx)).max_abs() < 1e-12


# ---------------------------------------------------------------------------
# structure of families

def test_family_restrict_and_minus():
    alg = Algebra((2,))
    rng = generator(4, "fam")
    x = alg.random_element(rng, kind="hermitian")
    maps = mixed_maps(alg, 4)
    a = trig_weight(2, 4)
    fam = weighted_average_grid(a, maps, x, Box.full((4, 4)))
    sub = fam.restrict(Box((2, 2), (4, 4)))
    assert sub.box.lower == (2, 2)
    assert (sub.value((3, 3)) - fam.value((3, 3))).max_abs() == 0.0
    shifted = fam.minus_constant(x)
    assert (shifted.value((2, 2)) - (fam.value((2, 2)) - x)).max_abs() < 1e-14
    re_fam, im_fam = fam.hermitian_split()
    v = fam.value((3, 2))
    assert (re_fam.value((3, 2)) - v.real_part()).max_abs() < 1e-14
    assert (im_fam.value((3, 2)) - v.imag_part()).max_abs() < 1e-14


def test_ergodic_family_is_unweighted_mean():
    alg = Algebra((2,))
    rng = generator(5, "erg")
    x = alg.random_element(rng, kind="positive")
    maps = mixed_maps(alg, 5)
    fam = ergodic_average_family(maps, x, Box.full((3, 3)))
    ones = TrigPolynomial.constant(2, 1.0)
    want = naive_average(ones, maps, x, (3, 3))
    assert (fam.value((3, 3)) - want).max_abs() < 1e-11


def test_identity_map_constant_weight_average_is_x():
    alg = Algebra((2, 3))
    rng = generator(6, "idm")
    x = alg.random_element(rng, kind="general")
    ones = TrigPolynomial.constant(1, 1.0)
    got = weighted_average_direct(ones, [identity_map(alg)], x, (17,))
    assert (got - x).max_abs() < 1e-12


def test_budget_enforced():
    alg = Algebra((2,))
    x = alg.identity()
    maps = [identity_map(alg), identity_map(alg)]
    a = trig_weight(2, 0)
    with pytest.raises(BudgetError):
        weighted_average_direct(a, maps, x, (100, 100), budget=10)
    with pytest.raises(BudgetError):
        weighted_average_grid(a, maps, x, Box.full((100, 100)), budget=10)


# ---------------------------------------------------------------------------
# split into real and imaginary weight parts

def test_split_real_imag_recombines():
    alg = Algebra((2,))
    rng = generator(7, "spl")
    x = alg.random_element(rng, kind="positive")
    maps = mixed_maps(alg, 7)
    a = trig_weight(2, 7)
    n = (4, 5)
    re_part, im_part = split_real_imag(a, maps, x, n)
    full = weighted_average_direct(a, maps, x, n)
    recomb = re_part + 1j * im_part
    assert (full - recomb).max_abs() < 1e-11
    # positive x and hermiticity-preserving maps give hermitian parts
    assert re_part.is_hermitian(1e-10)
    assert im_part.is_hermitian(1e-10)


# ---------------------------------------------------------------------------
# limits

def test_limit_oracle_identity_map():
    # with T = id the average is a(.) averaged, whose limit keeps only the
    # constant term
    alg = Algebra((2,))
    rng = generator(8, "lim")
    x = alg.random_element(rng, kind="hermitian")
    a = trig_weight(1, 8)
    res = limit_oracle(a, [identity_map(alg)], x)
    const = a.terms[0].coefficient
    assert (res.value - complex(const) * x).max_abs() < 1e-10


def test_limit_oracle_matches_long_horizon():
    # substochastic irreducible chain: averages settle at rate 1/N, so a
    # horizon of 2^13 pins the limit to ~1e-3 while the oracle is exact
    alg = Algebra((3,))
    s = np.array(
        [
            [0.0, 0.7, 0.3],
            [0.5, 0.2, 0.3],
            [0.5, 0.1, 0.4],
        ]
    )
    t = substochastic(alg, s)
    rng = generator(10, "lh")
    x = alg.random_element(rng, kind="positive")
    a = TrigPolynomial.constant(1, 1.0)
    res = limit_oracle(a, [t], x)
    n = 8192
    approx = weighted_average_direct(a, [t], x, (n,), budget=1 << 24)
    err = lp_norm(res.value - approx, 2.0)
    assert err < 5e-3
    # the limit is invariant under one more application of T on the left
    assert (t.apply(res.value) - res.value).max_abs() < 1e-9


def test_limit_oracle_phase_term_vanishes_for_strict_contraction():
    alg = Algebra((2,))
    t = scaled_unitary(alg, alg.identity(), scale=0.5)
    a = TrigPolynomial(1, (TrigTerm(1.0 + 0j, (0.7,)),))
    rng = generator(11, "ph")
    x = alg.random_element(rng, kind="hermitian")
    res = limit_oracle(a, [t], x)
    assert res.value.max_abs() < 1e-12
