"""Structural identity checks: these hold to rounding error by construction."""

import math

import numpy as np
import pytest

from dltlab.birkhoff import clt_scheme, coordinate_cosine, coordinate_symbol
from dltlab.cocycle import (
    constant_generator,
    matrix_cocycle,
    smooth_torus_generator,
    symbol_table_generator,
)
from dltlab.dynamics import torus_automorphism, two_sided_shift
from dltlab.errors import DomainError
from dltlab.identities import (
    composition_identity_check,
    renorm_transparency_check,
    time_reversal_check,
    top_wedge_det_check,
)
from dltlab.streams import Stream

CAT = torus_automorphism(((2, 1), (1, 1)))
SHIFT = two_sided_shift((0.5, 0.5))


def smooth_cocycle():
    gen = smooth_torus_generator(
        ((2, 1), (1, 1)), cos_coeff=((0.1, 0), (0, 0.1)), frequency=(1, 0)
    )
    return matrix_cocycle(CAT, gen)


def shear_cocycle():
    return matrix_cocycle(SHIFT, symbol_table_generator((((1, 1), (0, 1)), ((1, 0), (1, 1)))))


def test_composition_identity_smooth_family():
    check = composition_identity_check(smooth_cocycle(), Stream(301), n_cases=400)
    assert check.name == "composition"
    assert check.n_cases == 400
    assert check.passed
    assert check.max_error <= 1e-9


def test_composition_identity_exact_on_integer_tables():
    # unimodular integer tables keep every product entry an exact float
    check = composition_identity_check(shear_cocycle(), Stream(302), n_cases=400)
    assert check.max_error == 0.0


def test_composition_identity_rejects_overflowing_span():
    coc = matrix_cocycle(CAT, constant_generator(((3, 0), (0, 1.0 / 3.0))))
    with pytest.raises(DomainError):
        composition_identity_check(coc, Stream(303), n_cases=4, n_max_total=1000)


def test_time_reversal_torus_and_shift():
    f = coordinate_cosine((1, 0))
    check = time_reversal_check(
        CAT, f, clt_scheme(0.0, 0.5), Stream(304), n_points=4, n_steps=4000
    )
    assert check.passed
    assert check.max_error <= 1e-9

    g = coordinate_symbol(SHIFT, 0)
    check2 = time_reversal_check(
        SHIFT, g, clt_scheme(0.5, 0.25), Stream(305), n_points=4, n_steps=4000
    )
    # symbol sums run through the exact integer counter path
    assert check2.max_error == 0.0


def test_top_wedge_det_unimodular_families():
    for coc in (smooth_cocycle(), shear_cocycle()):
        check = top_wedge_det_check(coc, Stream(306), n_samples=64, n_steps=200)
        assert check.passed
        assert check.max_error <= 1e-8


def test_top_wedge_det_tracks_nonunit_determinant():
    # det = 2 everywhere: both sides must agree on N log 2, not on zero
    coc = matrix_cocycle(CAT, constant_generator(((2, 0), (0, 1))))
    check = top_wedge_det_check(coc, Stream(307), n_samples=8, n_steps=150)
    assert check.passed
    assert check.max_error <= 1e-8


def test_renorm_transparency():
    check = renorm_transparency_check(
        smooth_cocycle(), Stream(308), n_samples=32, n_steps=400, periods=(1, 5, 64)
    )
    assert check.passed
    assert check.max_error <= 1e-8
    assert check.n_cases == 32 * 3


def test_renorm_transparency_clamps_oversized_period():
    coc = matrix_cocycle(CAT, constant_generator(((3, 0), (0, 1.0 / 3.0))))
    check = renorm_transparency_check(
        coc, Stream(309), n_samples=8, n_steps=300, periods=(10**6,)
    )
    assert check.passed


def test_identity_check_validation():
    with pytest.raises(DomainError):
        composition_identity_check(smooth_cocycle(), Stream(310), n_cases=0)
    with pytest.raises(DomainError):
        time_reversal_check(
            CAT, coordinate_cosine((1, 0)), clt_scheme(0.0, 0.5), Stream(311), n_points=0
        )
    with pytest.raises(DomainError):
        top_wedge_det_check(smooth_cocycle(), Stream(312), n_samples=0)
    with pytest.raises(DomainError):
        renorm_transparency_check(smooth_cocycle(), Stream(313), n_samples=8, periods=())
