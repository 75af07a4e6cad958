import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gala import quantize as qz
from oracles import quantize_reference

DOMAINS = {"V": qz.VALUE_RANGE, "p_g": qz.CENTER_RANGE, "s_g": qz.SCALE_RANGE}


def test_endpoints_and_midpoint():
    assert qz.quantize(-0.1, *qz.VALUE_RANGE) == 0
    assert qz.quantize(0.1, *qz.VALUE_RANGE) == 255
    assert qz.quantize(0.0, *qz.CENTER_RANGE) == 128  # 127.5 rounds away from zero
    assert qz.quantize(0.0, *qz.SCALE_RANGE) == 0


def test_euler_code_of_sixty_degrees():
    assert qz.quantize_euler(np.array([np.pi / 3, 0.0, 0.0]))[0] == 20


def test_round_half_away():
    np.testing.assert_array_equal(qz.round_half_away([0.5, 1.5, 2.5, -0.5, -1.5, 0.49]), [1, 2, 3, -1, -2, 0])


def test_clamping():
    assert qz.quantize(5.0, *qz.VALUE_RANGE) == 255
    assert qz.quantize(-5.0, *qz.VALUE_RANGE) == 0


def test_bad_range():
    with pytest.raises(ValueError):
        qz.quantize(0.0, 1.0, 1.0)


@pytest.mark.parametrize("domain", DOMAINS)
def test_matches_reference(rng, domain):
    lo, hi = DOMAINS[domain]
    vals = rng.uniform(lo - 0.05, hi + 0.05, size=2000)
    codes = qz.quantize(vals, lo, hi)
    assert [quantize_reference(float(v), lo, hi) for v in vals] == codes.tolist()


@settings(max_examples=300, deadline=None)
@given(st.sampled_from(sorted(DOMAINS)), st.floats(-1.0, 1.0, allow_nan=False), st.integers(2, 12))
def test_round_trip_within_half_step(domain, v, bits):
    lo, hi = DOMAINS[domain]
    back = qz.dequantize(qz.quantize(v, lo, hi, bits), lo, hi, bits)
    assert abs(back - min(max(v, lo), hi)) <= qz.half_step(lo, hi, bits) + 1e-12


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 255))
def test_codes_are_fixed_points(code):
    for lo, hi in DOMAINS.values():
        assert qz.quantize(qz.dequantize(code, lo, hi), lo, hi) == code


def test_fake_quantize_idempotent(rng):
    v = rng.uniform(-0.2, 0.2, size=1000)
    once = qz.fake_quantize(v, *qz.VALUE_RANGE)
    np.testing.assert_array_equal(qz.fake_quantize(once, *qz.VALUE_RANGE), once)


def test_euler_matrix_is_rotation(rng):
    R = qz.euler_to_matrix(rng.uniform(-7, 7, size=(200, 3)))
    np.testing.assert_allclose(R @ np.swapaxes(R, 1, 2), np.broadcast_to(np.eye(3), R.shape), atol=1e-12)
    np.testing.assert_allclose(np.linalg.det(R), 1.0, atol=1e-12)


def test_euler_convention_is_zyx():
    yaw, pitch, roll = 0.3, -0.4, 1.1

    def rot(axis, a):
        c, s = np.cos(a), np.sin(a)
        i, j = [k for k in range(3) if k != axis]
        R = np.eye(3)
        R[i, i] = R[j, j] = c
        R[i, j], R[j, i] = -s, s
        return R if axis != 1 else R.T

    expect = rot(2, yaw) @ rot(1, pitch) @ rot(0, roll)
    np.testing.assert_allclose(qz.euler_to_matrix([yaw, pitch, roll]), expect, atol=1e-15)


def test_matrix_to_euler_inverts(rng):
    angles = np.c_[rng.uniform(-np.pi, np.pi, 500), rng.uniform(-1.5, 1.5, 500), rng.uniform(-np.pi, np.pi, 500)]
    R = qz.euler_to_matrix(angles)
    np.testing.assert_allclose(qz.euler_to_matrix(qz.matrix_to_euler(R)), R, atol=1e-12)


def test_gimbal_lock_keeps_rotation():
    R = qz.euler_to_matrix([0.7, np.pi / 2, 0.2])
    np.testing.assert_allclose(qz.euler_to_matrix(qz.matrix_to_euler(R)), R, atol=1e-9)


def _canonical(code):
    """Codes that ``matrix_to_euler`` reproduces: pitch in (-pi/2, pi/2)."""
    return code[1] < 30 or code[1] > 90


def test_euler_lattice_round_trip_exact():
    all_codes = np.array(list(itertools.product(range(0, 120, 7), range(120), range(0, 120, 11))))
    R = qz.dequantize_rotation(all_codes)
    back = qz.quantize_rotation(R)
    canon = np.array([_canonical(c) for c in all_codes])
    # canonical codes come back unchanged
    np.testing.assert_array_equal(back[canon], all_codes[canon])
    # every code maps to a code for the same rotation, and that code is a fixed point
    np.testing.assert_allclose(qz.dequantize_rotation(back), R, atol=1e-9)
    np.testing.assert_array_equal(qz.quantize_rotation(qz.dequantize_rotation(back)), back)


def test_quaternion_round_trip(rng):
    q = rng.normal(size=(300, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    q[q[:, 0] < 0] *= -1
    back = qz.matrix_to_quaternion(qz.quaternion_to_matrix(q))
    np.testing.assert_allclose(back, q, atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(back, axis=1), 1.0, atol=1e-12)
    assert np.all(back[:, 0] >= 0)


def test_quaternion_of_identity():
    np.testing.assert_allclose(qz.matrix_to_quaternion(np.eye(3)), [1, 0, 0, 0])
