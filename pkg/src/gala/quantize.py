"""8-bit scalar codes, Euler-angle rotation codes and quaternion helpers."""

from __future__ import annotations

import numpy as np

BITS = 8
EULER_STEP = np.pi / 60
EULER_CODES = 120  # codes cover [0, 2 pi)

SCALE_RANGE = (0.0, 0.1)
CENTER_RANGE = (-0.5, 0.5)
VALUE_RANGE = (-0.1, 0.1)


def round_half_away(x):
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def quantize(value, lo: float, hi: float, bits: int = BITS):
    """Map ``value`` (clamped to ``[lo, hi]``) to an integer code in ``[0, 2**bits - 1]``."""
    if not lo < hi:
        raise ValueError("quantization range must satisfy lo < hi")
    levels = (1 << bits) - 1
    v = np.clip(np.asarray(value, dtype=np.float64), lo, hi)
    code = round_half_away((v - lo) / (hi - lo) * levels).astype(np.int64)
    return int(code) if code.ndim == 0 else code


def dequantize(code, lo: float, hi: float, bits: int = BITS):
    levels = (1 << bits) - 1
    v = lo + np.asarray(code, dtype=np.float64) * ((hi - lo) / levels)
    return float(v) if v.ndim == 0 else v


def half_step(lo: float, hi: float, bits: int = BITS) -> float:
    return (hi - lo) / (2 * ((1 << bits) - 1))


def fake_quantize(value, lo: float, hi: float, bits: int = BITS):
    """``dequantize(quantize(value))``: the forward pass of the straight-through estimator."""
    return dequantize(quantize(value, lo, hi, bits), lo, hi, bits)


# ---------------------------------------------------------------------------
# rotations: ZYX intrinsic Euler angles, R = Rz(yaw) @ Ry(pitch) @ Rx(roll)
# ---------------------------------------------------------------------------


def euler_to_matrix(angles) -> np.ndarray:
    a = np.asarray(angles, dtype=np.float64)
    yaw, pitch, roll = a[..., 0], a[..., 1], a[..., 2]
    cy, sy = np.cos(yaw), np.sin(yaw)
    cp, sp = np.cos(pitch), np.sin(pitch)
    cr, sr = np.cos(roll), np.sin(roll)
    R = np.empty(a.shape[:-1] + (3, 3))
    R[..., 0, 0] = cy * cp
    R[..., 0, 1] = cy * sp * sr - sy * cr
    R[..., 0, 2] = cy * sp * cr + sy * sr
    R[..., 1, 0] = sy * cp
    R[..., 1, 1] = sy * sp * sr + cy * cr
    R[..., 1, 2] = sy * sp * cr - cy * sr
    R[..., 2, 0] = -sp
    R[..., 2, 1] = cp * sr
    R[..., 2, 2] = cp * cr
    return R


def matrix_to_euler(R) -> np.ndarray:
    """Inverse of :func:`euler_to_matrix` with pitch in ``[-pi/2, pi/2]``.

    At gimbal lock the roll is set to zero and the yaw absorbs the rest.
    """
    R = np.asarray(R, dtype=np.float64)
    sp = np.clip(-R[..., 2, 0], -1.0, 1.0)
    pitch = np.arcsin(sp)
    cp = np.hypot(R[..., 0, 0], R[..., 1, 0])
    locked = cp < 1e-9
    yaw = np.where(locked, np.arctan2(-R[..., 0, 1], R[..., 1, 1]), np.arctan2(R[..., 1, 0], R[..., 0, 0]))
    roll = np.where(locked, 0.0, np.arctan2(R[..., 2, 1], R[..., 2, 2]))
    return np.stack([yaw, pitch, roll], axis=-1)


def quantize_euler(angles) -> np.ndarray:
    steps = round_half_away(np.mod(np.asarray(angles, dtype=np.float64), 2 * np.pi) / EULER_STEP)
    return np.mod(steps, EULER_CODES).astype(np.int64)


def dequantize_euler(codes) -> np.ndarray:
    return np.asarray(codes, dtype=np.float64) * EULER_STEP


def quantize_rotation(R) -> np.ndarray:
    return quantize_euler(matrix_to_euler(R))


def dequantize_rotation(codes) -> np.ndarray:
    return euler_to_matrix(dequantize_euler(codes))


def matrix_to_quaternion(R) -> np.ndarray:
    """Unit quaternion ``(w, x, y, z)`` with ``w >= 0``."""
    R = np.asarray(R, dtype=np.float64)
    flat = R.reshape(-1, 3, 3)
    out = np.empty((len(flat), 4))
    for i, m in enumerate(flat):
        tr = m[0, 0] + m[1, 1] + m[2, 2]
        if tr > 0:
            s = 2.0 * np.sqrt(tr + 1.0)
            q = [0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s]
        elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
            s = 2.0 * np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2])
            q = [(m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s]
        elif m[1, 1] > m[2, 2]:
            s = 2.0 * np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2])
            q = [(m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s]
        else:
            s = 2.0 * np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1])
            q = [(m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s]
        q = np.asarray(q)
        q /= np.linalg.norm(q)
        out[i] = -q if q[0] < 0 else q
    return out.reshape(R.shape[:-2] + (4,))


def quaternion_to_matrix(q) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    q = q / np.linalg.norm(q, axis=-1, keepdims=True)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    R = np.empty(q.shape[:-1] + (3, 3))
    R[..., 0, 0] = 1 - 2 * (y * y + z * z)
    R[..., 0, 1] = 2 * (x * y - w * z)
    R[..., 0, 2] = 2 * (x * z + w * y)
    R[..., 1, 0] = 2 * (x * y + w * z)
    R[..., 1, 1] = 1 - 2 * (x * x + z * z)
    R[..., 1, 2] = 2 * (y * z - w * x)
    R[..., 2, 0] = 2 * (x * z - w * y)
    R[..., 2, 1] = 2 * (y * z + w * x)
    R[..., 2, 2] = 1 - 2 * (x * x + y * y)
    return R
