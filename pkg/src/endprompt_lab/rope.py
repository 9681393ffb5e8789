"""Rotary position embedding scores in double precision.

Coordinates ``(2j, 2j+1)`` form the j-th complex subspace; it is rotated by
``p_eff * freqs[j]``. The score between a rotated query and key then depends on
positions only through the relative distance, which makes it a finite
trigonometric polynomial in that distance (see :func:`score_spectral`).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InvalidBaseError, InvalidScaleError

DEFAULT_BASE = 10000.0


@dataclass(frozen=True)
class AngularSpectrum:
    dim: int
    base: float
    freqs: np.ndarray

    @property
    def half(self) -> int:
        return self.dim // 2


@dataclass(frozen=True)
class SubspaceDecomposition:
    """Polar form of the per-subspace content products ``q_j * conj(k_j)``."""

    amplitudes: np.ndarray
    phases: np.ndarray

    def __len__(self) -> int:
        return len(self.amplitudes)


def frequencies(dim: int, base: float = DEFAULT_BASE) -> AngularSpectrum:
    if not isinstance(dim, (int, np.integer)) or dim < 2 or dim % 2:
        raise DimensionError(f"rotary dimension must be an even integer >= 2, got {dim!r}")
    if not base > 0:
        raise InvalidBaseError(f"rotary base must be positive, got {base!r}")
    j = np.arange(dim // 2, dtype=np.float64)
    freqs = np.power(float(base), -2.0 * j / dim)
    freqs.flags.writeable = False
    return AngularSpectrum(int(dim), float(base), freqs)


def _check_dim(v: np.ndarray, spec: AngularSpectrum) -> None:
    if v.shape[-1] != spec.dim:
        raise DimensionError(f"vector length {v.shape[-1]} does not match spectrum dim {spec.dim}")


def rotate(v, p_eff, spec: AngularSpectrum) -> np.ndarray:
    """Rotate head vector(s) ``v[..., D]`` to effective position(s) ``p_eff``.

    ``p_eff`` broadcasts against ``v.shape[:-1]``, so a whole ``[B, T, H, D]``
    block can be rotated with positions of shape ``[B, T, 1]``.
    """
    v = np.asarray(v, dtype=np.float64)
    _check_dim(v, spec)
    ang = np.asarray(p_eff, dtype=np.float64)[..., None] * spec.freqs
    c, s = np.cos(ang), np.sin(ang)
    x, y = v[..., 0::2], v[..., 1::2]
    out = np.empty(np.broadcast_shapes(v.shape, ang.shape[:-1] + (spec.dim,)))
    out[..., 0::2] = x * c - y * s
    out[..., 1::2] = x * s + y * c
    return out


def score_direct(q, k, p_m: float, p_n: float, spec: AngularSpectrum) -> float:
    q = np.asarray(q, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    _check_dim(q, spec)
    _check_dim(k, spec)
    return float(np.dot(rotate(q, p_m, spec), rotate(k, p_n, spec)))


def decompose(q, k, spec: AngularSpectrum) -> SubspaceDecomposition:
    q = np.asarray(q, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    _check_dim(q, spec)
    _check_dim(k, spec)
    z = (q[0::2] + 1j * q[1::2]) * np.conj(k[0::2] + 1j * k[1::2])
    amps = np.abs(z)
    # np.angle returns values in [-pi, pi]; fold -pi onto pi and pin arg(0) to 0
    phases = np.angle(z)
    phases = np.where(phases <= -np.pi, np.pi, phases)
    phases = np.where(amps == 0.0, 0.0, phases)
    return SubspaceDecomposition(amps, phases)


def score_spectral(dec: SubspaceDecomposition, d: float, spec: AngularSpectrum, s: float = 1.0) -> float:
    """``sum_j a_j cos(d * freqs[j] / s + phi_j)``; ``s = 1`` is plain RoPE."""
    if not s >= 1:
        raise InvalidScaleError(f"interpolation scale must be >= 1, got {s!r}")
    if len(dec) != spec.half:
        raise DimensionError(f"decomposition has {len(dec)} subspaces, spectrum has {spec.half}")
    # divide the distance first, as interpolation divides positions
    return float(np.dot(dec.amplitudes, np.cos((d / s) * spec.freqs + dec.phases)))
