"""Quantized analog beamformer for a cluster of cooperating BSs.

Each BS drives its M antennas from one RF chain through B-bit phase shifters.
BS l steers toward its assigned user by co-phasing that user's channel
elements.  The stacked weights form a block-diagonal F with orthonormal
columns.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import block_diag

from .model import ChannelSet, SystemConfig


def codebook(bits: int) -> np.ndarray:
    """The 2^B phases available to a B-bit shifter."""
    if bits < 1:
        raise ValueError("phase_bits must be >= 1")
    return 2.0 * np.pi * np.arange(2 ** bits) / 2 ** bits


def wrap_angle(x):
    """Map angles to [-pi, pi)."""
    return (np.asarray(x) + np.pi) % (2.0 * np.pi) - np.pi


def quantize_phase(target_angle: float, bits: int) -> int:
    """Index of the codebook phase closest to ``target_angle`` on the circle.

    Ties go to the smaller index (``argmin`` returns the first minimum).
    """
    err = np.abs(wrap_angle(target_angle - codebook(bits)))
    # snap float noise so exact ties are detected as ties
    err = np.round(err, 12)
    return int(np.argmin(err))


def bs_assignment(n_bs: int, n_users: int) -> np.ndarray:
    """Round-robin BS to user map (0-based)."""
    return np.arange(n_bs) % n_users


@dataclass(frozen=True)
class AnalogBeamformer:
    f: np.ndarray           # (L, M) unit-modulus weights, entries 1/sqrt(M)
    phase_index: np.ndarray  # (L, M) codebook indices
    assignment: np.ndarray   # (L,) user served by each BS
    bits: int

    @property
    def n_bs(self) -> int:
        return self.f.shape[0]

    @property
    def n_antennas(self) -> int:
        return self.f.shape[1]

    @property
    def F(self) -> np.ndarray:
        """Dense (M*L) x L block-diagonal matrix."""
        return block_diag(*[fl.reshape(-1, 1) for fl in self.f])

    @classmethod
    def from_indices(cls, phase_index, bits, assignment=None):
        phase_index = np.asarray(phase_index, dtype=int)
        if phase_index.ndim != 2:
            raise ValueError("phase_index must be (L, M)")
        m = phase_index.shape[1]
        f = np.exp(1j * codebook(bits)[phase_index]) / np.sqrt(m)
        if assignment is None:
            assignment = np.full(phase_index.shape[0], -1)
        return cls(f=f, phase_index=phase_index, assignment=np.asarray(assignment), bits=bits)


def design_analog_bf(channels: ChannelSet, cfg: SystemConfig) -> AnalogBeamformer:
    """Co-phase each BS's weights with its assigned user's channel.

    With a row channel h and weights f, the gain is ``h @ f``; choosing the
    phase of f(m) as the quantized -angle(h(m)) makes all products point the
    same way.
    """
    h = np.asarray(channels.h)
    L, M, K = cfg.n_bs, cfg.n_bs_antennas, cfg.n_users
    if h.size == 0 or not np.any(h):
        raise ValueError("cannot design analog beams from empty or all-zero user channels")
    if h.shape != (K, M * L):
        raise ValueError(f"user channels have shape {h.shape}, expected {(K, M * L)}")
    if L < K:
        warnings.warn(f"only {L} BSs for {K} users: users {list(range(L, K))} get no dedicated analog beam",
                      stacklevel=2)
    assign = bs_assignment(L, K)
    idx = np.zeros((L, M), dtype=int)
    for l in range(L):
        block = h[assign[l], l * M:(l + 1) * M]
        for m in range(M):
            idx[l, m] = quantize_phase(-np.angle(block[m]), cfg.phase_bits)
    return AnalogBeamformer.from_indices(idx, cfg.phase_bits, assign)


def effective_channel(h: np.ndarray, bf: AnalogBeamformer) -> np.ndarray:
    """Per-BS combined gains [h^1 f_1, ..., h^L f_L]; works on a row or a stack of rows."""
    h = np.asarray(h)
    L, M = bf.f.shape
    if h.shape[-1] != L * M:
        raise ValueError(f"channel length {h.shape[-1]} does not match M*L = {L * M}")
    blocks = h.reshape(h.shape[:-1] + (L, M))
    return np.einsum("...lm,lm->...l", blocks, bf.f)


def array_gain(h_block: np.ndarray, f: np.ndarray) -> float:
    return float(abs(np.dot(h_block, f)))
