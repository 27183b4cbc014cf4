"""Cell geometry, random channel generation and Gramian construction.

The base station is a uniform linear array along one side of a square
cell; users are dropped uniformly inside the far region of the cell.
Large-scale fading varies per antenna element, which is what makes the
array spatially non-stationary: each user is received with noticeably
different power across the aperture.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .config import SystemConfig

__all__ = [
    "Geometry",
    "ChannelRealization",
    "SelectionMask",
    "MaskInfeasible",
    "make_geometry",
    "make_channel",
    "channel_from_matrix",
    "subarray_gramian",
    "array_gramian",
    "save_channel_matrix",
    "load_channel_matrix",
]


class MaskInfeasible(ValueError):
    """A selection mask violates the per-subarray RF budget."""


@dataclass(frozen=True)
class Geometry:
    """Planar positions (meters) of the array elements and the users."""

    antenna_positions: np.ndarray  # (M, 2)
    user_positions: np.ndarray     # (K, 2)

    def distances(self) -> np.ndarray:
        """Euclidean antenna-to-user distance matrix, shape (M, K)."""
        diff = self.antenna_positions[:, None, :] - self.user_positions[None, :, :]
        return np.sqrt((diff ** 2).sum(axis=2))


def make_geometry(cfg: SystemConfig, rng: np.random.Generator) -> Geometry:
    """Place the ULA on the cell side y = 0 and drop users uniformly.

    Antenna m (1-based) sits at x = (m - 1/2) * L / M, so the array spans
    the full cell side with uniform spacing L / M.  Users draw
    x ~ U[0, L] and y ~ U(0.1 L, L); endpoint draws for y are rejected so
    the open range holds strictly.
    """
    L, m = cfg.cell_size_m, cfg.num_antennas
    ant_x = (np.arange(1, m + 1) - 0.5) * (L / m)
    antennas = np.column_stack([ant_x, np.zeros(m)])

    k = cfg.num_users
    ux = rng.uniform(0.0, L, size=k)
    lo, hi = 0.1 * L, L
    uy = rng.uniform(lo, hi, size=k)
    while True:
        bad = (uy <= lo) | (uy >= hi)
        if not bad.any():
            break
        uy[bad] = rng.uniform(lo, hi, size=int(bad.sum()))
    users = np.column_stack([ux, uy])
    return Geometry(antenna_positions=antennas, user_positions=users)


class ChannelRealization:
    """One draw of the M x K downlink channel.

    Carries the channel matrix, the per-entry large-scale coefficients
    (``beta``, absent for imported matrices), per-antenna squared row
    norms, and lazily the per-antenna rank-1 Gramian summands.
    """

    def __init__(self, h_matrix: np.ndarray, beta=None):
        h = np.ascontiguousarray(h_matrix, dtype=np.complex128)
        if h.ndim != 2:
            raise ValueError("channel matrix must be 2-D (M x K)")
        self.h_matrix = h
        self.beta = None if beta is None else np.asarray(beta, dtype=np.float64)
        self.row_norms_sq = np.einsum("mk,mk->m", h.conj(), h).real
        self._gm = None

    @property
    def num_antennas(self) -> int:
        return self.h_matrix.shape[0]

    @property
    def num_users(self) -> int:
        return self.h_matrix.shape[1]

    def antenna_gramian(self, m: int) -> np.ndarray:
        """Rank-1 Gramian of antenna m: conj(h_m)^T h_m, shape (K, K)."""
        row = self.h_matrix[m]
        return np.outer(row.conj(), row)

    @property
    def per_antenna_gramians(self) -> np.ndarray:
        """All antenna Gramians stacked, shape (M, K, K); cached on first use."""
        if self._gm is None:
            h = self.h_matrix
            self._gm = np.einsum("mk,ml->mkl", h.conj(), h)
        return self._gm


def make_channel(cfg: SystemConfig, geo: Geometry,
                 rng: np.random.Generator) -> ChannelRealization:
    """Draw i.i.d. unit-variance complex Gaussian fading shaped by path loss.

    beta[m, k] = q0 * d_{m,k}^(-kappa) and H[m, k] = sqrt(beta) * h', with
    h' circularly symmetric, unit variance (real/imag parts of variance
    1/2 each, real block drawn before the imaginary block).
    """
    d = geo.distances()
    beta = cfg.ref_path_loss * d ** (-cfg.path_loss_exp)
    shape = d.shape
    fading = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    h = np.sqrt(beta) * fading
    return ChannelRealization(h, beta=beta)


def channel_from_matrix(h_matrix: np.ndarray) -> ChannelRealization:
    """Wrap an externally produced channel matrix (no path-loss metadata)."""
    return ChannelRealization(h_matrix, beta=None)


@dataclass(frozen=True)
class SelectionMask:
    """Binary antenna-activation vector with per-subarray structure."""

    active: np.ndarray  # (M,) uint8, read-only
    num_subarrays: int

    def __post_init__(self):
        arr = np.ascontiguousarray(self.active, dtype=np.uint8)
        arr.setflags(write=False)
        object.__setattr__(self, "active", arr)
        if arr.shape[0] % self.num_subarrays != 0:
            raise MaskInfeasible("mask length not divisible by subarray count")

    @property
    def num_antennas(self) -> int:
        return self.active.shape[0]

    @property
    def num_active(self) -> int:
        return int(self.active.sum())

    def subarray(self, b: int) -> np.ndarray:
        """View of subarray b's activation bits (0-based index)."""
        mb = self.num_antennas // self.num_subarrays
        return self.active[b * mb:(b + 1) * mb]

    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.active)

    def validate(self, cfg: SystemConfig) -> None:
        """Raise MaskInfeasible unless every subarray respects its RF budget."""
        if self.num_antennas != cfg.num_antennas or self.num_subarrays != cfg.num_subarrays:
            raise MaskInfeasible("mask shape does not match the configuration")
        counts = self.active.reshape(cfg.num_subarrays, -1).sum(axis=1)
        if (counts > cfg.rf_per_subarray).any():
            b = int(np.argmax(counts > cfg.rf_per_subarray))
            raise MaskInfeasible(
                f"subarray {b} activates {int(counts[b])} antennas "
                f"> budget {cfg.rf_per_subarray}"
            )

    @staticmethod
    def from_vector(vec, cfg: SystemConfig) -> "SelectionMask":
        return SelectionMask(np.asarray(vec, dtype=np.uint8), cfg.num_subarrays)

    @staticmethod
    def all_ones(cfg: SystemConfig) -> "SelectionMask":
        return SelectionMask(np.ones(cfg.num_antennas, dtype=np.uint8),
                             cfg.num_subarrays)


def subarray_gramian(ch: ChannelRealization, mask: SelectionMask, b: int) -> np.ndarray:
    """Gramian of subarray b's active antennas, sum of their rank-1 terms.

    Computed as the product of the selected channel rows, which equals
    the per-antenna sum exactly up to floating-point associativity.
    """
    mb = ch.num_antennas // mask.num_subarrays
    local = mask.subarray(b)
    rows = ch.h_matrix[b * mb:(b + 1) * mb][local.astype(bool)]
    if rows.shape[0] == 0:
        k = ch.num_users
        return np.zeros((k, k), dtype=np.complex128)
    return rows.conj().T @ rows


def array_gramian(ch: ChannelRealization, mask: SelectionMask) -> np.ndarray:
    """Array Gramian over all active antennas (sum of subarray Gramians)."""
    rows = ch.h_matrix[mask.active.astype(bool)]
    if rows.shape[0] == 0:
        k = ch.num_users
        return np.zeros((k, k), dtype=np.complex128)
    return rows.conj().T @ rows


# ---------------------------------------------------------------------------
# Channel dump format for cross-implementation comparisons
# ---------------------------------------------------------------------------
# Header: two little-endian int64 (M, K); body: M*K complex entries in
# row-major order, each stored as two little-endian float64 (real, imag).

def save_channel_matrix(path, h_matrix: np.ndarray) -> None:
    h = np.asarray(h_matrix, dtype=np.complex128)
    m, k = h.shape
    flat = np.empty(m * k * 2, dtype="<f8")
    flat[0::2] = h.real.ravel(order="C")
    flat[1::2] = h.imag.ravel(order="C")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<qq", m, k))
        fh.write(flat.tobytes())


def load_channel_matrix(path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.read(16)
        if len(header) != 16:
            raise ValueError("truncated channel dump header")
        m, k = struct.unpack("<qq", header)
        body = np.frombuffer(fh.read(), dtype="<f8")
    if body.size != m * k * 2:
        raise ValueError("channel dump body size mismatch")
    h = body[0::2] + 1j * body[1::2]
    return h.reshape(m, k)
