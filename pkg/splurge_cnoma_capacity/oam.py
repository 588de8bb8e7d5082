"""
Normalized OAM channel of the BS-to-CCU line-of-sight link.

Entry m (1-based) of the receive vector is e^{-j2π(m-1)ℓ}/M. The link is
deterministic, so its capacity term needs only the singular values of the
channel, not a fading expectation.
"""

import logging
import math
from typing import Any, Optional

import numpy as np
from scipy import linalg

logger = logging.getLogger(__name__)

DEFAULT_MODE = 1
DEFAULT_ANTENNAS = 4

_RANK_TOLERANCE = 1.0e-12


class OamChannel:
    """Receive-side OAM channel with its singular spectrum in nonincreasing order."""

    def __init__(
            self,
            *,
            mode: int,
            antennas: int,
            entries: np.ndarray,
            singular_values: np.ndarray,
            matrix: Optional[np.ndarray] = None
    ) -> None:
        """
        Initialize an OamChannel instance.

        Args:
            mode: OAM mode index ℓ
            antennas: Number of receive antennas M
            entries: Length-M complex channel vector (or generating row of the circulant variant)
            singular_values: Singular values μ_k, nonincreasing
            matrix: Full channel matrix when it is not the plain vector

        Raises:
            ValueError: If antennas < 1 or the singular values are not sorted
        """
        if antennas < 1:
            raise ValueError(f"antennas must be >= 1, got {antennas}")
        spectrum = np.asarray(singular_values, dtype=float)
        if np.any(np.diff(spectrum) > _RANK_TOLERANCE) or np.any(spectrum < 0.0):
            raise ValueError("singular values must be nonnegative and nonincreasing")
        self._mode = int(mode)
        self._antennas = int(antennas)
        self._entries = np.asarray(entries, dtype=complex)
        self._singular_values = spectrum
        self._matrix = matrix

    @property
    def mode(self) -> int:
        """Get the OAM mode index ℓ."""
        return self._mode

    @property
    def antennas(self) -> int:
        """Get the number of receive antennas M."""
        return self._antennas

    @property
    def entries(self) -> np.ndarray:
        """Get a copy of the channel vector."""
        return self._entries.copy()

    @property
    def singular_values(self) -> np.ndarray:
        """Get a copy of the singular values μ_k."""
        return self._singular_values.copy()

    @property
    def principal_singular_value(self) -> float:
        """Get μ_1, the largest singular value."""
        return float(self._singular_values[0])

    @property
    def rank(self) -> int:
        """Get the number of nonzero singular values."""
        return int(np.count_nonzero(self._singular_values > _RANK_TOLERANCE))

    @property
    def matrix(self) -> np.ndarray:
        """Get the channel as a matrix: (M, 1) for the vector model, (M, M) for the circulant one."""
        if self._matrix is not None:
            return self._matrix.copy()
        return self._entries.reshape(-1, 1)

    def __str__(self) -> str:
        return f"OamChannel(mode={self._mode}, antennas={self._antennas}, mu1={self.principal_singular_value:.6g})"

    def __repr__(self) -> str:
        return (
            f"OamChannel(mode={self._mode}, antennas={self._antennas}, "
            f"singular_values={self._singular_values.tolist()})"
        )

    def __eq__(self, other: Any) -> bool:
        if not isinstance(other, OamChannel):
            return False
        return (
            self._mode == other._mode and
            self._antennas == other._antennas and
            np.array_equal(self._entries, other._entries) and
            np.array_equal(self._singular_values, other._singular_values)
        )


def _mode_vector(mode: int, antennas: int) -> np.ndarray:
    m = np.arange(antennas, dtype=float)
    return np.exp(-2j * math.pi * m * mode) / antennas


def build_oam_channel(mode: int = DEFAULT_MODE, antennas: int = DEFAULT_ANTENNAS) -> OamChannel:
    """
    Build the single-port OAM receive vector.

    The vector has one nonzero singular value, its Euclidean norm 1/√M; the
    remaining M-1 entries of the spectrum are zero.

    Args:
        mode: OAM mode index ℓ
        antennas: Number of receive antennas M

    Returns:
        OamChannel

    Raises:
        ValueError: If antennas < 1
    """
    if antennas < 1:
        raise ValueError(f"antennas must be >= 1, got {antennas}")
    entries = _mode_vector(mode, antennas)
    spectrum = np.zeros(antennas)
    spectrum[0] = float(np.linalg.norm(entries))
    logger.debug("OAM vector channel mode=%d M=%d mu1=%.6g", mode, antennas, spectrum[0])
    return OamChannel(mode=mode, antennas=antennas, entries=entries, singular_values=spectrum)


def build_circulant_oam_channel(mode: int = DEFAULT_MODE, antennas: int = DEFAULT_ANTENNAS) -> OamChannel:
    """
    Build the M×M circulant (UCA-to-UCA) variant.

    The generating row carries the azimuthal phase e^{-j2π(m-1)ℓ/M}/M; the
    singular values of a circulant matrix are the DFT magnitudes of that row.

    Args:
        mode: OAM mode index ℓ
        antennas: Number of antennas on each ring M

    Returns:
        OamChannel whose matrix is the full circulant
    """
    if antennas < 1:
        raise ValueError(f"antennas must be >= 1, got {antennas}")
    m = np.arange(antennas, dtype=float)
    row = np.exp(-2j * math.pi * m * mode / antennas) / antennas
    spectrum = np.sort(np.abs(np.fft.fft(row)))[::-1]
    return OamChannel(
        mode=mode,
        antennas=antennas,
        entries=row,
        singular_values=spectrum,
        matrix=linalg.circulant(row)
    )


def oam_sinr(channel: OamChannel, p_n2: float, rho: float) -> float:
    """
    Received SINR of the OAM symbol, p_N2 ρ μ_1².

    Args:
        channel: OAM channel
        p_n2: Power fraction of the OAM symbol, 0 <= p_n2 <= 1
        rho: Linear transmit SNR, rho >= 0

    Returns:
        Linear SINR
    """
    if not 0.0 <= p_n2 <= 1.0:
        raise ValueError(f"p_n2 must lie in [0, 1], got {p_n2}")
    if rho < 0.0:
        raise ValueError(f"rho must be >= 0, got {rho}")
    return p_n2 * rho * channel.principal_singular_value ** 2
