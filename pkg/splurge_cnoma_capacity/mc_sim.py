"""
Monte Carlo evaluation of ergodic capacities.

Three downlink schemes are simulated over the same fading draws:

- cnoma_oam: cooperative NOMA in two half slots plus an interference-free OAM
  symbol to the CCU in the first slot.
- cnoma: conventional cooperative NOMA without the OAM symbol.
- oma_oam: TDMA with four quarter slots at full power, OAM included.

Trials are grouped into fixed-size blocks. Block b draws from a Philox stream
keyed by (seed, b), so estimates depend only on (seed, trials, block_size) and
never on how many workers evaluate the blocks. Block statistics are merged in
block order with compensated sums.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, NamedTuple, Optional, Tuple, Union

import numpy as np
from joblib import Parallel, delayed
from numpy.typing import ArrayLike

from splurge_cnoma_capacity.channel import LinkTriple, power_gain_from_normals
from splurge_cnoma_capacity.exceptions import CapacityError, InfeasibleAllocationError
from splurge_cnoma_capacity.oam import OamChannel, oam_sinr

logger = logging.getLogger(__name__)

FloatOrArray = Union[float, np.ndarray]

DEFAULT_BLOCK_SIZE = 65_536

_LN2 = math.log(2.0)
_SUM_TOLERANCE = 1.0e-9


class Scheme(Enum):
    """Downlink schemes compared by the toolkit."""
    CNOMA_OAM = "cnoma_oam"
    CNOMA = "cnoma"
    OMA_OAM = "oma_oam"

    @classmethod
    def parse(cls, value: Union[str, "Scheme"]) -> "Scheme":
        """Accept enum members, values, or CLI spellings such as 'cnoma-oam'."""
        if isinstance(value, Scheme):
            return value
        try:
            return cls(str(value).strip().lower().replace("-", "_"))
        except ValueError as exc:
            names = ", ".join(member.value for member in cls)
            raise ValueError(f"unknown scheme {value!r}; expected one of: {names}") from exc


class BaselineSplit(Enum):
    """How conventional CNOMA uses the power the OAM symbol would have taken."""
    POWER_CONSERVING = "power_conserving"
    MATCHED = "matched"

    @classmethod
    def parse(cls, value: Union[str, "BaselineSplit"]) -> "BaselineSplit":
        if isinstance(value, BaselineSplit):
            return value
        try:
            return cls(str(value).strip().lower().replace("-", "_"))
        except ValueError as exc:
            names = ", ".join(member.value for member in cls)
            raise ValueError(f"unknown baseline split {value!r}; expected one of: {names}") from exc


@dataclass(frozen=True)
class PowerAllocation:
    """
    Power fractions of the CCU NOMA symbol, the OAM symbol and the CEU symbol.

    The CEU symbol must receive more power than the two CCU symbols together,
    and the three fractions must add up to the total power.
    """

    p_n1: float
    p_n2: float
    p_f: float
    total: float = 1.0

    def __post_init__(self) -> None:
        for name in ("p_n1", "p_n2", "p_f", "total"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0.0):
                raise InfeasibleAllocationError(f"{name} must be a finite value >= 0, got {value}")
        if self.total <= 0.0:
            raise InfeasibleAllocationError(f"total power must be > 0, got {self.total}")
        allocated = self.p_n1 + self.p_n2 + self.p_f
        if abs(allocated - self.total) > _SUM_TOLERANCE * max(1.0, self.total):
            raise InfeasibleAllocationError(
                f"p_n1 + p_n2 + p_f = {allocated:.12g} must equal the total power {self.total:.12g}"
            )
        if not self.p_f > self.p_n1 + self.p_n2:
            raise InfeasibleAllocationError(
                f"p_f={self.p_f} must exceed p_n1 + p_n2 = {self.p_n1 + self.p_n2}"
            )

    @classmethod
    def reference_rule(cls, p_f: float, *, total: float = 1.0) -> "PowerAllocation":
        """Split the remaining power equally: p_N1 = p_N2 = (P - p_F)/2."""
        share = (total - p_f) / 2.0
        return cls(p_n1=share, p_n2=share, p_f=p_f, total=total)

    def baseline_near_power(self, split: BaselineSplit = BaselineSplit.POWER_CONSERVING) -> float:
        """Power fraction of the CCU symbol in conventional CNOMA."""
        if split is BaselineSplit.MATCHED:
            return self.p_n1
        return self.p_n1 + self.p_n2


@dataclass(frozen=True)
class OperatingPoint:
    """Everything needed to evaluate one scheme at one SNR."""

    rho_db: float
    links: LinkTriple
    oam: OamChannel
    power: PowerAllocation
    d_ccu: float = 0.5
    d_ceu: float = 1.0

    def __post_init__(self) -> None:
        if not math.isfinite(self.rho_db):
            raise ValueError(f"rho_db must be finite, got {self.rho_db}")

    @property
    def rho(self) -> float:
        """Get the linear transmit SNR ρ = P/σ²."""
        return 10.0 ** (self.rho_db / 10.0)


@dataclass(frozen=True)
class StandardErrors:
    """Monte Carlo standard errors of the three capacity components."""

    ccu: float = 0.0
    ceu: float = 0.0
    sum: float = 0.0


@dataclass(frozen=True)
class SchemeCapacities:
    """CCU, CEU and sum capacity (bits/s/Hz) of one scheme at one operating point."""

    c_ccu: float
    c_ceu: float
    c_sum: float
    std_error: StandardErrors = field(default_factory=StandardErrors)
    effective_order: int = 0

    def __post_init__(self) -> None:
        if self.c_sum != self.c_ccu + self.c_ceu:
            raise ValueError(f"c_sum={self.c_sum} must equal c_ccu + c_ceu = {self.c_ccu + self.c_ceu}")
        if self.c_ccu < 0.0 or self.c_ceu < 0.0:
            raise ValueError(f"capacities must be >= 0, got c_ccu={self.c_ccu}, c_ceu={self.c_ceu}")

    @classmethod
    def from_components(
            cls,
            c_ccu: float,
            c_ceu: float,
            *,
            std_error: Optional[StandardErrors] = None,
            effective_order: int = 0
    ) -> "SchemeCapacities":
        """Build the triple with c_sum computed as c_ccu + c_ceu."""
        return cls(
            c_ccu=c_ccu,
            c_ceu=c_ceu,
            c_sum=c_ccu + c_ceu,
            std_error=std_error or StandardErrors(),
            effective_order=effective_order
        )


class SinrDiagnostics(NamedTuple):
    """Instantaneous SINRs of the first and second slot."""
    ccu_x1: FloatOrArray
    ccu_x2: FloatOrArray
    ceu_direct: FloatOrArray
    ceu_relay: FloatOrArray


Gains = Tuple[ArrayLike, ArrayLike, ArrayLike]


def _log2_1p(value: FloatOrArray) -> FloatOrArray:
    return np.log1p(value) / _LN2


def _unpack(gains: Gains) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    g1, g2, g3 = (np.asarray(g, dtype=float) for g in gains)
    if np.any(g1 < 0.0) or np.any(g2 < 0.0) or np.any(g3 < 0.0):
        raise ValueError("power gains must be non-negative")
    return g1, g2, g3


def _scalar_or_array(value: np.ndarray) -> FloatOrArray:
    return float(value) if np.ndim(value) == 0 else value


def instant_sinrs(gains: Gains, power: PowerAllocation, rho: float) -> SinrDiagnostics:
    """
    SINRs of the superposed first slot and the relayed second slot.

    Args:
        gains: (g1, g2, g3) = (|h1|², |h2|², |h3|²)
        power: Power allocation
        rho: Linear transmit SNR

    Returns:
        SinrDiagnostics with the CCU SINRs of x1 and x2, the direct CEU SINR of x2
        and the relayed CEU SINR
    """
    g1, g2, g3 = _unpack(gains)
    return SinrDiagnostics(
        ccu_x1=_scalar_or_array(rho * g1 * power.p_n1),
        ccu_x2=_scalar_or_array(rho * g1 * power.p_f / (rho * g1 * power.p_n1 + 1.0)),
        ceu_direct=_scalar_or_array(rho * g2 * power.p_f / (rho * g2 * power.p_n1 + 1.0)),
        ceu_relay=_scalar_or_array(instant_relay_sinr(g3, rho, total_power=power.total)),
    )


def instant_relay_sinr(g3: ArrayLike, rho: float, *, total_power: float = 1.0) -> FloatOrArray:
    """SINR of the second-slot relay link, sent at full power: ρ |h3|² P."""
    values = np.asarray(g3, dtype=float)
    if np.any(values < 0.0):
        raise ValueError("power gains must be non-negative")
    return _scalar_or_array(rho * values * total_power)


def instant_cnoma_oam(
        gains: Gains,
        oam: OamChannel,
        power: PowerAllocation,
        rho: float
) -> Tuple[FloatOrArray, FloatOrArray, float]:
    """
    Instantaneous capacities of x1, x2 and x3 for the proposed scheme.

    Every term carries the 1/2 factor of the two-slot protocol. x1 is limited by
    the weaker of the two direct links, x2 by the relay bottleneck
    min(p_N1 |h1|², |h3|²) and x3 is the deterministic OAM link.

    Returns:
        (c_x1, c_x2, c_x3) in bits/s/Hz; c_x3 is always a float
    """
    g1, g2, g3 = _unpack(gains)
    z1 = np.minimum(g2, g1)
    z2 = np.minimum(power.p_n1 * g1, g3)
    c_x1 = 0.5 * (_log2_1p(z1 * rho) - _log2_1p(z1 * power.p_n1 * rho))
    c_x2 = 0.5 * _log2_1p(z2 * rho)
    c_x3 = 0.5 * math.log1p(oam_sinr(oam, power.p_n2, rho)) / _LN2
    return _scalar_or_array(c_x1), _scalar_or_array(c_x2), c_x3


def instant_cnoma_baseline(
        gains: Gains,
        power: PowerAllocation,
        rho: float,
        *,
        split: BaselineSplit = BaselineSplit.POWER_CONSERVING
) -> Tuple[FloatOrArray, FloatOrArray]:
    """
    Instantaneous capacities of x1 and x2 for conventional CNOMA.

    Same expressions as the proposed scheme with p_N in place of p_N1 and no OAM
    symbol; p_N follows the chosen baseline split.
    """
    g1, g2, g3 = _unpack(gains)
    p_n = power.baseline_near_power(split)
    z1 = np.minimum(g2, g1)
    z2 = np.minimum(p_n * g1, g3)
    c_x1 = 0.5 * (_log2_1p(z1 * rho) - _log2_1p(z1 * p_n * rho))
    c_x2 = 0.5 * _log2_1p(z2 * rho)
    return _scalar_or_array(c_x1), _scalar_or_array(c_x2)


def instant_oma_oam(
        gains: Gains,
        oam: OamChannel,
        rho: float,
        total_power: float = 1.0
) -> Tuple[FloatOrArray, FloatOrArray, float]:
    """
    Instantaneous capacities of the TDMA scheme, four quarter slots at full power.

    Returns:
        (c_x1, c_x2, c_x3) in bits/s/Hz; c_x3 is always a float
    """
    g1, g2, g3 = _unpack(gains)
    z1 = np.minimum(g2, g1)
    z2 = np.minimum(total_power * g1, g3)
    c_x1 = 0.25 * _log2_1p(z1 * total_power * rho)
    c_x2 = 0.25 * _log2_1p(z2 * rho)
    c_x3 = 0.25 * math.log1p(total_power * rho * oam.principal_singular_value ** 2) / _LN2
    return _scalar_or_array(c_x1), _scalar_or_array(c_x2), c_x3


def block_generator(seed: int, block_index: int) -> np.random.Generator:
    """Counter-based stream for one block of trials, keyed by (seed, block_index)."""
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(block_index),))
    return np.random.Generator(np.random.Philox(sequence))


def draw_block_gains(
        links: LinkTriple,
        rng: np.random.Generator,
        size: int
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Draw (g1, g2, g3) for `size` trials.

    Row i of the normal matrix belongs to trial i, so a shorter draw from the
    same stream is a prefix of a longer one.
    """
    normals = rng.standard_normal((size, 6))
    g1 = power_gain_from_normals(links.bs_ccu, normals[:, 0:2])
    g2 = power_gain_from_normals(links.bs_ceu, normals[:, 2:4])
    g3 = power_gain_from_normals(links.ccu_ceu, normals[:, 4:6])
    return g1, g2, g3


def per_trial_capacities(
        scheme: Scheme,
        point: OperatingPoint,
        gains: Gains,
        *,
        split: BaselineSplit = BaselineSplit.POWER_CONSERVING
) -> Tuple[np.ndarray, np.ndarray, float]:
    """
    Fading-dependent CCU term, CEU term and the deterministic CCU term of a scheme.

    Raises:
        CapacityError: If a per-draw capacity comes out negative
    """
    rho = point.rho
    if scheme is Scheme.CNOMA_OAM:
        c_x1, c_x2, constant = instant_cnoma_oam(gains, point.oam, point.power, rho)
    elif scheme is Scheme.CNOMA:
        c_x1, c_x2 = instant_cnoma_baseline(gains, point.power, rho, split=split)
        constant = 0.0
    else:
        c_x1, c_x2, constant = instant_oma_oam(gains, point.oam, rho, point.power.total)
    c_x1 = np.atleast_1d(np.asarray(c_x1, dtype=float))
    c_x2 = np.atleast_1d(np.asarray(c_x2, dtype=float))
    if np.any(c_x1 < 0.0) or np.any(c_x2 < 0.0):
        raise CapacityError(f"negative instantaneous capacity for {scheme.value} at rho_db={point.rho_db}")
    return c_x1, c_x2, constant


class _BlockMoments(NamedTuple):
    count: int
    means: np.ndarray
    m2: np.ndarray


def _block_moments(
        scheme: Scheme,
        point: OperatingPoint,
        seed: int,
        block_index: int,
        size: int,
        split: BaselineSplit
) -> _BlockMoments:
    rng = block_generator(seed, block_index)
    gains = draw_block_gains(point.links, rng, size)
    c_ccu, c_ceu, _ = per_trial_capacities(scheme, point, gains, split=split)
    samples = np.vstack([c_ccu, c_ceu, c_ccu + c_ceu])
    means = samples.mean(axis=1)
    m2 = ((samples - means[:, None]) ** 2).sum(axis=1)
    return _BlockMoments(count=size, means=means, m2=m2)


def _block_sizes(trials: int, block_size: int) -> List[int]:
    full, remainder = divmod(trials, block_size)
    return [block_size] * full + ([remainder] if remainder else [])


def _merge(blocks: List[_BlockMoments]) -> Tuple[np.ndarray, np.ndarray]:
    """Combine block means and squared deviations in block order."""
    total = sum(block.count for block in blocks)
    means = np.array([
        math.fsum(block.count * block.means[i] for block in blocks) / total for i in range(3)
    ])
    m2 = np.array([
        math.fsum(
            [block.m2[i] for block in blocks] +
            [block.count * (block.means[i] - means[i]) ** 2 for block in blocks]
        ) for i in range(3)
    ])
    if total > 1:
        std_error = np.sqrt(m2 / (total - 1) / total)
    else:
        std_error = np.zeros(3)
    return means, std_error


def ergodic_capacities(
        scheme: Union[Scheme, str],
        point: OperatingPoint,
        trials: int,
        seed: int,
        *,
        block_size: int = DEFAULT_BLOCK_SIZE,
        threads: int = 1,
        split: BaselineSplit = BaselineSplit.POWER_CONSERVING
) -> SchemeCapacities:
    """
    Estimate the ergodic capacities of a scheme by averaging over fading draws.

    C_CCU adds the constant OAM term to the averaged x1 capacity, C_CEU is the
    averaged x2 capacity. Standard errors of C_CCU, C_CEU and C_sum come from
    the per-trial sample variances.

    Args:
        scheme: Scheme to simulate
        point: Operating point
        trials: Number of fading draws (>= 1)
        seed: Root seed
        block_size: Trials per random stream; part of the reproducibility key
        threads: Worker cap; does not change the result
        split: Power split of conventional CNOMA

    Returns:
        SchemeCapacities with standard errors

    Raises:
        ValueError: If trials < 1 or block_size < 1
    """
    scheme = Scheme.parse(scheme)
    if int(trials) != trials or trials < 1:
        raise ValueError(f"trials must be an integer >= 1, got {trials}")
    if block_size < 1:
        raise ValueError(f"block_size must be >= 1, got {block_size}")
    sizes = _block_sizes(int(trials), int(block_size))
    logger.debug(
        "simulating %s at %.3g dB: %d trials in %d blocks on %d worker(s)",
        scheme.value, point.rho_db, trials, len(sizes), threads
    )

    if threads > 1 and len(sizes) > 1:
        blocks = Parallel(n_jobs=min(threads, len(sizes)), prefer="threads")(
            delayed(_block_moments)(scheme, point, seed, index, size, split) for index, size in enumerate(sizes)
        )
    else:
        blocks = [_block_moments(scheme, point, seed, index, size, split) for index, size in enumerate(sizes)]

    means, std_error = _merge(list(blocks))
    _, _, constant = per_trial_capacities(scheme, point, (1.0, 1.0, 1.0), split=split)
    return SchemeCapacities.from_components(
        float(means[0]) + constant,
        float(means[1]),
        std_error=StandardErrors(ccu=float(std_error[0]), ceu=float(std_error[1]), sum=float(std_error[2]))
    )
