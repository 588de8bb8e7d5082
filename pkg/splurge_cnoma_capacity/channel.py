"""
Rician fading statistics for the three fading links of the cooperative scheme.

Links are BS-to-CCU (h1, subscript y in the closed forms), BS-to-CEU (h2,
subscript x) and CCU-to-CEU (h3, subscript w). For a link with K-factor K and
average power Ω the power gain g = |h|² has density

    f(g) = A Σ_n B(n) g^n e^{-a g},   a = (1+K)/Ω,   A = a e^{-K},
    B(n) = K^n (1+K)^n / (Ω^n (n!)²),

so its survival function is A Σ_n B̃(n) Γ(n+1, a z) with B̃(n) = B(n)/a^{n+1}.
Each term of that sum equals e^{-K} K^n/n! · Q(n+1, a z), a Poisson(K) mixture
of regularized gamma tails, which is the form evaluated here.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Union

import numpy as np
from numpy.typing import ArrayLike
from scipy import special, stats

from splurge_cnoma_capacity.exceptions import SeriesTruncationError
from splurge_cnoma_capacity.special_fn import marcum_q1

logger = logging.getLogger(__name__)

FloatOrArray = Union[float, np.ndarray]


class RicianLink:
    """Fading statistics of one link: Rician K-factor and average power Ω."""

    def __init__(
            self,
            k_factor: float,
            omega: float,
            *,
            name: str = "link"
    ) -> None:
        """
        Initialize a RicianLink instance.

        Args:
            k_factor: Ratio of line-of-sight to scattered power (K >= 0)
            omega: Average power gain E[|h|²] (Ω > 0)
            name: Label used in diagnostics

        Raises:
            ValueError: If k_factor is negative or omega is not positive
        """
        k_factor = float(k_factor)
        omega = float(omega)
        if not (math.isfinite(k_factor) and k_factor >= 0.0):
            raise ValueError(f"k_factor must be a finite value >= 0, got {k_factor}")
        if not (math.isfinite(omega) and omega > 0.0):
            raise ValueError(f"omega must be a finite value > 0, got {omega}")
        self._k_factor = k_factor
        self._omega = omega
        self._name = name

    @property
    def k_factor(self) -> float:
        """Get the Rician K-factor."""
        return self._k_factor

    @property
    def omega(self) -> float:
        """Get the average power gain Ω."""
        return self._omega

    @property
    def name(self) -> str:
        """Get the link label."""
        return self._name

    @property
    def rate(self) -> float:
        """Get a = (1+K)/Ω, the exponential rate of the scattered component."""
        return (1.0 + self._k_factor) / self._omega

    @property
    def normalizer(self) -> float:
        """Get A = a e^{-K}, the constant making the density series integrate to one."""
        return self.rate * math.exp(-self._k_factor)

    def b_coefficient(self, n: int) -> float:
        """Get B(n) = K^n (1+K)^n / (Ω^n (n!)²)."""
        if n == 0:
            return 1.0
        if self._k_factor == 0.0:
            return 0.0
        return math.exp(n * math.log(self._k_factor * self.rate) - 2.0 * math.lgamma(n + 1))

    def b_tilde(self, n: int) -> float:
        """Get B̃(n) = B(n) / a^{n+1}."""
        return self.b_coefficient(n) / self.rate ** (n + 1)

    def __str__(self) -> str:
        return f"RicianLink({self._name}, K={self._k_factor}, omega={self._omega})"

    def __repr__(self) -> str:
        return f"RicianLink(k_factor={self._k_factor!r}, omega={self._omega!r}, name={self._name!r})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RicianLink):
            return NotImplemented
        return self._k_factor == other._k_factor and self._omega == other._omega

    def __hash__(self) -> int:
        return hash((self._k_factor, self._omega))


@dataclass(frozen=True)
class LinkTriple:
    """The three fading links: BS-CCU (h1), BS-CEU (h2) and CCU-CEU (h3)."""

    bs_ccu: RicianLink
    bs_ceu: RicianLink
    ccu_ceu: RicianLink

    def __post_init__(self) -> None:
        if not self.bs_ceu.omega < self.bs_ccu.omega:
            raise ValueError(
                f"the cell-edge link must be weaker than the cell-centre link, "
                f"got omega_bs_ceu={self.bs_ceu.omega} >= omega_bs_ccu={self.bs_ccu.omega}"
            )


@dataclass(frozen=True)
class SeriesControl:
    """Truncation rule for the infinite sums of the Rician series."""

    max_order: int = 40
    tail_tolerance: float = 1.0e-10

    def __post_init__(self) -> None:
        if int(self.max_order) != self.max_order or self.max_order < 1:
            raise ValueError(f"max_order must be an integer >= 1, got {self.max_order}")
        if not (self.tail_tolerance > 0.0):
            raise ValueError(f"tail_tolerance must be > 0, got {self.tail_tolerance}")


@dataclass(frozen=True)
class SeriesReport:
    """Poisson mixing weights of one link together with the order actually used."""

    weights: np.ndarray = field(repr=False)
    effective_order: int
    residual: float


DEFAULT_CONTROL = SeriesControl()


def reference_links() -> LinkTriple:
    """Return the reference links: K 5/2/5 and Ω 36/9/36 for BS-CCU, BS-CEU, CCU-CEU."""
    return LinkTriple(
        bs_ccu=RicianLink(5.0, 36.0, name="bs_ccu"),
        bs_ceu=RicianLink(2.0, 9.0, name="bs_ceu"),
        ccu_ceu=RicianLink(5.0, 36.0, name="ccu_ceu"),
    )


def series_weights(
        link: RicianLink,
        control: SeriesControl = DEFAULT_CONTROL
) -> SeriesReport:
    """
    Compute the mixing weights e^{-K} K^n/n! = A B̃(n) n! up to the effective order.

    Terms are added until the order has passed the Poisson mode and the last
    term is below tail_tolerance relative to the running sum.

    Args:
        link: Fading link
        control: Truncation rule

    Returns:
        SeriesReport with weights[0..effective_order]

    Raises:
        SeriesTruncationError: If the tolerance is not met by max_order
    """
    if link.k_factor == 0.0:
        # Rayleigh: all mass at order 0, the series is exact.
        return SeriesReport(weights=np.ones(1), effective_order=0, residual=0.0)
    orders = np.arange(control.max_order + 1)
    pmf = stats.poisson.pmf(orders, link.k_factor)
    running = 0.0
    residual = 1.0
    for n in range(control.max_order + 1):
        running += pmf[n]
        residual = pmf[n] / running if running > 0.0 else 1.0
        if n >= link.k_factor and residual <= control.tail_tolerance:
            logger.debug("%s series truncated at order %d (residual %.3e)", link, n, residual)
            return SeriesReport(weights=pmf[: n + 1].copy(), effective_order=n, residual=float(residual))
    raise SeriesTruncationError(
        f"series for {link} did not reach tolerance {control.tail_tolerance} within {control.max_order} terms",
        max_order=control.max_order,
        residual=float(residual)
    )


def _to_output(values: np.ndarray, original: Any) -> FloatOrArray:
    if np.ndim(original) == 0:
        return float(values)
    return values


def survival_power_gain(
        link: RicianLink,
        z: ArrayLike,
        control: SeriesControl = DEFAULT_CONTROL
) -> FloatOrArray:
    """
    Evaluate P(|h|² > z) by the truncated Poisson-mixture series.

    Args:
        link: Fading link
        z: Threshold(s), z >= 0
        control: Truncation rule

    Returns:
        Survival probability, scalar for scalar input
    """
    z_values = np.asarray(z, dtype=float)
    if np.any(z_values < 0.0):
        raise ValueError("power gain thresholds must be non-negative")
    report = series_weights(link, control)
    orders = np.arange(report.effective_order + 1, dtype=float)
    tails = special.gammaincc(orders[:, None] + 1.0, link.rate * z_values.reshape(1, -1))
    survival = np.clip(report.weights @ tails, 0.0, 1.0).reshape(z_values.shape)
    return _to_output(survival, z)


def cdf_power_gain(
        link: RicianLink,
        z: ArrayLike,
        control: SeriesControl = DEFAULT_CONTROL
) -> FloatOrArray:
    """
    Evaluate P(|h|² <= z) for a Rician link.

    Args:
        link: Fading link
        z: Threshold(s), z >= 0
        control: Truncation rule

    Returns:
        CDF value, scalar for scalar input

    Raises:
        SeriesTruncationError: If the series tail bound is not met at max_order
    """
    return _to_output(1.0 - np.asarray(survival_power_gain(link, z, control)), z)


def cdf_min_pair(
        x_link: RicianLink,
        y_link: RicianLink,
        control: SeriesControl,
        z1: ArrayLike
) -> FloatOrArray:
    """
    Evaluate the CDF of z1 = min(|h_y|², |h_x|²) for independent links.

    F(z1) = 1 - A_x A_y Σ_n Σ_k B̃_x(n) B̃_y(k) Γ(n+1, a_x z1) Γ(k+1, a_y z1),
    which factors into the product of the two survival series.
    """
    survival = np.asarray(survival_power_gain(x_link, z1, control)) * np.asarray(
        survival_power_gain(y_link, z1, control)
    )
    return _to_output(1.0 - survival, z1)


def cdf_scaled_min(
        w_link: RicianLink,
        y_link: RicianLink,
        p_n1: float,
        control: SeriesControl,
        z2: ArrayLike
) -> FloatOrArray:
    """
    Evaluate the CDF of z2 = min(p_N1 |h_y|², |h_w|²).

    Scaling the y-link gain by p_N1 replaces its rate a_y by a_y / p_N1.

    Raises:
        ValueError: If p_n1 is outside (0, 1]
    """
    if not 0.0 < p_n1 <= 1.0:
        raise ValueError(f"p_n1 must lie in (0, 1], got {p_n1}")
    z_values = np.asarray(z2, dtype=float)
    survival = np.asarray(survival_power_gain(w_link, z_values, control)) * np.asarray(
        survival_power_gain(y_link, z_values / p_n1, control)
    )
    return _to_output(1.0 - survival, z2)


def marcum_cdf_power_gain(link: RicianLink, z: float) -> float:
    """Evaluate P(|h|² <= z) as 1 - Q_1(√(2K), √(2(1+K)z/Ω)) for cross-checking the series."""
    return 1.0 - marcum_q1(math.sqrt(2.0 * link.k_factor), math.sqrt(2.0 * link.rate * z))


def power_gain_from_normals(link: RicianLink, normals: np.ndarray) -> np.ndarray:
    """
    Map standard normal pairs to Rician power gains.

    Args:
        link: Fading link
        normals: Array whose last axis holds (real, imaginary) standard normal draws

    Returns:
        |h|² with h = √Ω (√(K/(K+1)) + √(1/(K+1)) u), u = (X + jY)/√2
    """
    k = link.k_factor
    in_phase = math.sqrt(k) + normals[..., 0] / math.sqrt(2.0)
    quadrature = normals[..., 1] / math.sqrt(2.0)
    return link.omega / (k + 1.0) * (in_phase * in_phase + quadrature * quadrature)


def sample_power_gains(
        link: RicianLink,
        rng: np.random.Generator,
        *,
        size: int
) -> np.ndarray:
    """Draw `size` independent power gains from the link's distribution."""
    return power_gain_from_normals(link, rng.standard_normal((size, 2)))


def sample_power_gain(link: RicianLink, rng: np.random.Generator) -> float:
    """Draw a single power gain |h|²."""
    return float(sample_power_gains(link, rng, size=1)[0])


def estimate_k_factor(gains: ArrayLike) -> float:
    """
    Estimate K from the second and fourth moments of the envelope.

    With r = E[g²]/E[g]² = (K² + 4K + 2)/(K + 1)², K = s/(1 - s) where s = √(2 - r).
    """
    values = np.asarray(gains, dtype=float)
    mean = float(np.mean(values))
    ratio = float(np.mean(values * values)) / (mean * mean)
    s = math.sqrt(min(max(2.0 - ratio, 0.0), 1.0))
    if s >= 1.0:
        return math.inf
    return s / (1.0 - s)
