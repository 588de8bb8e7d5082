"""
Closed-form ergodic capacities of the cooperative NOMA scheme with OAM.

For independent Rician gains with Poisson(K) mixing weights c_n, d_k the
survival function of z = min(g_x, g_y) is a finite combination of
z^{i+j} e^{-(a_x + a_y) z} terms. Integrating E[ln(1 + ρz)] = ∫ ρ S(z)/(1 + ρz) dz
term by term gives

    D(ρ) = Σ_n Σ_k c_n d_k Σ_{i<=n} Σ_{j<=k} (i+j)!/(i! j!) (a_x/b)^i (a_y/b)^j R_{i+j}(b/ρ),

with b = a_x + a_y and R_m(x) = x^m e^x Γ(-m, x). Exchanging the order of
summation collapses the four sums to two over (i, j), weighted by the
Poisson tail masses Σ_{n>=i} c_n and Σ_{k>=j} d_k.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict

import numpy as np
from scipy import integrate, special

from splurge_cnoma_capacity.channel import RicianLink, SeriesControl, series_weights, survival_power_gain
from splurge_cnoma_capacity.mc_sim import BaselineSplit, OperatingPoint, SchemeCapacities
from splurge_cnoma_capacity.oam import OamChannel, oam_sinr
from splurge_cnoma_capacity.special_fn import exp_scaled_negative_gamma

logger = logging.getLogger(__name__)

_LN2 = math.log(2.0)


class EquationForm(Enum):
    """Coefficient structure used for D(ρ)."""
    DERIVED = "derived"
    PRINTED = "printed"


@dataclass(frozen=True)
class SeriesEvaluation:
    """Value of a log-capacity series with its truncation diagnostics."""

    value: float
    effective_order: int
    residual: float


@dataclass(frozen=True)
class ClosedFormTerms:
    """Exact per-symbol capacities and the series orders behind them."""

    c_x1_exact: float
    c_x2_exact: float
    c_x3_exact: float
    effective_orders: Dict[str, int] = field(default_factory=dict)
    residuals: Dict[str, float] = field(default_factory=dict)

    @property
    def max_effective_order(self) -> int:
        """Get the largest series order used by any term."""
        return max(self.effective_orders.values(), default=0)


@dataclass(frozen=True)
class DFormComparison:
    """D(ρ) under both coefficient structures, checked against the integral oracle."""

    rho: float
    derived: float
    printed: float
    oracle: float

    @property
    def derived_relative_error(self) -> float:
        return abs(self.derived - self.oracle) / abs(self.oracle)

    @property
    def printed_relative_error(self) -> float:
        return abs(self.printed - self.oracle) / abs(self.oracle)


def _tail_masses(weights: np.ndarray) -> np.ndarray:
    """Σ_{n>=i} c_n for every i, over the truncated weights."""
    return np.cumsum(weights[::-1])[::-1]


def _log_capacity_series(
        first: RicianLink,
        first_rate: float,
        second: RicianLink,
        second_rate: float,
        control: SeriesControl,
        rho: float,
        *,
        form: EquationForm = EquationForm.DERIVED
) -> SeriesEvaluation:
    """
    E[ln(1 + ρ min(g_1, g_2))] for Rician gains with the given exponential rates.

    The rates may differ from the links' own (scaled gains); the mixing weights
    depend only on the K-factors.
    """
    if not rho > 0.0:
        raise ValueError(f"rho must be > 0, got {rho}")
    first_report = series_weights(first, control)
    second_report = series_weights(second, control)
    first_tail = _tail_masses(first_report.weights)
    second_tail = _tail_masses(second_report.weights)

    b = first_rate + second_rate
    x = b / rho
    i = np.arange(first_report.effective_order + 1)[:, None]
    j = np.arange(second_report.effective_order + 1)[None, :]
    m = i + j
    scaled = exp_scaled_negative_gamma(int(m.max()), x)[m]

    if form is EquationForm.DERIVED:
        log_coefficient = (
            special.gammaln(m + 1) - special.gammaln(i + 1) - special.gammaln(j + 1) +
            i * math.log(first_rate / b) + j * math.log(second_rate / b)
        )
        coefficient = np.exp(log_coefficient)
    else:
        # (i+j)/(i! j!) (a_1^i + a_2^j) ρ^{-(i+j)} e^{b/ρ} Γ(-i-j, b/ρ), with
        # ρ^{-m} e^{x} Γ(-m, x) = R_m(x) / b^m.
        coefficient = (
            m / np.exp(special.gammaln(i + 1) + special.gammaln(j + 1)) *
            (first_rate ** i + second_rate ** j) / b ** m
        )

    value = float(np.sum(first_tail[:, None] * second_tail[None, :] * coefficient * scaled))
    order = max(first_report.effective_order, second_report.effective_order)
    residual = max(first_report.residual, second_report.residual)
    logger.debug("%s log-capacity series at rho=%.6g: order %d, value %.12g", form.value, rho, order, value)
    return SeriesEvaluation(value=value, effective_order=order, residual=residual)


def d_of_rho(
        x_link: RicianLink,
        y_link: RicianLink,
        control: SeriesControl,
        rho: float,
        *,
        form: EquationForm = EquationForm.DERIVED
) -> float:
    """
    Evaluate D(ρ) = E[ln(1 + ρ min(|h_x|², |h_y|²))].

    Args:
        x_link: BS-to-CEU link
        y_link: BS-to-CCU link
        control: Series truncation rule
        rho: Linear SNR (> 0)
        form: DERIVED (term-by-term integration) or PRINTED (literal coefficient structure)

    Returns:
        D(ρ) in nats

    Raises:
        SeriesTruncationError: If either link's series does not converge
    """
    return _log_capacity_series(x_link, x_link.rate, y_link, y_link.rate, control, rho, form=form).value


def d_of_rho_printed(x_link: RicianLink, y_link: RicianLink, control: SeriesControl, rho: float) -> float:
    """D(ρ) with the coefficient structure exactly as typeset; kept for comparison only."""
    return d_of_rho(x_link, y_link, control, rho, form=EquationForm.PRINTED)


def _oracle(
        first: RicianLink,
        second: RicianLink,
        second_scale: float,
        control: SeriesControl,
        rho: float
) -> float:
    def integrand(z: float) -> float:
        survival = survival_power_gain(first, z, control) * survival_power_gain(second, z / second_scale, control)
        return rho * survival / (1.0 + rho * z)

    value, _ = integrate.quad(integrand, 0.0, np.inf, epsabs=0.0, epsrel=1.0e-10, limit=400)
    return float(value)


def d_oracle(x_link: RicianLink, y_link: RicianLink, control: SeriesControl, rho: float) -> float:
    """
    Integral oracle for D(ρ): ∫_0^∞ ρ (1 - F(z)) / (1 + ρz) dz with F from the series CDF.
    """
    return _oracle(x_link, y_link, 1.0, control, rho)


def x2_oracle(w_link: RicianLink, y_link: RicianLink, p_n1: float, control: SeriesControl, rho: float) -> float:
    """Integral oracle for E[ln(1 + ρ min(p_N1 |h_y|², |h_w|²))]."""
    return _oracle(w_link, y_link, p_n1, control, rho)


def compare_d_forms(x_link: RicianLink, y_link: RicianLink, control: SeriesControl, rho: float) -> DFormComparison:
    """Evaluate D(ρ) in both forms and by quadrature."""
    return DFormComparison(
        rho=rho,
        derived=d_of_rho(x_link, y_link, control, rho),
        printed=d_of_rho_printed(x_link, y_link, control, rho),
        oracle=d_oracle(x_link, y_link, control, rho),
    )


def _c_x1_series(
        x_link: RicianLink,
        y_link: RicianLink,
        p_n1: float,
        control: SeriesControl,
        rho: float
) -> SeriesEvaluation:
    if not 0.0 <= p_n1 <= 1.0:
        raise ValueError(f"p_n1 must lie in [0, 1], got {p_n1}")
    full = _log_capacity_series(x_link, x_link.rate, y_link, y_link.rate, control, rho)
    if p_n1 == 1.0:
        return SeriesEvaluation(0.0, full.effective_order, full.residual)
    reduced = 0.0 if p_n1 == 0.0 else d_of_rho(x_link, y_link, control, p_n1 * rho)
    value = max(0.0, 0.5 * (full.value - reduced) / _LN2)
    return SeriesEvaluation(value, full.effective_order, full.residual)


def _c_x2_series(
        w_link: RicianLink,
        y_link: RicianLink,
        p_n1: float,
        control: SeriesControl,
        rho: float
) -> SeriesEvaluation:
    if not 0.0 <= p_n1 <= 1.0:
        raise ValueError(f"p_n1 must lie in [0, 1], got {p_n1}")
    if p_n1 == 0.0:
        return SeriesEvaluation(0.0, 0, 0.0)
    series = _log_capacity_series(w_link, w_link.rate, y_link, y_link.rate / p_n1, control, rho)
    return SeriesEvaluation(0.5 * series.value / _LN2, series.effective_order, series.residual)


def c_x1_exact(x_link: RicianLink, y_link: RicianLink, p_n1: float, control: SeriesControl, rho: float) -> float:
    """
    Exact ergodic capacity of x1: (D(ρ) - D(p_N1 ρ)) / (2 ln 2).

    Args:
        x_link: BS-to-CEU link
        y_link: BS-to-CCU link
        p_n1: Power fraction of x1
        control: Series truncation rule
        rho: Linear SNR (> 0)

    Returns:
        Capacity in bits/s/Hz
    """
    return _c_x1_series(x_link, y_link, p_n1, control, rho).value


def c_x2_exact(w_link: RicianLink, y_link: RicianLink, p_n1: float, control: SeriesControl, rho: float) -> float:
    """
    Exact ergodic capacity of x2, limited by min(p_N1 |h1|², |h3|²).

    Same series as D(ρ) with a_y replaced by a_y / p_N1, divided by 2 ln 2.
    """
    return _c_x2_series(w_link, y_link, p_n1, control, rho).value


def c_x3_exact(oam: OamChannel, p_n2: float, rho: float) -> float:
    """Capacity of the deterministic OAM symbol, ½ log2(1 + p_N2 ρ μ_1²)."""
    return 0.5 * math.log1p(oam_sinr(oam, p_n2, rho)) / _LN2


def exact_terms(point: OperatingPoint, control: SeriesControl) -> ClosedFormTerms:
    """Evaluate the three per-symbol capacities at an operating point."""
    links = point.links
    rho = point.rho
    x1 = _c_x1_series(links.bs_ceu, links.bs_ccu, point.power.p_n1, control, rho)
    x2 = _c_x2_series(links.ccu_ceu, links.bs_ccu, point.power.p_n1, control, rho)
    return ClosedFormTerms(
        c_x1_exact=x1.value,
        c_x2_exact=x2.value,
        c_x3_exact=c_x3_exact(point.oam, point.power.p_n2, rho),
        effective_orders={"c_x1": x1.effective_order, "c_x2": x2.effective_order},
        residuals={"c_x1": x1.residual, "c_x2": x2.residual},
    )


def exact_scheme_capacities(point: OperatingPoint, control: SeriesControl) -> SchemeCapacities:
    """
    Assemble C_CCU = C_x1 + C_x3, C_CEU = C_x2 and their sum for the proposed scheme.

    Standard errors are zero; effective_order reports the deepest series used.
    """
    terms = exact_terms(point, control)
    return SchemeCapacities.from_components(
        terms.c_x1_exact + terms.c_x3_exact,
        terms.c_x2_exact,
        effective_order=terms.max_effective_order
    )


def exact_baseline_capacities(
        point: OperatingPoint,
        control: SeriesControl,
        split: BaselineSplit = BaselineSplit.POWER_CONSERVING
) -> SchemeCapacities:
    """Closed form of conventional CNOMA: the same series with p_N in place of p_N1 and no OAM term."""
    links = point.links
    p_n = point.power.baseline_near_power(split)
    x1 = _c_x1_series(links.bs_ceu, links.bs_ccu, p_n, control, point.rho)
    x2 = _c_x2_series(links.ccu_ceu, links.bs_ccu, p_n, control, point.rho)
    return SchemeCapacities.from_components(
        x1.value,
        x2.value,
        effective_order=max(x1.effective_order, x2.effective_order)
    )
