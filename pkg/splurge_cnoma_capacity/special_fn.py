"""
Special functions used by the closed-form capacity expressions.

Provides the upper incomplete gamma function for any real order (including the
negative integer orders reached by the capacity series), a quadrature oracle
for it, the exponentially scaled sequence x^m e^x Γ(-m, x) consumed by the
closed-form module, and the first-order Marcum Q function used to cross-check
the Rician CDF series.

All functions are pure and safe to call concurrently.
"""

import logging
import math
import sys
import warnings
from typing import List

import numpy as np
from scipy import integrate, special

from splurge_cnoma_capacity.exceptions import (
    CancellationWarning,
    DomainError,
    NumericOverflowError,
    SeriesTruncationError,
)

logger = logging.getLogger(__name__)

# A recurrence step whose result is smaller than its largest operand by this
# factor has lost more than six decimal digits.
_CANCELLATION_RATIO = 1.0e-6

# Above this argument the exponential-integral continued fraction converges
# quickly and the recurrence starts to cancel.
_CONTINUED_FRACTION_THRESHOLD = 1.0

_CF_MAX_ITERATIONS = 500
_CF_ACCURACY = 1.0e-15

_MARCUM_CHUNK = 64
_MARCUM_MAX_TERMS = 200_000
_MARCUM_ACCURACY = 1.0e-16


def _check_finite(value: float, *, what: str) -> float:
    if not math.isfinite(value):
        raise NumericOverflowError(f"{what} is not representable as a finite double")
    return value


def _validate_gamma_args(a: float, x: float) -> None:
    if not (math.isfinite(a) and math.isfinite(x)):
        raise DomainError(f"incomplete gamma arguments must be finite, got a={a}, x={x}")
    if x < 0.0:
        raise DomainError(f"incomplete gamma argument x must be non-negative, got x={x}")
    if a <= 0.0 and x <= 0.0:
        raise DomainError(f"Γ(a, x) diverges for a={a} <= 0 with x={x} <= 0")


def _positive_integer_gamma(n_plus_one: int, x: float) -> float:
    """Γ(n+1, x) = n! e^{-x} Σ_{m=0}^{n} x^m/m!."""
    n = n_plus_one - 1
    term = 1.0
    total = 1.0
    for m in range(1, n + 1):
        term *= x / m
        total += term
    if not math.isfinite(total):
        raise NumericOverflowError(f"Γ({n_plus_one}, {x}) overflows the finite-sum form")
    try:
        return math.exp(math.lgamma(n + 1) - x + math.log(total))
    except OverflowError as exc:
        raise NumericOverflowError(f"Γ({n_plus_one}, {x}) overflows: {exc}") from exc


def _scaled_exponential_integral(order: int, x: float) -> float:
    """
    Evaluate e^x E_n(x) by the modified Lentz continued fraction.

    Converges for x > 0 and n >= 1; fastest for x >= 1.
    """
    tiny = sys.float_info.min / sys.float_info.epsilon
    b = x + order
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, _CF_MAX_ITERATIONS + 1):
        an = -i * (order - 1 + i)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < _CF_ACCURACY:
            return h
    raise SeriesTruncationError(
        f"continued fraction for E_{order}({x}) did not converge",
        max_order=_CF_MAX_ITERATIONS,
        residual=abs(delta - 1.0)
    )


def incomplete_gamma_quad(a: float, x: float) -> float:
    """
    Evaluate Γ(a, x) by adaptive quadrature.

    The integral is taken in the logarithmic variable t = e^s and scaled by the
    integrand's value at the lower limit, which keeps it smooth for strongly
    negative orders and large arguments alike.

    Args:
        a: Real order
        x: Strictly positive lower limit

    Returns:
        Γ(a, x)

    Raises:
        DomainError: If x <= 0
    """
    a = float(a)
    x = float(x)
    if not x > 0.0:
        raise DomainError(f"quadrature oracle requires x > 0, got x={x}")
    log_x = math.log(x)
    s_low = log_x
    s_high = math.log(max(x, abs(a), 1.0) + 80.0 + 4.0 * abs(a))
    offset = a * log_x - x

    def integrand(s: float) -> float:
        return math.exp(a * s - math.exp(s) - offset)

    value, _ = integrate.quad(integrand, s_low, s_high, epsabs=0.0, epsrel=1.0e-13, limit=400)
    try:
        return _check_finite(value * math.exp(offset), what=f"Γ({a}, {x})")
    except OverflowError as exc:
        raise NumericOverflowError(f"Γ({a}, {x}) overflows: {exc}") from exc


def _recurrence_step(upper: float, a: float, x: float) -> float:
    """
    One downward step Γ(a, x) = (Γ(a+1, x) - x^a e^{-x}) / a.

    Falls back to quadrature when the subtraction cancels.
    """
    try:
        lead = math.exp(a * math.log(x) - x)
    except OverflowError as exc:
        raise NumericOverflowError(f"x^a e^-x overflows for a={a}, x={x}") from exc
    difference = upper - lead
    scale = max(abs(upper), abs(lead))
    if scale > 0.0 and abs(difference) < _CANCELLATION_RATIO * scale:
        message = f"Γ({a}, {x}) recurrence lost more than 6 digits, using quadrature"
        logger.warning(message)
        warnings.warn(message, CancellationWarning, stacklevel=3)
        return incomplete_gamma_quad(a, x)
    return difference / a


def upper_incomplete_gamma(a: float, x: float) -> float:
    """
    Evaluate the upper incomplete gamma function Γ(a, x) = ∫_x^∞ t^{a-1} e^{-t} dt.

    Positive integer orders use the finite sum n! e^{-x} Σ x^m/m!. Non-positive
    integer orders use the downward recurrence seeded at Γ(0, x) = E_1(x) for
    x <= 1, and the identity Γ(-m, x) = x^{-m} E_{m+1}(x) with the continued
    fraction for E_{m+1} above that. Other negative orders recur down from a
    seed in (0, 1). Any recurrence step that cancels is replaced by quadrature.

    Args:
        a: Real order
        x: Argument; x >= 0, and x > 0 when a <= 0

    Returns:
        Γ(a, x)

    Raises:
        DomainError: If a <= 0 and x <= 0, or an argument is not finite
        NumericOverflowError: If the value is not representable
    """
    a = float(a)
    x = float(x)
    _validate_gamma_args(a, x)

    if a > 0.0:
        if a.is_integer():
            return _positive_integer_gamma(int(a), x)
        if x == 0.0:
            return _check_finite(special.gamma(a), what=f"Γ({a})")
        value = float(special.gammaincc(a, x)) * float(special.gamma(a))
        return _check_finite(value, what=f"Γ({a}, {x})")

    if a.is_integer():
        m = int(-a)
        if x > _CONTINUED_FRACTION_THRESHOLD:
            try:
                value = math.exp(-m * math.log(x) - x) * _scaled_exponential_integral(m + 1, x)
            except OverflowError as exc:
                raise NumericOverflowError(f"Γ({a}, {x}) overflows: {exc}") from exc
            return _check_finite(value, what=f"Γ({a}, {x})")
        # Γ(a+1, x) recurrence is singular at a = 0, so start from E_1.
        value = float(special.exp1(x))
        for k in range(1, m + 1):
            value = _recurrence_step(value, float(-k), x)
        return _check_finite(value, what=f"Γ({a}, {x})")

    steps = int(math.ceil(-a))
    seed_order = a + steps
    value = float(special.gammaincc(seed_order, x)) * float(special.gamma(seed_order))
    for k in range(1, steps + 1):
        value = _recurrence_step(value, seed_order - k, x)
    return _check_finite(value, what=f"Γ({a}, {x})")


def exp_scaled_negative_gamma(max_m: int, x: float) -> np.ndarray:
    """
    Return R_m(x) = x^m e^x Γ(-m, x) = e^x E_{m+1}(x) for m = 0..max_m.

    Every R_m lies in (0, 1] and R_m ~ 1/(x+m), so the sequence stays finite
    where Γ(-m, x) itself would overflow. For x <= 1 the forward recurrence
    R_m = (1 - x R_{m-1}) / m is used; above that each term comes from the
    continued fraction.

    Args:
        max_m: Largest order required (>= 0)
        x: Strictly positive argument

    Returns:
        Array of length max_m + 1

    Raises:
        DomainError: If x <= 0 or max_m < 0
    """
    x = float(x)
    if max_m < 0:
        raise DomainError(f"max_m must be non-negative, got {max_m}")
    if not (math.isfinite(x) and x > 0.0):
        raise DomainError(f"exp_scaled_negative_gamma requires finite x > 0, got x={x}")

    values: List[float] = []
    if x > _CONTINUED_FRACTION_THRESHOLD:
        for m in range(max_m + 1):
            values.append(_scaled_exponential_integral(m + 1, x))
        return np.asarray(values, dtype=float)

    values.append(float(special.exp1(x)) * math.exp(x))
    for m in range(1, max_m + 1):
        product = x * values[-1]
        difference = 1.0 - product
        if abs(difference) < _CANCELLATION_RATIO:
            message = f"R_{m}({x}) recurrence lost more than 6 digits, using quadrature"
            logger.warning(message)
            warnings.warn(message, CancellationWarning, stacklevel=2)
            values.append(_scaled_exponential_integral_quad(m + 1, x))
        else:
            values.append(difference / m)
    return np.asarray(values, dtype=float)


def _scaled_exponential_integral_quad(order: int, x: float) -> float:
    """e^x E_n(x) = ∫_1^∞ e^{-x(t-1)} t^{-n} dt by quadrature."""
    value, _ = integrate.quad(
        lambda t: math.exp(-x * (t - 1.0)) * t ** (-order), 1.0, np.inf, epsabs=0.0, epsrel=1.0e-12, limit=200
    )
    return value


def marcum_q1(a: float, b: float) -> float:
    """
    Evaluate the first-order Marcum Q function Q_1(a, b).

    Uses the Bessel series Q_1 = e^{-(a²+b²)/2} Σ_k (a/b)^k I_k(ab) for a < b and
    the complementary series for a > b, with exponentially scaled Bessel
    functions. Since I_k(z) is nonincreasing in k, the tail after N terms is
    bounded by r^N I_N(z) / (1 - r) and summation stops once that bound falls
    below 1e-16.

    Args:
        a: Non-centrality (>= 0)
        b: Threshold (>= 0)

    Returns:
        Q_1(a, b) in [0, 1]

    Raises:
        DomainError: If a or b is negative or not finite
        SeriesTruncationError: If the series has not converged after the term cap
    """
    a = float(a)
    b = float(b)
    if not (math.isfinite(a) and math.isfinite(b)) or a < 0.0 or b < 0.0:
        raise DomainError(f"marcum_q1 requires finite a, b >= 0, got a={a}, b={b}")
    if b == 0.0:
        return 1.0
    if a == 0.0:
        return math.exp(-0.5 * b * b)

    z = a * b
    if a == b:
        return float(0.5 * (1.0 + special.ive(0, z)))

    prefactor = math.exp(-0.5 * (a - b) ** 2)
    if a < b:
        ratio = a / b
        start = 0
    else:
        ratio = b / a
        start = 1

    partials: List[float] = []
    k0 = start
    while k0 < _MARCUM_MAX_TERMS:
        orders = np.arange(k0, k0 + _MARCUM_CHUNK, dtype=float)
        terms = np.power(ratio, orders) * special.ive(orders, z)
        partials.append(math.fsum(terms.tolist()))
        k0 += _MARCUM_CHUNK
        tail_bound = ratio ** k0 * float(special.ive(k0, z)) / (1.0 - ratio)
        if prefactor * tail_bound < _MARCUM_ACCURACY:
            break
    else:
        raise SeriesTruncationError(
            f"Marcum Q series for a={a}, b={b} did not converge",
            max_order=_MARCUM_MAX_TERMS,
            residual=tail_bound
        )

    series = prefactor * math.fsum(partials)
    value = series if a < b else 1.0 - series
    return min(1.0, max(0.0, value))
