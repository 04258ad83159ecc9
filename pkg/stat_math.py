"""
Numerical primitives for finite-size estimation.

Binary entropy and its inverse, the Hoeffding deviation, the Serfling
bound for sampling without replacement and the phase-error correction
used to transfer an error rate between two random samples.
"""
import math

from scipy.optimize import bisect

ENTROPY_INVERSE_XTOL = 1e-12


def check_probability(name, value):
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name}={value} must be in [0, 1]")
    return value


def check_failure_prob(name, value):
    if not 0.0 < value <= 1.0:
        raise ValueError(f"{name}={value} must be in (0, 1]")
    return value


def clamp_unit(x):
    return min(1.0, max(0.0, x))


def binary_entropy(x):
    r"""Binary Shannon entropy :math:`h(x) = -x\log_2 x - (1-x)\log_2(1-x)`.

    Uses the convention :math:`0 \log_2 0 = 0`, so h(0) = h(1) = 0.
    """
    check_probability("x", x)
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def binary_entropy_inverse(y):
    """Return the unique p in [0, 0.5] with h(p) = y.

    Solved by bisection to an absolute tolerance of 1e-12.
    """
    check_probability("y", y)
    if y == 0.0:
        return 0.0
    if y == 1.0:
        return 0.5
    return bisect(lambda p: binary_entropy(p) - y, 0.0, 0.5, xtol=ENTROPY_INVERSE_XTOL)


def hoeffding_delta(n, eps):
    r"""Hoeffding deviation :math:`\delta(n, \epsilon) = \sqrt{n/2 \cdot \ln(1/\epsilon)}`."""
    if n < 0:
        raise ValueError(f"n={n} must be non-negative")
    check_failure_prob("eps", eps)
    return math.sqrt(n / 2.0 * math.log(1.0 / eps))


def serfling_error_upper(e_obs, L, k, eps_pe):
    """Upper bound on the error rate of an L-bit block from k revealed test bits.

    E^U = E_obs + (2/L) sqrt((L/2 + 1)(L/2 + k) / (2k) * ln(1/eps_pe)), clamped to 1.
    """
    if k < 1:
        raise ValueError(f"k={k} must be at least 1")
    if L < 2:
        raise ValueError(f"L={L} must be at least 2")
    check_probability("e_obs", e_obs)
    check_failure_prob("eps_pe", eps_pe)
    half = L / 2.0
    correction = (2.0 / L) * math.sqrt((half + 1.0) * (half + k) / (2.0 * k) * math.log(1.0 / eps_pe))
    return min(1.0, e_obs + correction)


def gamma_correction(a, b, c, d):
    r"""Finite-size correction for transferring an error rate b from a sample of
    size c to a sample of size d, failing with probability at most a.

    .. math::

        \gamma(a,b,c,d) = \sqrt{\frac{(c+d)(1-b)b}{c\,d\ln 2}
            \log_2\left(\frac{c+d}{c\,d(1-b)b}\frac{21^2}{a^2}\right)}
    """
    check_failure_prob("a", a)
    if not 0.0 < b < 1.0:
        raise ValueError(f"b={b} must be in (0, 1)")
    if c <= 0 or d <= 0:
        raise ValueError(f"c={c} and d={d} must be positive")
    spread = (c + d) * (1.0 - b) * b / (c * d * math.log(2.0))
    log_term = math.log2((c + d) / (c * d * (1.0 - b) * b) * (21.0 / a) ** 2)
    # negative only for samples of a handful of events
    return math.sqrt(spread * max(log_term, 0.0))
