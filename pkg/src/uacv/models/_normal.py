import numpy as np
from scipy.special import ndtr

LOG_SQRT_2PI = 0.5 * np.log(2 * np.pi)
PROB_FLOOR = 1e-300


def pdf(z):
    z = np.asarray(z, dtype=float)
    with np.errstate(over="ignore"):
        return np.exp(-0.5 * z * z) / np.sqrt(2 * np.pi)


def z_pdf(z):
    """``z * pdf(z)`` with the limit 0 at infinite ``z``."""
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    finite = np.isfinite(z)
    out[finite] = z[finite] * pdf(z[finite])
    return out


def interval_probability(lo, hi):
    """``Phi(hi) - Phi(lo)`` evaluated on the side that avoids cancellation."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    # reflect intervals in the upper half-line: Phi(hi) - Phi(lo) = Phi(-lo) - Phi(-hi)
    sign = np.where(lo > 0, -1.0, 1.0)
    return sign * (ndtr(sign * hi) - ndtr(sign * lo))


def clamp(prob):
    """Floor probabilities at ``PROB_FLOOR``; returns the floored array and a count."""
    low = prob < PROB_FLOOR
    return np.where(low, PROB_FLOOR, prob), int(np.count_nonzero(low))
