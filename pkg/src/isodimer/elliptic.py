"""Jacobi elliptic functions, complete integrals and the special functions A and H.

All arguments are real.  The Jacobi functions are computed with the
descending Landen / arithmetic-geometric-mean recursion, which gives uniform
double precision over the ranges of arguments used by the operator builders
(a few quarter-periods on either side of zero).

Conventions: ``k`` is the elliptic modulus in [0, 1), ``kprime`` the
complementary modulus, ``bigK``/``bigKprime`` the quarter-periods and
``bigE``/``bigEprime`` the complete second-kind integrals.  ``theta``,
``alpha``, ``beta`` denote angles already rescaled by 2K/pi (the
``theta_transform`` of embedding angles).
"""

import math
from dataclasses import dataclass, field
from functools import lru_cache

from scipy.integrate import quad

from .errors import DomainError, PoleError

_POLE_EPS = 1e-13
_QUAD_ABS_TOL = 1e-11


def _agm_sequence(k):
    """AGM scales a_n and c_n for modulus k, down to c_n ~ machine epsilon."""
    a, b, c = 1.0, math.sqrt((1.0 - k) * (1.0 + k)), k
    a_seq, c_seq = [a], [c]
    while abs(c) > 1e-17 and len(a_seq) < 64:
        a, b, c = 0.5 * (a + b), math.sqrt(a * b), 0.5 * (a - b)
        a_seq.append(a)
        c_seq.append(c)
    return tuple(a_seq), tuple(c_seq)


@dataclass(frozen=True)
class EllipticParams:
    """Modulus, complementary modulus, quarter-periods and second-kind integrals.

    ``bigKprime`` is +inf at k = 0; callers that need K' (the function H does)
    special-case k = 0 explicitly.
    """

    k: float
    kprime: float
    bigK: float
    bigKprime: float
    bigE: float
    bigEprime: float
    _agm_a: tuple = field(repr=False, default=())
    _agm_c: tuple = field(repr=False, default=())


def _complete_from_agm(k):
    a_seq, c_seq = _agm_sequence(k)
    big_k = math.pi / (2.0 * a_seq[-1])
    # E = K * (1 - sum 2^(n-1) c_n^2), c_0 = k.
    s = 0.0
    for n, c in enumerate(c_seq):
        s += 2.0 ** (n - 1) * c * c
    big_e = big_k * (1.0 - s)
    return big_k, big_e, a_seq, c_seq


def complete_integrals(k):
    """Complete elliptic integrals for modulus k in [0, 1).

    Returns an :class:`EllipticParams` holding K, K', E, E' (K' and E' are the
    integrals of the complementary modulus).
    """
    if not (isinstance(k, (int, float)) and 0.0 <= k < 1.0) or math.isnan(k):
        raise DomainError(f"modulus k must lie in [0, 1), got {k!r}")
    k = float(k)
    kprime = math.sqrt((1.0 - k) * (1.0 + k))
    big_k, big_e, a_seq, c_seq = _complete_from_agm(k)
    if k == 0.0:
        big_kp, big_ep = math.inf, 1.0
    else:
        big_kp, big_ep, _, _ = _complete_from_agm(kprime)
    return EllipticParams(k, kprime, big_k, big_kp, big_e, big_ep, a_seq, c_seq)


def jacobi(u, p):
    """The primary Jacobi functions (sn, cn, dn) at real argument u.

    Uses the descending Landen recursion on the precomputed AGM scales of
    ``p``; dn is recovered from sn through dn^2 = 1 - k^2 sn^2, which is safe
    because dn >= k' > 0 on the real axis.
    """
    if not math.isfinite(u):
        raise DomainError(f"argument must be finite, got {u!r}")
    k = p.k
    if k == 0.0:
        return math.sin(u), math.cos(u), 1.0
    a_seq, c_seq = p._agm_a, p._agm_c
    n = len(a_seq) - 1
    phi = (2.0 ** n) * a_seq[n] * u
    for i in range(n, 0, -1):
        s = c_seq[i] / a_seq[i] * math.sin(phi)
        s = max(-1.0, min(1.0, s))
        phi = 0.5 * (phi + math.asin(s))
    sn = math.sin(phi)
    cn = math.cos(phi)
    dn = math.sqrt(max(p.kprime * p.kprime, 1.0 - k * k * sn * sn))
    return sn, cn, dn


def _ratio(num, den, name, u):
    if abs(den) < _POLE_EPS:
        raise PoleError(f"{name}({u}) evaluated at a pole")
    return num / den


def sn(u, p):
    return jacobi(u, p)[0]


def cn(u, p):
    return jacobi(u, p)[1]


def dn(u, p):
    return jacobi(u, p)[2]


def sc(u, p):
    s, c, _ = jacobi(u, p)
    return _ratio(s, c, "sc", u)


def cs(u, p):
    s, c, _ = jacobi(u, p)
    return _ratio(c, s, "cs", u)


def cd(u, p):
    _, c, d = jacobi(u, p)
    return _ratio(c, d, "cd", u)


def dc(u, p):
    _, c, d = jacobi(u, p)
    return _ratio(d, c, "dc", u)


def nd(u, p):
    return _ratio(1.0, jacobi(u, p)[2], "nd", u)


def sd(u, p):
    s, _, d = jacobi(u, p)
    return _ratio(s, d, "sd", u)


def ds(u, p):
    s, _, d = jacobi(u, p)
    return _ratio(d, s, "ds", u)


def nc(u, p):
    return _ratio(1.0, jacobi(u, p)[1], "nc", u)


def ns(u, p):
    return _ratio(1.0, jacobi(u, p)[0], "ns", u)


def dn_int_sq(u, p):
    """Integral of dn^2 from 0 to u (the Jacobi epsilon function)."""
    if p.k == 0.0:
        return float(u)
    val, _ = quad(lambda t: jacobi(t, p)[2] ** 2, 0.0, u,
                  epsabs=_QUAD_ABS_TOL, limit=200)
    return val


@lru_cache(maxsize=4096)
def _a_fun_cached(u, k):
    p = complete_integrals(k)
    val, _ = quad(lambda t: dc(t, p) ** 2, 0.0, u, epsabs=_QUAD_ABS_TOL, limit=200)
    return (val + (p.bigE - p.bigK) / p.bigK * u) / p.kprime


def a_fun(u, p):
    """The function A(u) = (Dc(u) + (E-K)/K u)/k' with Dc(u) the integral of dc^2.

    Only arguments inside (-K, K) are meaningful here (dc^2 has a
    non-integrable pole at K); the operator builders call it with rhombus
    half-angles, which always satisfy this.
    """
    if not math.isfinite(u):
        raise DomainError(f"argument must be finite, got {u!r}")
    if abs(u) >= p.bigK - 1e-9:
        raise PoleError(f"A({u}) outside (-K, K): dc pole on the integration path")
    return _a_fun_cached(float(u), p.k)


def h_fun(u, p):
    """The single-edge probability function H.

    Real reduction H(u) = (K' Eps(u/2) + (E'-K') u/2)/pi with
    Eps(x) = integral of dn^2 over [0, x].  This is the normalization pinned
    by H(2K) = 1/2 (a Legendre-relation computation), oddness, the
    quasi-period H(u+4K) = H(u)+1 and the k->0 limit u/(2 pi); the displayed
    prefactor in the source derivation does not satisfy these and was fixed
    here (see decisions ledger).
    """
    if p.k == 0.0:
        return u / (2.0 * math.pi)
    eps_val = dn_int_sq(0.5 * u, p)
    return (p.bigKprime * eps_val + (p.bigEprime - p.bigKprime) * 0.5 * u) / math.pi


def theta_transform(theta_bar, p):
    """Map an embedding half-angle in (0, pi/2) to the elliptic angle in (0, K)."""
    if not (0.0 < theta_bar < math.pi / 2):
        raise DomainError(f"embedding half-angle must lie in (0, pi/2), got {theta_bar}")
    return theta_bar * 2.0 * p.bigK / math.pi


def angle_transform(angle_bar, p):
    """Rescale an arbitrary (lifted) embedding angle by 2K/pi."""
    return angle_bar * 2.0 * p.bigK / math.pi
