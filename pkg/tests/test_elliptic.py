"""Elliptic layer: Jacobi functions, complete integrals, A and H.

Oracles: adaptive quadrature of the defining integrals (scipy.quad on the
integrands directly) and scipy.special.ellipj as an independent evaluation of
the Jacobi functions.
"""

import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import ellipj

from isodimer import elliptic as el
from isodimer.errors import DomainError, PoleError


def quadrature_K(k):
    val, _ = quad(lambda t: 1.0 / math.sqrt(1.0 - (k * math.sin(t)) ** 2),
                  0.0, math.pi / 2, epsabs=1e-13)
    return val


def quadrature_E(k):
    val, _ = quad(lambda t: math.sqrt(1.0 - (k * math.sin(t)) ** 2),
                  0.0, math.pi / 2, epsabs=1e-13)
    return val


def test_complete_integrals_at_zero():
    p = el.complete_integrals(0.0)
    assert abs(p.bigK - math.pi / 2) < 1e-14
    assert abs(p.bigE - math.pi / 2) < 1e-14
    assert p.bigKprime == math.inf


def test_complete_integrals_half_sqrt2():
    # frozen from the quadrature oracle
    p = el.complete_integrals(math.sqrt(0.5))
    assert abs(p.bigK - 1.8540746773) < 1e-9
    assert abs(p.bigE - 1.3506438810) < 1e-9
    assert abs(p.bigK - quadrature_K(math.sqrt(0.5))) < 1e-12
    assert abs(p.bigE - quadrature_E(math.sqrt(0.5))) < 1e-12


def test_complete_integrals_vs_quadrature_random():
    rng = np.random.default_rng(0)
    for _ in range(20):
        k = rng.uniform(0.01, 0.97)
        p = el.complete_integrals(k)
        assert abs(p.bigK - quadrature_K(k)) < 1e-11
        assert abs(p.bigE - quadrature_E(k)) < 1e-11


def test_legendre_relation():
    rng = np.random.default_rng(1)
    for _ in range(50):
        k = rng.uniform(0.01, 0.97)
        p = el.complete_integrals(k)
        res = abs(p.bigE * p.bigKprime + p.bigEprime * p.bigK
                  - p.bigK * p.bigKprime - math.pi / 2)
        assert res < 1e-12


def test_modulus_domain():
    with pytest.raises(DomainError):
        el.complete_integrals(1.0)
    with pytest.raises(DomainError):
        el.complete_integrals(-0.1)


def test_jacobi_zero_and_trig():
    p = el.complete_integrals(0.37)
    assert el.jacobi(0.0, p) == (0.0, 1.0, 1.0)
    p0 = el.complete_integrals(0.0)
    for u in (0.3, -1.2, 7.0):
        s, c, d = el.jacobi(u, p0)
        assert abs(s - math.sin(u)) < 1e-15
        assert abs(c - math.cos(u)) < 1e-15
        assert d == 1.0


def test_jacobi_half_K():
    # sn(K/2) = (1+k')^(-1/2), cn(K/2) = (k'/(1+k'))^(1/2), dn(K/2) = k'^(1/2)
    for k in (0.2, 0.5, 0.8):
        p = el.complete_integrals(k)
        s, c, d = el.jacobi(0.5 * p.bigK, p)
        assert abs(s - 1.0 / math.sqrt(1.0 + p.kprime)) < 1e-13
        assert abs(c - math.sqrt(p.kprime / (1.0 + p.kprime))) < 1e-13
        assert abs(d - math.sqrt(p.kprime)) < 1e-13


def test_jacobi_vs_scipy():
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(500):
        k = rng.uniform(0.0, 0.95)
        p = el.complete_integrals(k)
        u = rng.uniform(-2.0 * p.bigK, 6.0 * p.bigK)
        s, c, d = el.jacobi(u, p)
        s2, c2, d2, _ = ellipj(u, k * k)
        worst = max(worst, abs(s - s2), abs(c - c2), abs(d - d2))
    assert worst < 5e-13


def test_jacobi_identities_and_periodicity():
    rng = np.random.default_rng(3)
    for _ in range(200):
        k = rng.uniform(0.0, 0.95)
        p = el.complete_integrals(k)
        u = rng.uniform(-2.0 * p.bigK, 6.0 * p.bigK)
        s, c, d = el.jacobi(u, p)
        assert abs(s * s + c * c - 1.0) < 1e-12
        assert abs(d * d + k * k * s * s - 1.0) < 1e-12
        s2, c2, d2 = el.jacobi(u + 2.0 * p.bigK, p)
        assert abs(d2 - d) < 1e-12
        assert abs(c2 + c) < 1e-12
        assert abs(s2 + s) < 1e-12


def test_cn_square_sum_identity():
    # cn^2(u) + cn^2(K-u) = 2/(1+nd(2u))
    rng = np.random.default_rng(4)
    for _ in range(100):
        k = rng.uniform(0.01, 0.95)
        p = el.complete_integrals(k)
        u = rng.uniform(-p.bigK, 3.0 * p.bigK)
        lhs = el.cn(u, p) ** 2 + el.cn(p.bigK - u, p) ** 2
        rhs = 2.0 / (1.0 + el.nd(2.0 * u, p))
        assert abs(lhs - rhs) < 1e-12


def test_ratio_pole():
    p = el.complete_integrals(0.5)
    with pytest.raises(PoleError):
        el.sc(p.bigK, p)
    with pytest.raises(PoleError):
        el.ns(0.0, p)


def test_a_fun_values():
    p0 = el.complete_integrals(0.0)
    assert el.a_fun(0.0, p0) == 0.0
    for th in (0.2, 0.7, 1.3):
        assert abs(el.a_fun(th, p0) - math.tan(th)) < 1e-10
    with pytest.raises(PoleError):
        el.a_fun(el.complete_integrals(0.5).bigK, el.complete_integrals(0.5))


def test_a_fun_sum_rule():
    # theta1+theta2+theta3 = 2K  =>  sum A = k' prod sc
    rng = np.random.default_rng(5)
    for k in (0.2, 0.5, 0.8):
        p = el.complete_integrals(k)
        for _ in range(5):
            x = rng.uniform(0.2, 0.8, size=3)
            th = 2.0 * p.bigK * x / x.sum()
            if th.max() > 0.95 * p.bigK:
                continue
            lhs = sum(el.a_fun(t, p) for t in th)
            rhs = p.kprime * np.prod([el.sc(t, p) for t in th])
            assert abs(lhs - rhs) < 1e-10


def test_a_fun_vs_fixed_gauss():
    # independent fixed-order Gauss-Legendre quadrature of dc^2
    nodes, weights = np.polynomial.legendre.leggauss(64)
    for k in (0.3, 0.7):
        p = el.complete_integrals(k)
        for u in (0.3 * p.bigK, 0.8 * p.bigK):
            x = 0.5 * u * (nodes + 1.0)
            val = 0.5 * u * sum(w * el.dc(t, p) ** 2 for w, t in zip(weights, x))
            ref = (val + (p.bigE - p.bigK) / p.bigK * u) / p.kprime
            assert abs(el.a_fun(u, p) - ref) < 1e-9


def test_h_fun_properties():
    for k in (0.1, 0.3, 0.6, 0.9):
        p = el.complete_integrals(k)
        assert el.h_fun(0.0, p) == 0.0
        assert abs(el.h_fun(2.0 * p.bigK, p) - 0.5) < 1e-10
        for u in (0.3, 1.7):
            assert abs(el.h_fun(-u, p) + el.h_fun(u, p)) < 1e-12
            assert abs(el.h_fun(u + 4.0 * p.bigK, p) - el.h_fun(u, p) - 1.0) < 1e-10


def test_h_fun_small_k_limit():
    p = el.complete_integrals(1e-4)
    for u in np.linspace(0.0, 4.0 * p.bigK, 17):
        assert abs(el.h_fun(u, p) - u / (2.0 * math.pi)) < 1e-4
    p0 = el.complete_integrals(0.0)
    assert el.h_fun(1.3, p0) == 1.3 / (2.0 * math.pi)


def test_theta_transform():
    p = el.complete_integrals(0.8)
    assert abs(el.theta_transform(math.pi / 4, p) - 0.5 * p.bigK) < 1e-14
    p0 = el.complete_integrals(0.0)
    assert abs(el.theta_transform(0.3, p0) - 0.3) < 1e-14
    eps = 1e-3
    assert abs(el.theta_transform(math.pi / 2 - eps, p)
               - (p.bigK - 2.0 * p.bigK * eps / math.pi)) < 1e-12
    with pytest.raises(DomainError):
        el.theta_transform(0.0, p)
    with pytest.raises(DomainError):
        el.theta_transform(math.pi / 2, p)
