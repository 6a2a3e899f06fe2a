"""Weight-3/2 Eisenstein coefficients: central values and derivatives.

Central coefficients are the exact cycle degrees.  The derivative
coefficient at index t assembles

    2 delta H0 * [ 1/2 log d + L'(1,chi)/L(1,chi) - 1/2 log pi - 1/2 gamma
                   + 1/2 J(4 pi t v)
                   + sum_{p not| D} (log|n|_p - b_p'/b_p)
                   + sum_{p | D} K_p log p ]

with every rational coefficient exact and every transcendental term tagged
in a breakdown with an explicit error bound.  The nonholomorphic series
tables reproduce the classical weight-3/2 q-expansions with Hurwitz-number
coefficients, and the conjectural Hodge self-pairing evaluator combines
zeta_D(-1) (exact) with 50-digit frozen constants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath as mp
import numpy as np

from .cycles import degree_Z
from .exact import (
    Discriminant,
    chi,
    class_number,
    factorint,
    fundamental_decomposition,
    hurwitz_H,
    valuation,
)

# frozen 50-digit constants; tests recompute them independently with mpmath
GAMMA_STR = "0.5772156649015328606065120900824024310421593359399236"
LOG_PI_STR = "1.1447298858494001741434273513530587116472948129153"
LOG_4PI_STR = "2.5310242469692907929778915942694118477982950816358"
ZETA_PRIME_M1_STR = "-0.16542114370045092921391966024278064276403638033520"

DEFAULT_DPS = 30


class EmptyCycleError(ValueError):
    """deriv_coeff requested where the cycle degree vanishes."""


class IndexConventionError(ValueError):
    """Series comparison attempted with incompatible index conventions."""


def _const(s: str) -> mp.mpf:
    return mp.mpf(s)


# ---------------------------------------------------------------------------
# central values
# ---------------------------------------------------------------------------

def central_coeff(t: int, D: int) -> Fraction:
    """Coefficient of q^t in the central value: the cycle degree."""
    return degree_Z(t, D).degree


def Kp(p: int, d, n: int) -> Fraction:
    """The vertical-contribution factor at p | D, with k = ord_p(n).

    -k + (p+1)(p^k-1)/(2(p-1))   if chi_d(p) = -1
    -1-k + (p^{k+1}-1)/(p-1)     if chi_d(p) = 0
    """
    c = chi(d, p)
    k = valuation(n, p) if n % p == 0 else 0
    if c == 1:
        raise ValueError("K_p is only defined for chi_d(p) in {-1, 0}")
    if c == -1:
        return Fraction(-k) + Fraction((p + 1) * (p**k - 1), 2 * (p - 1))
    return Fraction(-1 - k) + Fraction(p ** (k + 1) - 1, p - 1)


def bp_ratio(p: int, d, n: int) -> Fraction:
    """Exact rational coefficient of log p in b_p'(n,0;D)/b_p(n,0;D), p not | D.

    [chi - chi (2k+1) p^k + (2k+2) p^{k+1}] / [1 - chi + chi p^k - p^{k+1}]
    - 2p/(1-p),  with chi = chi_d(p) and k = ord_p(n); vanishes for k = 0.
    """
    c = chi(d, p)
    k = valuation(n, p) if n % p == 0 else 0
    num = Fraction(c - c * (2 * k + 1) * p**k + (2 * k + 2) * p ** (k + 1))
    den = Fraction(1 - c + c * p**k - p ** (k + 1))
    return num / den - Fraction(2 * p, 1 - p)


# ---------------------------------------------------------------------------
# the archimedean J integral
# ---------------------------------------------------------------------------

def _adaptive_simpson(f, a, b, tol, depth=40):
    """Adaptive Simpson with accumulated error estimate."""
    fa, fb = f(a), f(b)
    m = (a + b) / 2
    fm = f(m)
    whole = (b - a) / 6 * (fa + 4 * fm + fb)

    def rec(a, fa, m, fm, b, fb, whole, tol, depth):
        lm, rm = (a + m) / 2, (m + b) / 2
        flm, frm = f(lm), f(rm)
        left = (m - a) / 6 * (fa + 4 * flm + fm)
        right = (b - m) / 6 * (fm + 4 * frm + fb)
        err = (left + right - whole) / 15
        if depth <= 0 or abs(err) <= tol:
            return left + right + err, abs(err)
        lv, le = rec(a, fa, lm, flm, m, fm, left, tol / 2, depth - 1)
        rv, re = rec(m, fm, rm, frm, b, fb, right, tol / 2, depth - 1)
        return lv + rv, le + re

    return rec(a, fa, m, fm, b, fb, whole, tol, depth)


def J_integral(x: float, tol: float = 1e-10) -> tuple[float, float]:
    """(value, bound) for J(x) = int_0^inf e^{-xr} ((1+r)^{1/2}-1)/r dr.

    [0,1] is integrated directly, [1,R] after r = e^u, and the tail beyond
    R is bounded by sqrt(2) e^{-xR}/(x sqrt(R)) since (1+r)^{1/2}-1 <= r^{1/2}.
    """
    if x <= 0:
        raise ValueError("x must be positive")

    def g(r):
        if r == 0.0:
            return 0.5
        return math.exp(-x * r) * (math.sqrt(1.0 + r) - 1.0) / r

    R = max(1.0, 8.0 / x)
    while math.sqrt(2.0) * math.exp(-min(x * R, 745.0)) / (x * math.sqrt(R)) > tol / 4 \
            and x * R < 745.0:
        R *= 2
    tail = math.sqrt(2.0) * math.exp(-min(x * R, 745.0)) / (x * math.sqrt(R))
    v1, e1 = _adaptive_simpson(g, 0.0, 1.0, tol / 4)
    if R > 1.0:
        glog = lambda u: g(math.exp(u)) * math.exp(u)
        v2, e2 = _adaptive_simpson(glog, 0.0, math.log(R), tol / 4)
    else:
        v2, e2 = 0.0, 0.0
    return v1 + v2, e1 + e2 + tail


# ---------------------------------------------------------------------------
# Dirichlet L-values
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LValues:
    d: int
    value: mp.mpf                 # L(1, chi_d), from the class number formula
    derivative: mp.mpf            # L'(1, chi_d)
    ratio: mp.mpf                 # L'/L
    error_bound: float


def L_chi(d, dps: int = DEFAULT_DPS) -> LValues:
    """L(1, chi_d) by the class number formula 2 pi h / (w sqrt d), and
    L'(1, chi_d) through the Stieltjes expansion of Hurwitz zeta functions:
    L'(1) = q^{-1} (-sum_a chi(a) gamma_1(a/q) - log q * sum_a chi(a) gamma_0(a/q)).
    """
    if isinstance(d, Discriminant):
        d = d.d
    with mp.workdps(dps):
        h, w = class_number(-d)
        value = 2 * mp.pi * h / (w * mp.sqrt(d))
        s0 = mp.mpf(0)
        s1 = mp.mpf(0)
        for a in range(1, d + 1):
            ca = chi(d, a)
            if ca == 0:
                continue
            s0 += ca * mp.stieltjes(0, mp.mpf(a) / d)
            s1 += ca * mp.stieltjes(1, mp.mpf(a) / d)
        lval_check = s0 / d
        assert abs(lval_check - value) < mp.mpf(10) ** (-(dps - 8)), \
            "class number formula and Hurwitz expansion disagree"
        deriv = (-s1 - mp.log(d) * s0) / d
        ratio = deriv / value
        bound = float(mp.mpf(10) ** (-(dps - 8)))
        return LValues(d=d, value=+value, derivative=+deriv, ratio=+ratio,
                       error_bound=bound)


def l_value_smoothed(d, cutoff: float) -> float:
    """Gaussian-smoothed character sum sum chi(n)/n e^{-(n/X)^2}."""
    if isinstance(d, Discriminant):
        d = d.d
    period = 4 * d
    chi_table = np.array([chi(d, m) for m in range(period)], dtype=np.float64)
    X = float(cutoff)
    top = int(6 * X)
    total = 0.0
    for start in range(1, top, 10**6):
        n = np.arange(start, min(start + 10**6, top), dtype=np.float64)
        cn = chi_table[(n.astype(np.int64)) % period]
        total += float(np.sum(cn / n * np.exp(-((n / X) ** 2))))
    return total


def l_prime_smoothed(d, cutoff: float) -> float:
    """Gaussian-smoothed -sum chi(n) log(n)/n e^{-(n/X)^2}."""
    if isinstance(d, Discriminant):
        d = d.d
    period = 4 * d
    chi_table = np.array([chi(d, m) for m in range(period)], dtype=np.float64)
    X = float(cutoff)
    top = int(6 * X)
    total = 0.0
    for start in range(1, top, 10**6):
        n = np.arange(start, min(start + 10**6, top), dtype=np.float64)
        cn = chi_table[(n.astype(np.int64)) % period]
        total += float(np.sum(cn * np.log(n) / n * np.exp(-((n / X) ** 2))))
    return -total


# ---------------------------------------------------------------------------
# derivative coefficients
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QCoefficient:
    """One Fourier coefficient: exact rational part, numeric total, and a
    labeled breakdown of the transcendental summands."""

    t: int
    v: float
    exact_part: Fraction          # the degree 2 delta H0
    numeric_part: mp.mpf          # exact_part * bracket
    error_bound: float
    breakdown: dict = field(default_factory=dict)


def deriv_coeff(t: int, v: float, D: int, j_tol: float = 1e-10,
                dps: int = DEFAULT_DPS) -> QCoefficient:
    """t-th Fourier coefficient of the central derivative (nonempty cycles).

    Raises EmptyCycleError when deg Z(t) = 0; the stated formula assumes the
    cycle is nonempty.
    """
    deg = degree_Z(t, D)
    if deg.degree == 0:
        raise EmptyCycleError(f"deg Z({t}) = 0 for D={D}")
    dec = fundamental_decomposition(t)
    lv = L_chi(dec, dps=dps)
    jval, jerr = J_integral(4 * math.pi * t * v, tol=j_tol)
    with mp.workdps(dps):
        breakdown = {}
        breakdown["half_log_d"] = mp.log(dec.d) / 2
        breakdown["L_ratio"] = lv.ratio
        breakdown["minus_half_log_pi"] = -_const(LOG_PI_STR) / 2
        breakdown["minus_half_gamma"] = -_const(GAMMA_STR) / 2
        breakdown["half_J"] = mp.mpf(jval) / 2
        for p in sorted(factorint(dec.n)):
            if D % p == 0:
                continue
            k = valuation(dec.n, p)
            coef = Fraction(-k) - bp_ratio(p, dec, dec.n)
            breakdown[f"log_n_p_minus_b_ratio_{p}"] = \
                mp.mpf(coef.numerator) / coef.denominator * mp.log(p)
        for p in sorted(factorint(D)) if D > 1 else ():
            kp = Kp(p, dec, dec.n)
            breakdown[f"K_{p}_log_{p}"] = \
                mp.mpf(kp.numerator) / kp.denominator * mp.log(p)
        bracket = mp.fsum(breakdown.values())
        degree_mp = mp.mpf(deg.degree.numerator) / deg.degree.denominator
        total = degree_mp * bracket
        bound = float(abs(degree_mp)) * (jerr / 2 + lv.error_bound
                                         + float(mp.mpf(10) ** (-(dps - 6))))
    return QCoefficient(t=t, v=v, exact_part=deg.degree, numeric_part=+total,
                        error_bound=bound, breakdown=dict(breakdown))


# ---------------------------------------------------------------------------
# nonholomorphic series tables
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SeriesEntry:
    exact: Fraction | None
    numeric: mp.mpf | None
    error_bound: float


@dataclass(frozen=True)
class SeriesTable:
    kind: str                     # "zagier" (H(N)) or "eisenstein" (2 H0)
    D: int
    v: float
    t_max: int
    coefficients: dict            # index -> SeriesEntry


def _tail_integral(m: int, v: float, dps: int) -> mp.mpf:
    """int_1^inf e^{-4 pi m^2 v r} r^{-3/2} dr (= 2 when m = 0)."""
    with mp.workdps(dps):
        if m == 0:
            return mp.mpf(2)
        c = 4 * mp.pi * m * m * v
        return +(mp.sqrt(c) * mp.gammainc(mp.mpf(-1) / 2, c))


def zagier_series(v: float, t_max: int, kind: str = "zagier",
                  dps: int = DEFAULT_DPS) -> SeriesTable:
    """Coefficient table of the weight-3/2 series.

    kind="zagier":     -1/12 + sum_{N>0} H(N) q^N + (1/16 pi) v^{-1/2} tail terms
    kind="eisenstein": -1/12 + sum_{t>0} 2 H0(t;1) q^t + (1/8 pi) v^{-1/2} tails
    """
    if v <= 0 or t_max < 1:
        raise ValueError("need v > 0 and t_max >= 1")
    if kind not in ("zagier", "eisenstein"):
        raise ValueError(f"unknown series kind {kind!r}")
    factor_den = 16 if kind == "zagier" else 8
    coeffs = {}
    with mp.workdps(dps):
        vsqrt_inv = 1 / mp.sqrt(v)
        err = float(mp.mpf(10) ** (-(dps - 6)))
        # constant term: -1/12 plus the m = 0 nonholomorphic term
        coeffs[0] = SeriesEntry(
            exact=Fraction(-1, 12),
            numeric=+(vsqrt_inv / (factor_den * mp.pi) * _tail_integral(0, v, dps)),
            error_bound=err,
        )
        for t in range(1, t_max + 1):
            if kind == "zagier":
                exact = hurwitz_H(t) if t % 4 in (0, 3) else Fraction(0)
            else:
                exact = 2 * degree_Z(t, 1).H0
            coeffs[t] = SeriesEntry(exact=exact, numeric=None, error_bound=0.0)
        m = 1
        while m * m <= t_max:
            val = 2 * vsqrt_inv / (factor_den * mp.pi) * _tail_integral(m, v, dps)
            coeffs[-m * m] = SeriesEntry(exact=None, numeric=+val, error_bound=err)
            m += 1
    return SeriesTable(kind=kind, D=1, v=v, t_max=t_max, coefficients=coeffs)


def compare_series_hurwitz(eisen: SeriesTable, zagier: SeriesTable):
    """Check 2 H0(t;1) = H(4t) coefficientwise, reconciling the index
    conventions (index t of the Eisenstein table vs index 4t of Zagier's).

    Raises IndexConventionError if the tables cannot be aligned; returns the
    list of compared indices.
    """
    if eisen.kind != "eisenstein" or zagier.kind != "zagier":
        raise IndexConventionError("need an eisenstein and a zagier table")
    if zagier.t_max < 4 * eisen.t_max:
        raise IndexConventionError(
            f"zagier table must reach 4*t_max = {4 * eisen.t_max}")
    compared = []
    for t in range(1, eisen.t_max + 1):
        lhs = eisen.coefficients[t].exact
        rhs = zagier.coefficients[4 * t].exact
        if lhs != rhs:
            raise AssertionError(f"2 H0({t};1) = {lhs} != H({4 * t}) = {rhs}")
        compared.append(t)
    return compared


# ---------------------------------------------------------------------------
# the conjectural Hodge self-pairing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HodgePairing:
    D: int
    zeta_D_minus1: Fraction       # exact channel
    bracket: mp.mpf
    value: mp.mpf
    error_bound: float


def zeta_D_minus1(D: int) -> Fraction:
    """zeta_D(-1) = zeta(-1) prod_{p|D} (1 - p), exactly."""
    out = Fraction(-1, 12)
    for p in factorint(D) if D > 1 else ():
        out *= 1 - p
    return out


def hodge_pairing_value(D: int, dps: int = DEFAULT_DPS) -> HodgePairing:
    """zeta_D(-1) [ 2 zeta'(-1)/zeta(-1) + 1 - 2C - sum_{p|D} p log p/(p-1) ]
    with 2C = log(4 pi) + gamma; constants are frozen 50-digit literals."""
    zd = zeta_D_minus1(D)
    with mp.workdps(dps):
        two_c = _const(LOG_4PI_STR) + _const(GAMMA_STR)
        bracket = 2 * _const(ZETA_PRIME_M1_STR) * (-12) + 1 - two_c
        for p in sorted(factorint(D)) if D > 1 else ():
            bracket -= p * mp.log(p) / (p - 1)
        value = (mp.mpf(zd.numerator) / zd.denominator) * bracket
        err = float(mp.mpf(10) ** (-(min(dps, 45) - 3)))
    return HodgePairing(D=D, zeta_D_minus1=zd, bracket=+bracket, value=+value,
                        error_bound=err)
