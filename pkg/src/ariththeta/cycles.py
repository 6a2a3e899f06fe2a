"""Degrees of special cycles and closed-form local multiplicities.

deg Z(t) = 2 * delta(d, D) * H0(t, D), where 4t = n^2 d.  H0 is computed
two independent ways (class-number sum over conductors prime to D, and the
product form weighted by h(d)/w(d)); both must agree.  The p-adic
diagonalization of a fundamental matrix T yields the invariants
(alpha, beta, unit square classes) feeding the Gross-Keating formula and
the three-case closed form for e_p(T) at ramified primes.

p = 2 is rejected throughout the local-invariant operations.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction

from .exact import (
    Discriminant,
    chi,
    class_number,
    divisors,
    factorint,
    fundamental_decomposition,
    legendre,
    valuation,
)
from .quatalg import FundamentalMatrix

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# degree formulas
# ---------------------------------------------------------------------------

def delta_factor(d, D: int) -> int:
    """prod_{p | D} (1 - chi_d(p))."""
    if isinstance(d, Discriminant):
        d = d.d
    out = 1
    for p in factorint(D) if D > 1 else ():
        out *= 1 - chi(d, p)
    return out


def H0(t: int, D: int) -> Fraction:
    """sum over c | n with (c,D)=1 of h(c^2 d)/w(c^2 d), where 4t = n^2 d.

    Evaluated by the direct class-number sum and by the product form
    h(d)/w(d) * sum_c c * prod_{l|c} (1 - chi_d(l)/l); the two must agree.
    """
    dec = fundamental_decomposition(t)
    direct = Fraction(0)
    for c in divisors(dec.n):
        if math.gcd(c, D) != 1:
            continue
        h, w = class_number(-c * c * dec.d)
        direct += Fraction(h, w)
    h, w = class_number(-dec.d)
    product = Fraction(0)
    for c in divisors(dec.n):
        if math.gcd(c, D) != 1:
            continue
        term = Fraction(c)
        for ell in factorint(c):
            term *= 1 - Fraction(chi(dec, ell), ell)
        product += term
    product *= Fraction(h, w)
    assert direct == product, (t, D, direct, product)
    return direct


@dataclass(frozen=True)
class DegreeResult:
    t: int
    D: int
    delta: int
    H0: Fraction
    degree: Fraction

    def __post_init__(self):
        assert self.degree == 2 * self.delta * self.H0


def degree_Z(t: int, D: int) -> DegreeResult:
    """Orbifold degree of the special cycle: 2 * delta(d,D) * H0(t,D)."""
    if t < 1:
        raise ValueError("t must be >= 1")
    dec = fundamental_decomposition(t)
    delta = delta_factor(dec, D)
    h0 = H0(t, D)
    return DegreeResult(t=t, D=D, delta=delta, H0=h0, degree=2 * delta * h0)


def vertical_criterion(t: int, p: int, D: int) -> bool:
    """True iff Z(t) contains components of the fiber at p | D.

    Requires ord_p(t) >= 2 and no prime l != p with l | D split in k_t.
    """
    if D % p != 0:
        raise ValueError(f"p={p} must divide D={D}")
    if valuation(t, p) < 2:
        return False
    dec = fundamental_decomposition(t)
    for ell in factorint(D):
        if ell != p and chi(dec, ell) == 1:
            return False
    return True


# ---------------------------------------------------------------------------
# p-adic diagonalization of fundamental matrices
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GKInvariants:
    """diag(eps1 p^alpha, eps2 p^beta) data, with (-eps_i | p) flags."""

    p: int
    alpha: int
    beta: int
    eps1_class: int   # legendre(-eps1, p)
    eps2_class: int

    def __post_init__(self):
        assert 0 <= self.alpha <= self.beta
        assert self.eps1_class in (-1, 1) and self.eps2_class in (-1, 1)


def _val_frac(x: Fraction, p: int) -> int:
    return valuation(x, p) if x != 0 else 10**9


def _unit_class_neg(x: Fraction, p: int) -> int:
    """legendre(-unit_part(x), p) for nonzero rational x."""
    u = x / Fraction(p) ** valuation(x, p)
    num = (-u.numerator * pow(u.denominator, -1, p)) % p
    return legendre(num, p)


def diagonalize_padic(T: FundamentalMatrix, p: int):
    """GL2(Z_p)-diagonalization of T for odd p.

    Returns (GKInvariants, U, diag) where U has p-integral rational entries,
    det(U) is a p-unit, and U^T T U equals diag(d1, d2) exactly as rational
    matrices (so the required congruence mod p^{beta+10} is automatic).
    Pivot choice: entry of minimal p-valuation, diagonal preferred, then
    smallest index.
    """
    if p == 2:
        raise ValueError("p = 2 is out of scope for the local invariants")
    if T.det == 0:
        raise ValueError("T must be nonsingular")
    (t1, m), (_, t2) = T.entries
    U = [[Fraction(1), Fraction(0)], [Fraction(0), Fraction(1)]]

    def apply_col(op):
        # multiply U on the right by op (2x2 rational)
        nonlocal U
        U = [
            [U[0][0] * op[0][0] + U[0][1] * op[1][0],
             U[0][0] * op[0][1] + U[0][1] * op[1][1]],
            [U[1][0] * op[0][0] + U[1][1] * op[1][0],
             U[1][0] * op[0][1] + U[1][1] * op[1][1]],
        ]

    a, b, c = Fraction(t1), m, Fraction(t2)   # T = [[a, b], [b, c]]
    va, vb, vc = _val_frac(a, p), _val_frac(b, p), _val_frac(c, p)
    if min(va, vc) > vb:
        # off-diagonal strictly minimal: x0 -> x0 + x1 makes (0,0) minimal
        op = [[Fraction(1), Fraction(0)], [Fraction(1), Fraction(1)]]
        apply_col(op)
        a, b, c = a + 2 * b + c, b + c, c
        va, vc = _val_frac(a, p), _val_frac(c, p)
    if vc < va:
        op = [[Fraction(0), Fraction(1)], [Fraction(1), Fraction(0)]]
        apply_col(op)
        a, c = c, a
    # now val(a) is minimal: clear b by a column operation in GL2(Z_p)
    if b != 0:
        f = -b / a
        assert valuation(f, p) >= 0 if f != 0 else True
        op = [[Fraction(1), f], [Fraction(0), Fraction(1)]]
        apply_col(op)
        c = c - b * b / a
        b = Fraction(0)
    d1, d2 = a, c
    if _val_frac(d1, p) > _val_frac(d2, p):
        op = [[Fraction(0), Fraction(1)], [Fraction(1), Fraction(0)]]
        apply_col(op)
        d1, d2 = d2, d1
    # verify exactly: U^T T U = diag(d1, d2)
    (e11, e12), (_, e22) = T.entries
    Tm = [[e11, e12], [e12, e22]]
    prod = [[sum(U[k][i] * sum(Tm[k][l] * U[l][j] for l in range(2))
                 for k in range(2)) for j in range(2)] for i in range(2)]
    assert prod[0][1] == 0 and prod[1][0] == 0
    assert prod[0][0] == d1 and prod[1][1] == d2
    detU = U[0][0] * U[1][1] - U[0][1] * U[1][0]
    assert valuation(detU, p) == 0, "U must be invertible over Z_p"
    inv = GKInvariants(
        p=p,
        alpha=valuation(d1, p),
        beta=valuation(d2, p),
        eps1_class=_unit_class_neg(d1, p),
        eps2_class=_unit_class_neg(d2, p),
    )
    return inv, U, (d1, d2)


# ---------------------------------------------------------------------------
# the two closed forms for e_p(T)
# ---------------------------------------------------------------------------

def gross_keating_ep(inv: GKInvariants) -> Fraction:
    """Local multiplicity at a good prime (p not dividing D(B)).

    sum_{j=0}^{(alpha-1)/2} (alpha+beta-4j) p^j               (alpha odd)
    sum_{j=0}^{alpha/2-1} (...) + (beta-alpha+1)/2 * p^{alpha/2}  (alpha even)

    A pure formula: callers must enforce p in Diff(T,B), p not | D(B).
    Outside that regime the value can be a half-integer; such evaluations
    are logged.
    """
    a, b, p = inv.alpha, inv.beta, inv.p
    if a % 2 == 1:
        total = Fraction(sum((a + b - 4 * j) * p**j for j in range((a - 1) // 2 + 1)))
    else:
        total = Fraction(sum((a + b - 4 * j) * p**j for j in range(a // 2)))
        total += Fraction(b - a + 1, 2) * p ** (a // 2)
    if total.denominator != 1:
        log.info("gross_keating_ep non-integral outside Diff regime: %s -> %s",
                 inv, total)
    return total


def kr_ep_closed(inv: GKInvariants) -> int:
    """Intersection number e_p(T) at a ramified prime p | D(B), closed form.

    alpha+beta+1 minus a three-case correction depending on the parity of
    alpha and the square class of -eps1.
    """
    a, b, p = inv.alpha, inv.beta, inv.p
    base = a + b + 1
    if a % 2 == 0:
        geom = 2 * (p ** (a // 2) - 1) // (p - 1)
        if inv.eps1_class == -1:
            corr = p ** (a // 2) + geom
        else:
            corr = (b - a + 1) * p ** (a // 2) + geom
    else:
        corr = 2 * (p ** ((a + 1) // 2) - 1) // (p - 1)
    return base - corr
