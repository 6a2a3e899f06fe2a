"""Exact arithmetic primitives: discriminants, characters, class numbers.

Everything in this module is integer/rational arithmetic with no floating
point.  Class numbers are obtained only by exhaustive enumeration of reduced
binary quadratic forms; Hilbert symbols at 2 are decided by brute-force
solubility mod 2^6.  The rest of the package uses these functions as its
trust anchor, so the implementations deliberately favour checkability over
speed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

#: marker for the archimedean place in Hilbert-symbol calls
INF = "oo"


# ---------------------------------------------------------------------------
# small integer utilities
# ---------------------------------------------------------------------------

def valuation(n, p: int) -> int:
    """ord_p(n) for a nonzero integer or Fraction."""
    if isinstance(n, Fraction):
        return valuation(n.numerator, p) - valuation(n.denominator, p)
    n = int(n)
    if n == 0:
        raise ValueError("valuation of 0 is undefined")
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


def unit_part(n, p: int):
    """n / p^ord_p(n), same type as the input."""
    if isinstance(n, Fraction):
        return n / Fraction(p) ** valuation(n, p)
    return n // p ** valuation(n, p)


@lru_cache(maxsize=None)
def primes_upto(n: int) -> tuple[int, ...]:
    """All primes <= n by sieve."""
    if n < 2:
        return ()
    sieve = bytearray([1]) * (n + 1)
    sieve[0:2] = b"\x00\x00"
    for q in range(2, math.isqrt(n) + 1):
        if sieve[q]:
            sieve[q * q :: q] = b"\x00" * len(range(q * q, n + 1, q))
    return tuple(i for i in range(n + 1) if sieve[i])


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    for q in primes_upto(math.isqrt(n)):
        if n % q == 0:
            return n == q
    return True


def factorint(n: int) -> dict[int, int]:
    """Prime factorization of |n| by trial division (sizes here are tiny)."""
    n = abs(int(n))
    if n == 0:
        raise ValueError("cannot factor 0")
    out: dict[int, int] = {}
    for q in primes_upto(math.isqrt(n) + 1):
        while n % q == 0:
            out[q] = out.get(q, 0) + 1
            n //= q
        if n == 1:
            break
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


def divisors(n: int) -> list[int]:
    """Positive divisors of n, sorted."""
    n = abs(int(n))
    ds = [1]
    for q, e in factorint(n).items():
        ds = [d * q**k for d in ds for k in range(e + 1)]
    return sorted(ds)


def squarefree(n: int) -> bool:
    return all(e == 1 for e in factorint(n).values()) if abs(n) > 1 else n != 0


# ---------------------------------------------------------------------------
# discriminants
# ---------------------------------------------------------------------------

def is_fundamental_discriminant(D: int) -> bool:
    """True for a fundamental discriminant D (of a quadratic field), D != 1."""
    if D == 1 or D == 0:
        return False
    if D % 4 == 1:
        return squarefree(D)
    if D % 4 == 0:
        q = D // 4
        return q % 4 in (2, 3) and squarefree(q)
    return False


@dataclass(frozen=True)
class Discriminant:
    """The decomposition 4t = n^2 d with -d a fundamental discriminant."""

    d: int
    n: int
    t: int

    def __post_init__(self):
        if self.t < 1 or self.n < 1 or self.d < 1:
            raise ValueError("d, n, t must be positive")
        if self.n**2 * self.d != 4 * self.t:
            raise ValueError("4t = n^2 d violated")
        if not is_fundamental_discriminant(-self.d):
            raise ValueError(f"-{self.d} is not fundamental")


def fundamental_decomposition(t: int) -> Discriminant:
    """Write 4t = n^2 d with -d fundamental (largest possible n)."""
    if t < 1:
        raise ValueError("t must be >= 1")
    four_t = 4 * t
    best = None
    for n in divisors(four_t):
        if four_t % (n * n) != 0:
            continue
        d = four_t // (n * n)
        if is_fundamental_discriminant(-d):
            if best is None or n > best.n:
                best = Discriminant(d=d, n=n, t=t)
    assert best is not None, t  # -4t is always a discriminant, so some n works
    return best


# ---------------------------------------------------------------------------
# characters
# ---------------------------------------------------------------------------

def kronecker(a: int, n: int) -> int:
    """Kronecker symbol (a|n) by the standard reciprocity recursion."""
    a = int(a)
    n = int(n)
    if n == 0:
        return 1 if a in (1, -1) else 0
    sign = 1
    if n < 0:
        n = -n
        if a < 0:
            sign = -sign
    # pull out the even part of n: (a|2) rule
    while n % 2 == 0:
        n //= 2
        if a % 2 == 0:
            return 0
        if a % 8 in (3, 5):
            sign = -sign
    # now n is odd and positive; do Jacobi with reciprocity
    a %= n
    while a != 0:
        while a % 2 == 0:
            a //= 2
            if n % 8 in (3, 5):
                sign = -sign
        a, n = n, a
        if a % 4 == 3 and n % 4 == 3:
            sign = -sign
        a %= n
    return sign if n == 1 else 0


def legendre(a: int, p: int) -> int:
    """Legendre symbol (a|p) for odd prime p, via Euler's criterion."""
    a %= p
    if a == 0:
        return 0
    r = pow(a, (p - 1) // 2, p)
    return 1 if r == 1 else -1


def chi(d, m: int) -> int:
    """The quadratic character attached to discriminant -d, at m."""
    if isinstance(d, Discriminant):
        d = d.d
    return kronecker(-d, m)


# ---------------------------------------------------------------------------
# class numbers
# ---------------------------------------------------------------------------

def reduced_forms(D: int, primitive_only: bool = True) -> list[tuple[int, int, int]]:
    """All reduced binary quadratic forms (a,b,c) with b^2 - 4ac = D < 0.

    Reduced means |b| <= a <= c, with b >= 0 when |b| = a or a = c.
    """
    if D >= 0 or D % 4 not in (0, 1):
        raise ValueError(f"{D} is not a negative discriminant")
    forms = []
    bmax = math.isqrt(-D // 3)
    for b in range(-bmax, bmax + 1):
        if (b - D) % 2 != 0:
            continue
        ac4 = b * b - D
        if ac4 % 4 != 0:
            continue
        ac = ac4 // 4
        for a in range(max(abs(b), 1), math.isqrt(ac) + 1):
            if ac % a != 0:
                continue
            c = ac // a
            if a > c:
                continue
            if b < 0 and (abs(b) == a or a == c):
                continue
            if primitive_only and math.gcd(math.gcd(a, abs(b)), c) != 1:
                continue
            forms.append((a, b, c))
    return sorted(forms)


def class_number(D: int) -> tuple[int, int]:
    """(h(D), w(D)) for a negative discriminant D, by form enumeration.

    h counts reduced primitive forms; w is the number of units
    (6 for D=-3, 4 for D=-4, 2 otherwise).
    """
    if D >= 0:
        raise ValueError("discriminant must be negative")
    if D % 4 not in (0, 1):
        raise ValueError(f"{D} is not congruent to 0 or 1 mod 4")
    h = len(reduced_forms(D, primitive_only=True))
    w = 6 if D == -3 else 4 if D == -4 else 2
    return h, w


def hurwitz_H(N: int) -> Fraction:
    """Hurwitz class number H(N), by weighted count of all reduced forms.

    Forms of discriminant -N (not necessarily primitive) are counted with
    weight 1, except multiples of x^2+y^2 (weight 1/2) and of x^2+xy+y^2
    (weight 1/3).  H(0) = -1/12.  This path is independent of
    class_number(); the two are reconciled by tests.
    """
    if N == 0:
        return Fraction(-1, 12)
    if N < 0 or N % 4 in (1, 2):
        raise ValueError(f"H({N}) undefined: N must be 0 or 3 mod 4")
    total = Fraction(0)
    for (a, b, c) in reduced_forms(-N, primitive_only=False):
        g = math.gcd(math.gcd(a, abs(b)), c)
        if (a, b, c) == (g, 0, g):
            total += Fraction(1, 2)
        elif (a, b, c) == (g, g, g):
            total += Fraction(1, 3)
        else:
            total += 1
    return total


# ---------------------------------------------------------------------------
# Hilbert symbols
# ---------------------------------------------------------------------------

def _two_adic_rep(x: Fraction) -> tuple[int, int]:
    """(v mod 2, odd unit mod 64) representing x up to 2-adic squares."""
    v = valuation(x, 2)
    u = x.numerator * x.denominator // 2 ** valuation(x.numerator * x.denominator, 2)
    return v % 2, u % 64


_SQUARES_MOD64 = {(z * z) % 64 for z in range(64)}
_ODD_SQUARES_MOD64 = {(z * z) % 64 for z in range(1, 64, 2)}


def _hilbert2(a: Fraction, b: Fraction) -> int:
    """(a,b)_2 by brute-force solubility of z^2 = ax^2 + by^2 mod 2^6.

    A primitive solution mod 64 Hensel-lifts to Q_2 (the gradient has
    2-valuation <= 2 at a primitive coordinate, and 6 >= 2*2+1).
    """
    va, ua = _two_adic_rep(a)
    vb, ub = _two_adic_rep(b)
    A = (2**va * ua) % 64
    B = (2**vb * ub) % 64
    for x in range(64):
        ax2 = (A * x * x) % 64
        for y in range(64):
            t = (ax2 + B * y * y) % 64
            if x % 2 or y % 2:
                if t in _SQUARES_MOD64:
                    return 1
            elif t in _ODD_SQUARES_MOD64:
                return 1
    return -1


def hilbert_symbol(a, b, v) -> int:
    """Hilbert symbol (a,b)_v for v an odd prime, 2, or INF.

    +1 iff z^2 = a x^2 + b y^2 has a nontrivial solution over the
    completion at v.  Odd primes use the valuation/Legendre formula;
    v = 2 uses brute-force solubility; v = INF checks signs.
    """
    a = Fraction(a)
    b = Fraction(b)
    if a == 0 or b == 0:
        raise ValueError("Hilbert symbol needs nonzero arguments")
    if v == INF or v == math.inf:
        return -1 if (a < 0 and b < 0) else 1
    p = int(v)
    if p == 2:
        return _hilbert2(a, b)
    if not is_prime(p):
        raise ValueError(f"{v} is not a place")
    va, vb = valuation(a, p), valuation(b, p)
    ua, ub = unit_part(a, p), unit_part(b, p)
    ua_mod = (ua.numerator * pow(ua.denominator, -1, p)) % p
    ub_mod = (ub.numerator * pow(ub.denominator, -1, p)) % p
    s = 1
    if va % 2 and vb % 2 and legendre(-1, p) == -1:
        s = -s
    if vb % 2 and legendre(ua_mod, p) == -1:
        s = -s
    if va % 2 and legendre(ub_mod, p) == -1:
        s = -s
    return s


def hilbert_ramified_places(a, b, extra_bound: int = 0) -> set:
    """All places where (a,b)_v = -1.

    Only primes dividing 2*num*den of a and b can ramify, plus INF.
    """
    a = Fraction(a)
    b = Fraction(b)
    support = {2}
    for x in (a.numerator, a.denominator, b.numerator, b.denominator):
        support.update(factorint(x) if x not in (1, -1) else {})
    support.update(primes_upto(extra_bound))
    ram = {p for p in support if hilbert_symbol(a, b, p) == -1}
    if hilbert_symbol(a, b, INF) == -1:
        ram.add(INF)
    return ram
