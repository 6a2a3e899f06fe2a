"""Rational quaternion algebras, maximal orders, and ternary lattices.

An algebra (a,b) has i^2 = a, j^2 = b, ij = -ji.  The trace-zero subspace
V carries Q(x) = nrd(x) = -x^2 with bilinear form (x,y) = trd(x y^bar).
Maximal orders are produced by discriminant descent: starting from
Z<1,i,j,ij>, adjoin elements v/q until the trace-form determinant reaches
D(B)^4.  All arithmetic is exact (Fraction); enumeration of lattice vectors
uses an exact Cholesky box walk on a supplied positive-definite majorant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .exact import (
    INF,
    factorint,
    hilbert_ramified_places,
    hilbert_symbol,
    is_prime,
    primes_upto,
)

Vec4 = tuple[Fraction, Fraction, Fraction, Fraction]


# ---------------------------------------------------------------------------
# exact linear algebra helpers (tiny matrices only)
# ---------------------------------------------------------------------------

def mat_det(M) -> Fraction:
    """Determinant by fraction-free-ish Gaussian elimination."""
    n = len(M)
    A = [[Fraction(x) for x in row] for row in M]
    det = Fraction(1)
    for col in range(n):
        piv = next((r for r in range(col, n) if A[r][col] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != col:
            A[col], A[piv] = A[piv], A[col]
            det = -det
        det *= A[col][col]
        inv = 1 / A[col][col]
        for r in range(col + 1, n):
            f = A[r][col] * inv
            if f:
                A[r] = [x - f * y for x, y in zip(A[r], A[col])]
    return det


def mat_solve(M, v):
    """Solve M x = v exactly; raises on singular M."""
    n = len(M)
    A = [[Fraction(x) for x in row] + [Fraction(v[i])] for i, row in enumerate(M)]
    for col in range(n):
        piv = next((r for r in range(col, n) if A[r][col] != 0), None)
        if piv is None:
            raise ZeroDivisionError("singular matrix")
        A[col], A[piv] = A[piv], A[col]
        inv = 1 / A[col][col]
        A[col] = [x * inv for x in A[col]]
        for r in range(n):
            if r != col and A[r][col]:
                f = A[r][col]
                A[r] = [x - f * y for x, y in zip(A[r], A[col])]
    return [A[r][n] for r in range(n)]


def hnf_rows(rows: list[list[int]]) -> list[list[int]]:
    """Row Hermite normal form of an integer matrix; zero rows dropped."""
    rows = [list(r) for r in rows if any(r)]
    if not rows:
        return []
    ncols = len(rows[0])
    out = []
    col = 0
    while rows and col < ncols:
        pivot_rows = [r for r in rows if r[col] != 0]
        rest = [r for r in rows if r[col] == 0]
        if not pivot_rows:
            col += 1
            continue
        # reduce pivot column by repeated gcd steps
        while len(pivot_rows) > 1:
            pivot_rows.sort(key=lambda r: abs(r[col]))
            base = pivot_rows[0]
            newp = [base]
            for r in pivot_rows[1:]:
                q = r[col] // base[col]
                rr = [x - q * y for x, y in zip(r, base)]
                (newp if rr[col] != 0 else rest).append(rr)
            pivot_rows = newp
            if len(pivot_rows) == 1:
                break
        piv = pivot_rows[0]
        if piv[col] < 0:
            piv = [-x for x in piv]
        # reduce earlier pivots' entries in this column
        for r in out:
            q = r[col] // piv[col]
            if q:
                r[:] = [x - q * y for x, y in zip(r, piv)]
        out.append(list(piv))
        rows = [r for r in rest if any(r)]
        col += 1
    return out


def lattice_hnf(vectors: list[list[Fraction]]) -> list[list[Fraction]]:
    """HNF basis of the Z-span of rational row vectors."""
    den = 1
    for v in vectors:
        for x in v:
            den = den * x.denominator // math.gcd(den, x.denominator)
    int_rows = [[int(x * den) for x in v] for v in vectors]
    return [[Fraction(x, den) for x in row] for row in hnf_rows(int_rows)]


def integer_kernel(vec: list[int]) -> list[list[int]]:
    """Basis of {c in Z^n : sum c_i vec_i = 0} (saturated)."""
    n = len(vec)
    # column reduce [vec] with a unimodular transform tracked in U
    U = [[int(i == j) for j in range(n)] for i in range(n)]
    w = list(vec)
    while True:
        nz = [i for i in range(n) if w[i] != 0]
        if len(nz) <= 1:
            break
        nz.sort(key=lambda i: abs(w[i]))
        i0 = nz[0]
        for i in nz[1:]:
            q = w[i] // w[i0]
            w[i] -= q * w[i0]
            U[i] = [x - q * y for x, y in zip(U[i], U[i0])]
    return [U[i] for i in range(n) if w[i] == 0]


# ---------------------------------------------------------------------------
# algebras and elements
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuaternionAlgebra:
    """(a,b | Q) with its ramified places and reduced discriminant D."""

    a: int
    b: int
    ramified: frozenset
    D: int

    @property
    def indefinite(self) -> bool:
        return INF not in self.ramified

    def __repr__(self):
        return f"QuaternionAlgebra(a={self.a}, b={self.b}, D={self.D})"


def make_algebra(a: int, b: int) -> QuaternionAlgebra:
    """Build (a,b) with its ramified set computed from Hilbert symbols."""
    if a == 0 or b == 0:
        raise ValueError("need nonzero a, b")
    ram = hilbert_ramified_places(a, b)
    D = 1
    for v in sorted(p for p in ram if p != INF):
        D *= v
    return QuaternionAlgebra(a=a, b=b, ramified=frozenset(ram), D=D)


@dataclass(frozen=True)
class QuaternionElement:
    """Element x0 + x1 i + x2 j + x3 ij with exact rational coordinates."""

    algebra: QuaternionAlgebra
    coeffs: Vec4

    def __add__(self, other):
        return QuaternionElement(
            self.algebra, tuple(x + y for x, y in zip(self.coeffs, other.coeffs))
        )

    def __sub__(self, other):
        return QuaternionElement(
            self.algebra, tuple(x - y for x, y in zip(self.coeffs, other.coeffs))
        )

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return QuaternionElement(
                self.algebra, tuple(x * other for x in self.coeffs)
            )
        a = Fraction(self.algebra.a)
        b = Fraction(self.algebra.b)
        x0, x1, x2, x3 = self.coeffs
        y0, y1, y2, y3 = other.coeffs
        return QuaternionElement(
            self.algebra,
            (
                x0 * y0 + a * x1 * y1 + b * x2 * y2 - a * b * x3 * y3,
                x0 * y1 + x1 * y0 - b * x2 * y3 + b * x3 * y2,
                x0 * y2 + x2 * y0 + a * x1 * y3 - a * x3 * y1,
                x0 * y3 + x3 * y0 + x1 * y2 - x2 * y1,
            ),
        )

    __rmul__ = __mul__

    def conj(self) -> "QuaternionElement":
        x0, x1, x2, x3 = self.coeffs
        return QuaternionElement(self.algebra, (x0, -x1, -x2, -x3))

    def trd(self) -> Fraction:
        return 2 * self.coeffs[0]

    def nrd(self) -> Fraction:
        a, b = self.algebra.a, self.algebra.b
        x0, x1, x2, x3 = self.coeffs
        return x0 * x0 - a * x1 * x1 - b * x2 * x2 + a * b * x3 * x3

    def pair(self, other) -> Fraction:
        """(x,y) = trd(x y^bar)."""
        return (self * other.conj()).trd()


def element(B: QuaternionAlgebra, coeffs) -> QuaternionElement:
    return QuaternionElement(B, tuple(Fraction(c) for c in coeffs))


# ---------------------------------------------------------------------------
# algebra search
# ---------------------------------------------------------------------------

class SearchExhausted(RuntimeError):
    pass


def algebra_from_disc(D: int, bound: int = 60) -> QuaternionAlgebra:
    """Indefinite (a,b) with ramified set exactly the primes dividing D.

    Deterministic search: increasing max(|a|,|b|) with a > 0, b ascending;
    the first pair whose verified ramified set matches wins.
    """
    fac = factorint(D)
    if D <= 1 or any(e > 1 for e in fac.values()) or len(fac) % 2 != 0:
        raise ValueError(
            f"D={D} must be a squarefree product of an even number of primes"
        )
    target = frozenset(fac)
    for s in range(1, bound + 1):
        for a in range(1, s + 1):
            for b in range(-s, s + 1):
                if b == 0 or max(a, abs(b)) != s:
                    continue
                if hilbert_ramified_places(a, b) == target:
                    return QuaternionAlgebra(
                        a=a, b=b, ramified=target, D=D
                    )
    raise SearchExhausted(f"no presentation of D={D} with entries <= {bound}")


def definite_twist(B: QuaternionAlgebra, p: int, bound: int = 60) -> QuaternionAlgebra:
    """The definite algebra with invariants of B flipped at p and infinity."""
    if B.D % p != 0 or not is_prime(p):
        raise ValueError(f"p={p} does not divide D(B)={B.D}")
    target = frozenset({q for q in B.ramified if q != p} | {INF})
    for s in range(1, bound + 1):
        for a in range(-s, 0):
            for b in range(-s, 0):
                if max(abs(a), abs(b)) != s:
                    continue
                if hilbert_ramified_places(a, b) == target:
                    return QuaternionAlgebra(a=a, b=b, ramified=target, D=B.D // p)
    raise SearchExhausted(f"no definite twist of D={B.D} at p={p} within {bound}")


# ---------------------------------------------------------------------------
# maximal orders
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TernaryLattice:
    """O_B cap V with its exact Gram matrix (x_i, x_j) = trd(x_i x_j^bar)."""

    algebra: QuaternionAlgebra
    basis: tuple[QuaternionElement, QuaternionElement, QuaternionElement]
    gram: tuple[tuple[Fraction, ...], ...]

    def vector(self, coords) -> QuaternionElement:
        v = self.basis[0] * Fraction(coords[0])
        for c, e in zip(coords[1:], self.basis[1:]):
            v = v + e * Fraction(c)
        return v

    def q_value(self, coords) -> Fraction:
        """Q(x) = (x,x)/2 for x with the given integer coordinates."""
        total = Fraction(0)
        for i in range(3):
            for j in range(3):
                total += self.gram[i][j] * coords[i] * coords[j]
        return total / 2


@dataclass(frozen=True)
class MaximalOrder:
    algebra: QuaternionAlgebra
    basis: tuple[QuaternionElement, ...]   # rank-4 Z-basis
    ternary: TernaryLattice

    def trace_gram(self):
        return [[x.pair(y) for y in self.basis] for x in self.basis]

    def discriminant(self) -> int:
        """|det| of the rank-4 trace form; equals D(B)^2 when maximal."""
        d = abs(mat_det(self.trace_gram()))
        assert d.denominator == 1, d
        return d.numerator


def _order_closure(B, rows, den_bound):
    """Close a spanning set under multiplication; None if it misbehaves."""
    basis = lattice_hnf(rows)
    if len(basis) != 4:
        return None
    for _ in range(12):
        elems = [QuaternionElement(B, tuple(r)) for r in basis]
        mat = [list(r) for r in basis]
        new_rows = []
        for x in elems:
            for y in elems:
                prod = (x * y).coeffs
                try:
                    sol = mat_solve([[mat[j][i] for j in range(4)] for i in range(4)],
                                    list(prod))
                except ZeroDivisionError:
                    return None
                if not all(c.denominator == 1 for c in sol):
                    new_rows.append(list(prod))
        if not new_rows:
            for r in basis:
                if any(x.denominator > den_bound for x in r):
                    return None
            return basis
        basis = lattice_hnf(basis + new_rows)
        if len(basis) != 4:
            return None
        if any(x.denominator > den_bound for r in basis for x in r):
            return None
    return None


def maximal_order(B: QuaternionAlgebra, den_bound: int = 10**6) -> MaximalOrder:
    """Maximal order containing Z<i,j>, by discriminant descent.

    Adjoin candidates v/q (v over representatives of P^3(F_q)) for primes q
    dividing the current excess, keeping only candidates that generate a
    ring with strictly smaller trace-form determinant.  Terminates when the
    determinant equals D(B)^4.
    """
    if not B.indefinite:
        raise ValueError("maximal_order expects an indefinite algebra")
    target = Fraction(B.D) ** 2
    basis = [[Fraction(int(i == j)) for j in range(4)] for i in range(4)]

    def disc_of(rows):
        elems = [QuaternionElement(B, tuple(r)) for r in rows]
        return abs(mat_det([[x.pair(y) for y in elems] for x in elems]))

    disc = disc_of(basis)
    while disc > target:
        ratio = disc / target
        assert ratio.denominator == 1
        improved = False
        for q in sorted(factorint(ratio.numerator)):
            for cand in _proj_reps(q):
                vec = [sum(Fraction(c) * basis[k][i] for k, c in enumerate(cand))
                       for i in range(4)]
                x = QuaternionElement(B, tuple(v / q for v in vec))
                if x.trd().denominator != 1 or x.nrd().denominator != 1:
                    continue
                closed = _order_closure(B, basis + [list(x.coeffs)], den_bound)
                if closed is None:
                    continue
                new_disc = disc_of(closed)
                if new_disc < disc:
                    basis, disc, improved = closed, new_disc, True
                    break
            if improved:
                break
        if not improved:
            raise SearchExhausted(
                f"saturation stalled at trace determinant {disc} (target {target})"
            )
    elems = tuple(QuaternionElement(B, tuple(r)) for r in basis)
    return MaximalOrder(algebra=B, basis=elems, ternary=_trace_zero(B, elems))


def _proj_reps(q: int):
    """Representatives of P^3(F_q): last nonzero coordinate normalized to 1."""
    reps = []
    for lead in range(4):
        # coordinates after `lead` are zero, coordinate `lead` is 1
        free = lead
        for idx in range(q**free):
            c = []
            k = idx
            for _ in range(free):
                c.append(k % q)
                k //= q
            c.append(1)
            c.extend([0] * (3 - lead))
            reps.append(tuple(c))
    return reps


def _trace_zero(B, elems) -> TernaryLattice:
    traces = [x.trd() for x in elems]
    den = 1
    for t in traces:
        den = den * t.denominator // math.gcd(den, t.denominator)
    tvec = [int(t * den) for t in traces]
    kern = integer_kernel(tvec)
    assert len(kern) == 3, "trace-zero sublattice must have rank 3"
    rows = [[sum(Fraction(c[k]) * elems[k].coeffs[i] for k in range(4))
             for i in range(4)] for c in kern]
    rows = lattice_hnf(rows)
    vecs = tuple(QuaternionElement(B, tuple(r)) for r in rows)
    gram = tuple(tuple(x.pair(y) for y in vecs) for x in vecs)
    for v in vecs:
        assert v.trd() == 0
        assert v.nrd() == v.pair(v) / 2
    return TernaryLattice(algebra=B, basis=vecs, gram=gram)


# ---------------------------------------------------------------------------
# lattice vector enumeration
# ---------------------------------------------------------------------------

def _ldl(M):
    """M = L^T D L with unit upper-triangular L, exact; M must be PD."""
    n = len(M)
    A = [[Fraction(x) for x in row] for row in M]
    d = [Fraction(0)] * n
    u = [[Fraction(0)] * n for _ in range(n)]
    for i in range(n):
        d[i] = A[i][i] - sum(d[k] * u[k][i] ** 2 for k in range(i))
        if d[i] <= 0:
            raise ValueError("majorant is not positive definite")
        u[i][i] = Fraction(1)
        for j in range(i + 1, n):
            u[i][j] = (A[i][j] - sum(d[k] * u[k][i] * u[k][j] for k in range(i))) / d[i]
    return d, u


def _int_range(center: Fraction, radius2: Fraction, scale: Fraction):
    """Integers x with scale*(x-center)^2 <= radius2, via exact predicate."""
    if radius2 < 0:
        return range(0)
    approx = math.sqrt(float(radius2 / scale)) if radius2 > 0 else 0.0
    lo = math.floor(float(center) - approx) - 2
    hi = math.ceil(float(center) + approx) + 2
    ok = lambda x: scale * (Fraction(x) - center) ** 2 <= radius2
    while ok(lo - 1):
        lo -= 1
    while not ok(lo) and lo <= hi:
        lo += 1
    while ok(hi + 1):
        hi += 1
    while not ok(hi) and hi >= lo:
        hi -= 1
    return range(lo, hi + 1)


def enumerate_majorant(majorant, bound) -> list[tuple[int, int, int]]:
    """All integer triples with x^T M x <= bound, exact Cholesky box walk."""
    M = [[Fraction(x) if not isinstance(x, float) else Fraction(x).limit_denominator(10**12)
          for x in row] for row in majorant]
    # symmetrize defensively; callers pass float majorants from green
    M = [[(M[i][j] + M[j][i]) / 2 for j in range(3)] for i in range(3)]
    bound = Fraction(bound) if not isinstance(bound, float) else Fraction(bound)
    d, u = _ldl(M)
    out = []
    for x2 in _int_range(Fraction(0), bound, d[2]):
        r2 = bound - d[2] * Fraction(x2) ** 2
        c1 = -u[1][2] * x2
        for x1 in _int_range(c1, r2, d[1]):
            r1 = r2 - d[1] * (Fraction(x1) - c1) ** 2
            c0 = -u[0][1] * x1 - u[0][2] * x2
            for x0 in _int_range(c0, r1, d[0]):
                out.append((x0, x1, x2))
    out.sort()
    return out


def enumerate_norm_t(L: TernaryLattice, t, majorant, bound) -> list[tuple[int, int, int]]:
    """Coordinates of all x in L with Q(x) = t and majorant-norm <= bound."""
    t = Fraction(t)
    return [c for c in enumerate_majorant(majorant, bound)
            if any(c) and L.q_value(c) == t]


# ---------------------------------------------------------------------------
# fundamental matrices and Diff sets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FundamentalMatrix:
    """T = [[t1, m],[m, t2]] in Sym_2(Z)^dual, stored as (t1, 2m, t2)."""

    t1: int
    twom: int
    t2: int

    @property
    def det(self) -> Fraction:
        return Fraction(4 * self.t1 * self.t2 - self.twom**2, 4)

    @property
    def entries(self):
        m = Fraction(self.twom, 2)
        return ((Fraction(self.t1), m), (m, Fraction(self.t2)))

    @property
    def positive_definite(self) -> bool:
        return self.t1 > 0 and self.det > 0

    def transform(self, U) -> "FundamentalMatrix":
        """U^T T U for an integer 2x2 matrix U."""
        (a, b), (c, d) = U
        (t1, m), (_, t2) = self.entries
        nt1 = a * a * t1 + 2 * a * c * m + c * c * t2
        nt2 = b * b * t1 + 2 * b * d * m + d * d * t2
        nm = a * b * t1 + (a * d + b * c) * m + c * d * t2
        assert nt1.denominator == 1 and nt2.denominator == 1
        assert (2 * nm).denominator == 1
        return FundamentalMatrix(int(nt1), int(2 * nm), int(nt2))


def rational_diagonal(T: FundamentalMatrix) -> list[Fraction]:
    """A diagonalization of T as a quadratic form over Q (congruence)."""
    (t1, m), (_, t2) = T.entries
    det = T.det
    if det == 0:
        raise ValueError("T must be nonsingular")
    if t1 != 0:
        return [t1, det / t1]
    if t2 != 0:
        return [t2, det / t2]
    return [2 * m, -2 * m]


def hasse_invariant(diag, v) -> int:
    """Hasse invariant prod_{i<j} (a_i, a_j)_v of a diagonal form."""
    eps = 1
    for i in range(len(diag)):
        for j in range(i + 1, len(diag)):
            eps *= hilbert_symbol(diag[i], diag[j], v)
    return eps


def diff_set(T: FundamentalMatrix, B: QuaternionAlgebra) -> set:
    """Places where the ternary space representing T differs from V^B.

    The space has form Q_T = diag(T, det(T)^{-1}); a quaternion trace-zero
    space (a,b) has Hasse invariant (-1,-1)_v * inv_v(B), so
    inv_v(B_T) = (-1,-1)_v * hasse(Q_T).
    """
    det = T.det
    if det == 0:
        raise ValueError("T must be nonsingular")
    diag = rational_diagonal(T) + [1 / det]
    places = {2, INF}
    for x in diag:
        for q in factorint(x.numerator):
            places.add(q)
        for q in factorint(x.denominator):
            places.add(q)
    places.update(p for p in B.ramified if p != INF)
    out = set()
    for v in sorted(places, key=lambda w: (w == INF, w if w != INF else 0)):
        inv_bt = hilbert_symbol(-1, -1, v) * hasse_invariant(diag, v)
        inv_b = -1 if v in B.ramified else 1
        if inv_bt == -inv_b:
            out.add(v)
    return out
