"""Archimedean Green functions for special cycles.

The algebra is embedded into M_2(R); a point z of the upper half plane has
the associated vector w(z) = [[z, -z^2], [1, -z]].  For trace-zero real x,

    (x, w(z)) = x3 z^2 - 2 x1 z - x2,     (w(z), conj w(z)) = -4 y^2,

so R(x, z) = |x3 z^2 - 2 x1 z - x2|^2 / (4 y^2), which vanishes exactly on
the fixed-point locus D_x.  The Green kernel is xi = beta1(2 pi R) with
beta1 the exponential integral, and the Green equation away from D_x reads
Laplacian(xi) = 2 phi0 / y^2 in euclidean coordinates, which the tests
verify by central finite differences.  Truncated automorphic sums use the
majorant (x,x)_z = (x,x) + 2 R(x,z) with a certified geometric tail bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .quatalg import (
    MaximalOrder,
    TernaryLattice,
    enumerate_majorant,
)

EULER_GAMMA = 0.5772156649015328606


# ---------------------------------------------------------------------------
# points and the real embedding
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UpperHalfPoint:
    z: complex

    def __post_init__(self):
        if self.z.imag == 0:
            raise ValueError("Im(z) must be nonzero")

    @property
    def upper(self) -> complex:
        return self.z if self.z.imag > 0 else self.z.conjugate()


def embedding_matrices(a: int, b: int):
    """Images of 1, i, j, ij in M_2(R); requires an indefinite pair."""
    if a > 0:
        ra = math.sqrt(a)
        Mi = ((ra, 0.0), (0.0, -ra))
        Mj = ((0.0, 1.0), (float(b), 0.0))
    elif b > 0:
        rb = math.sqrt(b)
        Mj = ((rb, 0.0), (0.0, -rb))
        Mi = ((0.0, 1.0), (float(a), 0.0))
    else:
        raise ValueError("definite algebra has no real 2x2 embedding")
    Mk = _mmul(Mi, Mj)
    one = ((1.0, 0.0), (0.0, 1.0))
    return one, Mi, Mj, Mk


def _mmul(A, B):
    return (
        (A[0][0] * B[0][0] + A[0][1] * B[1][0], A[0][0] * B[0][1] + A[0][1] * B[1][1]),
        (A[1][0] * B[0][0] + A[1][1] * B[1][0], A[1][0] * B[0][1] + A[1][1] * B[1][1]),
    )


def embed_element(elem) -> tuple:
    """Real 2x2 image of a quaternion element."""
    mats = embedding_matrices(elem.algebra.a, elem.algebra.b)
    out = [[0.0, 0.0], [0.0, 0.0]]
    for c, M in zip(elem.coeffs, mats):
        f = float(c)
        for i in range(2):
            for j in range(2):
                out[i][j] += f * M[i][j]
    return (tuple(out[0]), tuple(out[1]))


# ---------------------------------------------------------------------------
# R, beta1, xi, phi0
# ---------------------------------------------------------------------------

def pair_with_wz(x, z: complex) -> complex:
    """(x, w(z)) for trace-zero real x = [[x1, x2], [x3, -x1]]."""
    x1, x2 = x[0]
    x3 = x[1][0]
    return x3 * z * z - 2.0 * x1 * z - x2


def R_value(x, z) -> float:
    """R(x,z) = |(x, w(z))|^2 |(w(z), conj w(z))|^{-1}; zero exactly on D_x."""
    zz = z.upper if isinstance(z, UpperHalfPoint) else complex(z)
    y = zz.imag
    num = pair_with_wz(x, zz)
    return (num.real**2 + num.imag**2) / (4.0 * y * y)


def q_of(x) -> float:
    """Q(x) = det(x) for trace-zero real x."""
    return x[0][0] * x[1][1] - x[0][1] * x[1][0]


def _beta1_series(r: float) -> float:
    # E1(r) = -gamma - log r + sum (-1)^{k+1} r^k / (k k!)
    total = -EULER_GAMMA - math.log(r)
    term = 1.0
    for k in range(1, 60):
        term *= -r / k
        total -= term / k
        if abs(term / k) < 1e-18 * max(1.0, abs(total)):
            break
    return total


def _beta1_contfrac(r: float) -> float:
    # E1(r) = e^{-r} / (r + 1/(1 + 1/(r + 2/(1 + 2/(r + ...))))), Lentz
    tiny = 1e-300
    f = tiny
    c = f
    d = 0.0
    b0, a0 = r + 1.0, 1.0
    f = a0 / b0 if b0 else tiny
    c, d = a0 / tiny, 1.0 / b0
    f = a0 * d
    for k in range(1, 200):
        a, bb = -k * k * 1.0, r + 2.0 * k + 1.0
        d = bb + a * d
        d = tiny if d == 0 else d
        c = bb + a / c
        c = tiny if c == 0 else c
        d = 1.0 / d
        delta = c * d
        f *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return math.exp(-r) * f


def beta1(r: float) -> float:
    """beta1(r) = int_1^inf e^{-ru} u^{-1} du = E1(r).

    Power series below the crossover, modified continued fraction above;
    the two agree to 1e-12 across [0.5, 2].
    """
    if r <= 0:
        raise ValueError("beta1 needs r > 0")
    if r > 700:
        return 0.0
    return _beta1_series(r) if r < 1.2 else _beta1_contfrac(r)


@dataclass(frozen=True)
class GreenEvaluation:
    R: float
    xi: float
    phi0: float
    truncation_error: float = 0.0
    singular: bool = False


def xi_and_phi0(x, z) -> GreenEvaluation:
    """xi = beta1(2 pi R); phi0 = [4 pi (R + 2Q) - 1] e^{-2 pi R}.

    Near the divisor (R below 1e-12) the evaluation is flagged singular
    rather than rejected.
    """
    r = R_value(x, z)
    q = q_of(x)
    phi0 = (4.0 * math.pi * (r + 2.0 * q) - 1.0) * math.exp(-2.0 * math.pi * r)
    if r < 1e-12:
        return GreenEvaluation(R=r, xi=math.inf, phi0=phi0, singular=True)
    return GreenEvaluation(R=r, xi=beta1(2.0 * math.pi * r), phi0=phi0)


def majorant_value(x, z) -> float:
    """(x,x)_z = (x,x) + 2 R(x,z).

    This is the square norm of the projection to the positive line at z
    (nonnegative, vanishing on the negative plane), the quantity the
    summation tail bounds are phrased in.
    """
    return 2.0 * q_of(x) + 2.0 * R_value(x, z)


# ---------------------------------------------------------------------------
# truncated automorphic sums
# ---------------------------------------------------------------------------

def majorant_matrix(L: TernaryLattice, z) -> list:
    """Positive-definite Gram matrix of (x,x) + 4 R(x,z) on the basis.

    (x,x) + 2R is only positive semidefinite (rank 1), so enumeration uses
    the sign-flipped form (x,x) + 4R, which is the definite majorant; on
    the quadric Q(x) = t the two determine each other:
    R = ((x,x)_pd - 2t)/4.
    """
    zz = z.upper if isinstance(z, UpperHalfPoint) else complex(z)
    y = zz.imag
    emb = [embed_element(e) for e in L.basis]
    c = [pair_with_wz(m, zz) for m in emb]
    out = []
    for i in range(3):
        row = []
        for j in range(3):
            g = float(L.gram[i][j])
            cross = (c[i] * c[j].conjugate()).real / (y * y)
            row.append(g + cross)
        out.append(row)
    return out


def _box_count(M, bound: float) -> int:
    """Upper bound for #{x in Z^3 : x^T M x <= bound} via the dual box."""
    from .quatalg import mat_solve
    n = 3
    cols = []
    for k in range(n):
        e = [Fraction(int(i == k)) for i in range(n)]
        Mf = [[Fraction(x).limit_denominator(10**9) for x in row] for row in M]
        cols.append(mat_solve(Mf, e))
    total = 1
    for k in range(n):
        diag = float(cols[k][k])
        total *= 2 * int(math.sqrt(max(bound, 0.0) * max(diag, 0.0))) + 1
    return total


def Xi_sum(t: int, v: float, z, order: MaximalOrder, tol: float = 1e-8,
           max_bound: float = 4096.0) -> GreenEvaluation:
    """Xi(t, v)(z) = sum over x in O_B cap V with Q(x) = t of xi(sqrt(v) x, z).

    The sum runs over majorant-bounded vectors and carries a certified
    geometric tail bound: every omitted term has R >= (bound - 2t)/2 and
    beta1(r) <= e^{-r}, while shell counts are bounded by coordinate boxes.
    """
    if t == 0:
        raise ValueError("t must be nonzero")
    L = order.ternary
    zz = z if isinstance(z, UpperHalfPoint) else UpperHalfPoint(complex(z))
    M = majorant_matrix(L, zz)
    bound = max(8.0, 4.0 * abs(t))
    while True:
        tail = _tail_bound(M, bound, t, v)
        if tail <= tol or bound >= max_bound:
            break
        bound *= 2
    if tail > tol:
        raise RuntimeError(
            f"cannot certify tail <= {tol} within enumeration bound {max_bound}")
    total = 0.0
    singular = False
    for coords in enumerate_majorant(M, Fraction(bound).limit_denominator(10**6)):
        if not any(coords):
            continue
        if L.q_value(coords) != t:
            continue
        x = embed_element(L.vector(coords))
        r = R_value(x, zz)
        if r < 1e-12:
            singular = True
            continue
        total += beta1(2.0 * math.pi * v * r)
    return GreenEvaluation(R=math.nan, xi=total, phi0=math.nan,
                           truncation_error=tail, singular=singular)


def _tail_bound(M, bound: float, t: int, v: float) -> float:
    """sum over shells [bound + k, bound + k + 1) of box-count * e^{-2 pi v R}.

    Omitted vectors have (x,x) + 4R > bound and Q(x) = t, so
    R > (bound - 2t)/4, and beta1(r) <= e^{-r}.
    """
    total = 0.0
    for k in range(0, 4000):
        u = bound + k
        r_min = (u - 2.0 * t) / 4.0
        if r_min <= 0:
            return math.inf
        term = _box_count(M, u + 1.0) * math.exp(-2.0 * math.pi * v * r_min)
        total += term
        if term < 1e-18:
            break
    return total
