"""Closed-form leading coefficients of C(e,p,q).

The leading power of e in C(e,p,q) is |p-q| for direct families and p+q for
retrograde ones.  Its coefficient is assembled from three pieces:

  * Laplace coefficients b_n(alpha), the Fourier coefficients of
    (1 + alpha^2 - 2 alpha cos(theta))^(-1/2), evaluated by their
    hypergeometric series together with termwise derivatives;
  * Bessel-function Laurent series of the exponential factor
    exp(+-(e n p / 2q)(z^q - z^(-q)));
  * polynomials in the shift operator D = alpha d/dalpha, which transport
    the Laplace coefficients from the mean radius to the instantaneous one.

All series bookkeeping is done exactly over Fractions; floats enter only in
the final evaluation of the Laplace coefficients and their derivatives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import mpmath

from .errors import ValidationError
from .perturbation import ResonantFamily

# ---------------------------------------------------------------------------
# Bessel functions by power series
# ---------------------------------------------------------------------------


def bessel_j(k: int, x: float) -> float:
    """Bessel function J_k(x) of integer order by its power series.

    Valid for |x| <= 50; the alternating series is summed in extended
    precision when cancellation would otherwise spoil the float result.
    J_{-k}(x) = (-1)^k J_k(x).
    """
    k = int(k)
    if k < 0:
        return (-1.0) ** k * bessel_j(-k, x)
    if abs(x) > 50.0:
        raise ValidationError(f"bessel_j series evaluation restricted to |x| <= 50, got {x}")
    if x == 0.0:
        return 1.0 if k == 0 else 0.0
    # Worst-case cancellation loses ~ 2|x|/ln(10) digits; pad generously.
    dps = 20 + int(abs(x))
    with mpmath.workdps(dps):
        xm = mpmath.mpf(x)
        half = xm / 2
        term = half**k / mpmath.factorial(k)
        total = term
        m = 0
        while True:
            m += 1
            term = -term * half * half / (m * (m + k))
            total += term
            if abs(term) < mpmath.mpf(10) ** (-dps) * (abs(total) + 1):
                break
        return float(total)


# ---------------------------------------------------------------------------
# Laplace coefficients
# ---------------------------------------------------------------------------


def laplace_b(n: int, alpha: float, deriv_order: int = 0):
    """Laplace coefficient b_n(alpha) and its first derivatives.

    b_n is defined by 1/sqrt(1 + alpha^2 - 2 alpha cos(theta))
    = (1/2) * sum_n b_n(alpha) exp(i n theta), i.e.
    b_n(alpha) = 2 sum_{m>=0} c_m alpha^(n+2m) with
    c_m = (1/2)_m (1/2)_(n+m) / (m! (n+m)!).

    Returns the list [b_n, b_n', ..., b_n^(deriv_order)] evaluated at alpha;
    derivatives are taken termwise.  Requires 0 < alpha < 1.
    """
    n = abs(int(n))
    if not 0.0 < alpha < 1.0:
        raise ValidationError(f"laplace_b requires 0 < alpha < 1, got {alpha}")
    if deriv_order < 0:
        raise ValidationError("deriv_order must be >= 0")
    sums = [0.0] * (deriv_order + 1)
    # c_0 = (1/2)_n / n!
    c = 1.0
    for i in range(n):
        c *= (0.5 + i) / (i + 1.0)
    v = 2.0 * c * alpha**n  # running term of the j=0 series
    m = 0
    while True:
        power = n + 2 * m
        sums[0] += v
        ff = 1.0
        for j in range(1, deriv_order + 1):
            ff *= (power - j + 1) / alpha
            sums[j] += v * ff
        # bound on the largest remaining contribution across all j
        tail_scale = ((power + 2) / alpha) ** deriv_order if deriv_order else 1.0
        v *= (0.5 + m) * (0.5 + n + m) / ((m + 1.0) * (n + m + 1.0)) * alpha * alpha
        m += 1
        if abs(v) * tail_scale < 1e-18 * (abs(sums[deriv_order]) + 1.0) and m > deriv_order + 2:
            break
        if m > 200000:
            raise ValidationError(f"laplace_b series did not converge at alpha={alpha}")
    return sums


def laplace_b_quadrature(n: int, alpha: float) -> float:
    """Independent trapezoid-quadrature evaluation of b_n(alpha)."""
    n = abs(int(n))
    N = 4096
    h = 2.0 * math.pi / N
    total = math.fsum(
        math.cos(n * (i * h)) / math.sqrt(1.0 + alpha * alpha - 2.0 * alpha * math.cos(i * h))
        for i in range(N)
    )
    return total * h / math.pi


# ---------------------------------------------------------------------------
# Polynomials in the operator D = alpha d/dalpha
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _stirling2(k: int, j: int) -> int:
    """Stirling numbers of the second kind: D^k = sum_j S(k,j) alpha^j d^j/dalpha^j."""
    if k == j == 0:
        return 1
    if k == 0 or j == 0 or j > k:
        return 0
    return j * _stirling2(k - 1, j) + _stirling2(k - 1, j - 1)


class OperatorPolynomial:
    """Polynomial in D = alpha d/dalpha with exact rational coefficients."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs=()):
        c = [Fraction(x) for x in coeffs]
        while c and c[-1] == 0:
            c.pop()
        self.coeffs = tuple(c)

    @staticmethod
    def constant(x) -> "OperatorPolynomial":
        return OperatorPolynomial((Fraction(x),))

    @staticmethod
    def identity() -> "OperatorPolynomial":
        """The operator D itself."""
        return OperatorPolynomial((0, 1))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1 if self.coeffs else -1

    def is_zero(self) -> bool:
        return not self.coeffs

    def __add__(self, other):
        other = _as_dpoly(other)
        n = max(len(self.coeffs), len(other.coeffs))
        return OperatorPolynomial(
            tuple(
                (self.coeffs[i] if i < len(self.coeffs) else 0)
                + (other.coeffs[i] if i < len(other.coeffs) else 0)
                for i in range(n)
            )
        )

    __radd__ = __add__

    def __neg__(self):
        return OperatorPolynomial(tuple(-c for c in self.coeffs))

    def __sub__(self, other):
        return self + (-_as_dpoly(other))

    def __rsub__(self, other):
        return _as_dpoly(other) + (-self)

    def __mul__(self, other):
        if isinstance(other, OperatorPolynomial):
            if self.is_zero() or other.is_zero():
                return OperatorPolynomial()
            out = [Fraction(0)] * (len(self.coeffs) + len(other.coeffs) - 1)
            for i, a in enumerate(self.coeffs):
                if a:
                    for j, b in enumerate(other.coeffs):
                        out[i + j] += a * b
            return OperatorPolynomial(tuple(out))
        return OperatorPolynomial(tuple(c * Fraction(other) for c in self.coeffs))

    __rmul__ = __mul__

    def __eq__(self, other):
        return isinstance(other, OperatorPolynomial) and self.coeffs == other.coeffs

    def __hash__(self):
        return hash(self.coeffs)

    def __repr__(self):
        return f"OperatorPolynomial({list(self.coeffs)})"

    def eval_scalar(self, n) -> Fraction:
        """P(n): the eigenvalue on alpha^n, since D(alpha^n) = n alpha^n."""
        acc = Fraction(0)
        for c in reversed(self.coeffs):
            acc = acc * Fraction(n) + c
        return acc

    def apply(self, derivs, alpha: float) -> float:
        """Apply P(D) to a function given [f, f', f'', ...] at alpha."""
        if self.degree >= len(derivs):
            raise ValidationError(
                f"need {self.degree + 1} derivatives to apply degree-{self.degree} operator"
            )
        total = 0.0
        for k, ck in enumerate(self.coeffs):
            if ck == 0:
                continue
            inner = 0.0
            ap = 1.0
            for j in range(k + 1):
                s = _stirling2(k, j)
                if s:
                    inner += s * ap * derivs[j]
                ap *= alpha
            total += float(ck) * inner
        return total


def _as_dpoly(x) -> OperatorPolynomial:
    if isinstance(x, OperatorPolynomial):
        return x
    return OperatorPolynomial.constant(x)


def dpoly_binomial(P: OperatorPolynomial, k: int) -> OperatorPolynomial:
    """binom(P, k) = P (P-1) ... (P-k+1) / k! for an operator polynomial P."""
    out = OperatorPolynomial.constant(1)
    for i in range(k):
        out = out * (P - i)
    return out * Fraction(1, math.factorial(k))


# ---------------------------------------------------------------------------
# Formal power series in e with OperatorPolynomial coefficients
# ---------------------------------------------------------------------------


def beta_series(order: int) -> list[Fraction]:
    """Series of beta(e) where e = 2 beta / (1 + beta^2) (beta = e/2 + e^3/8 + ...)."""
    b = [Fraction(0)] * (order + 1)
    for _ in range(order + 1):
        sq = _scalar_mul(b, b, order)
        nb = [Fraction(0)] * (order + 1)
        for j in range(order):
            # beta = (e/2)(1 + beta^2): shift by the single power of e
            nb[j + 1] = Fraction(1, 2) * (Fraction(1) if j == 0 else Fraction(0))
            nb[j + 1] += Fraction(1, 2) * sq[j]
        b = nb
    return b


def _scalar_mul(a, b, order):
    out = [Fraction(0)] * (order + 1)
    for i, ai in enumerate(a):
        if ai == 0:
            continue
        for j, bj in enumerate(b):
            if i + j > order:
                break
            out[i + j] += ai * bj
    return out


def _series_zero(order):
    return [OperatorPolynomial()] * (order + 1)


def _series_mul(a, b, order):
    out = _series_zero(order)
    for i, ai in enumerate(a):
        if ai.is_zero():
            continue
        for j, bj in enumerate(b):
            if i + j > order:
                break
            if not bj.is_zero():
                out[i + j] = out[i + j] + ai * bj
    return out


def _scalar_power(s, m, order):
    out = [Fraction(1)] + [Fraction(0)] * order
    for _ in range(m):
        out = _scalar_mul(out, s, order)
    return out


def _bessel_scalar_series(k3: int, x_coeff: Fraction, order: int) -> list[Fraction]:
    """e-series of the coefficient of w^{k3} in exp(x_coeff*e*(w - 1/w)) (w = z^q).

    That coefficient is J_{k3}(2*x_coeff*e); negative orders pick up (-1)^{k3}.
    """
    sign = 1
    k = k3
    if k < 0:
        k = -k
        sign = (-1) ** k
    out = [Fraction(0)] * (order + 1)
    m = 0
    while k + 2 * m <= order:
        out[k + 2 * m] = (
            sign
            * (-1) ** m
            * x_coeff ** (k + 2 * m)
            / (math.factorial(m) * math.factorial(m + k))
        )
        m += 1
    return out


def _one_plus_beta_sq_pow(A: OperatorPolynomial, order: int):
    """Series of (1 + beta^2)^A in e, with operator-valued exponent."""
    beta = beta_series(order)
    beta2 = _scalar_mul(beta, beta, order)
    out = _series_zero(order)
    out[0] = OperatorPolynomial.constant(1)
    j = 1
    while 2 * j <= order:
        coeff = dpoly_binomial(A, j)
        b2j = _scalar_power(beta2, j, order)
        for i, x in enumerate(b2j):
            if x and i <= order:
                out[i] = out[i] + coeff * x
        j += 1
    return out


def _xn_coefficient(
    q: int,
    k: int,
    x_coeff: Fraction,
    exp_sign: int,
    A: OperatorPolynomial,
    B: OperatorPolynomial,
    C: OperatorPolynomial,
    order: int,
):
    """e-series (operator valued) of the z^{k q} coefficient of
    (1+beta^2)^A (1-beta z^-q)^B (1-beta z^q)^C exp(exp_sign * x_coeff * e * (z^q - z^-q)).
    """
    beta = beta_series(order)
    out = _series_zero(order)
    for m1 in range(order + 1):
        bin_b = dpoly_binomial(B, m1) * ((-1) ** m1)
        if bin_b.is_zero():
            continue
        for m2 in range(order + 1 - m1):
            k3 = k + m1 - m2
            if m1 + m2 + abs(k3) > order:
                continue
            bin_c = dpoly_binomial(C, m2) * ((-1) ** m2)
            if bin_c.is_zero():
                continue
            bes = _bessel_scalar_series(k3, exp_sign * x_coeff, order)
            scal = _scalar_mul(_scalar_power(beta, m1 + m2, order), bes, order)
            op = bin_b * bin_c
            for i, x in enumerate(scal):
                if x:
                    out[i] = out[i] + op * x
    return _series_mul(_one_plus_beta_sq_pow(A, order), out, order)


def xn_series_coefficient(p: int, q: int, n: int, k: int, e_order: int, direction: str = "direct"):
    """Operator-valued e-series of the z^{k q} coefficient of X_n(-D, D+n, D-n).

    X_n is the product of (1+beta^2)^(-D), the two binomial factors
    (1 - beta z^(-q))^(D+n) and (1 - beta z^q)^(D-n), and the exponential
    whose argument flips sign between direct and retrograde families.
    Returns a list of OperatorPolynomial, index = power of e.  The lowest
    possibly nonzero order is |k|.
    """
    if direction not in ("direct", "retrograde"):
        raise ValidationError(f"unknown direction {direction!r}")
    D = OperatorPolynomial.identity()
    return _xn_coefficient(
        q,
        k,
        Fraction(n * p, 2 * q),
        -1 if direction == "retrograde" else 1,
        -D,
        D + n,
        D - n,
        e_order,
    )


# ---------------------------------------------------------------------------
# Leading coefficients of C1, C2, and C
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LeadingCoefficient:
    """Coefficient of e^exponent in the expansion of C(e,p,q) about e = 0."""

    family: ResonantFamily
    exponent: int
    value: float


def _leading_c1_operator(p: int, q: int, direction: str) -> OperatorPolynomial:
    """Operator polynomial giving the e^m coefficient of C1 up to the
    -2*pi*q^2*(sign) prefactor, from the n = +-q Laurent terms."""
    D = OperatorPolynomial.identity()
    m = abs(p - q) if direction == "direct" else p + q
    k = (p - q) if direction == "direct" else -(p + q)
    exp_sign = -1 if direction == "retrograde" else 1
    if p < q:
        A, B, C = -D, D + q, D - q
    else:
        # The orbit lies outside the unit circle: expand in alpha = 1/r,
        # which inverts the shift operator and swaps the target function.
        A, B, C = D, q - D, -q - D
    series = _xn_coefficient(q, k, Fraction(q * p, 2 * q), exp_sign, A, B, C, m)
    return series[m]


def leading_c1_coefficient(f: ResonantFamily) -> float:
    """Coefficient of e^m in C1 (m = |p-q| direct, p+q retrograde)."""
    p, q = f.p, f.q
    P = _leading_c1_operator(p, q, f.direction)
    sign = (-1) ** (q * f.n_g + p * f.n_l)
    nder = max(P.degree, 0)
    if p < q:
        alpha = (p / q) ** (2.0 / 3.0)
        b = laplace_b(q, alpha, nder + 1)
        derivs = [alpha * b[0]] + [alpha * b[j] + j * b[j - 1] for j in range(1, nder + 1)]
    else:
        alpha = (q / p) ** (2.0 / 3.0)
        derivs = laplace_b(q, alpha, nder)
    return -2.0 * math.pi * q * q * sign * P.apply(derivs, alpha)


def leading_c2_coefficient(f: ResonantFamily) -> float:
    """Coefficient of e^m in C2; zero unless q = 1."""
    if f.q != 1:
        return 0.0
    p = f.p
    sign = (-1) ** (f.n_g + f.n_l * p)
    if f.direction == "direct":
        s = Fraction(0)
        for j in range(p):
            s += Fraction((j + 1) * p ** (p - 1 - j), math.factorial(p - 1 - j))
        return sign * 2.0 * math.pi * p ** (-2.0 / 3.0) * float(s) / 2 ** (p - 1)
    s = Fraction(p ** (p + 1), math.factorial(p + 1))
    return sign * 2.0 * math.pi * p ** (-2.0 / 3.0) * float(s) / 2 ** (p + 1)


def leading_coefficient(f: ResonantFamily) -> LeadingCoefficient:
    """Leading coefficient of C(e,p,q) = -6*pi*p^2*(C1 + C2) in powers of e."""
    m = abs(f.p - f.q) if f.direction == "direct" else f.p + f.q
    value = -6.0 * math.pi * f.p**2 * (leading_c1_coefficient(f) + leading_c2_coefficient(f))
    return LeadingCoefficient(family=f, exponent=m, value=value)


# ---------------------------------------------------------------------------
# Printed closed forms (finite hypergeometric sums); retained as independent
# cross-checks of the general Laurent machinery above.
# ---------------------------------------------------------------------------


def closed_form_c1_operator(p: int, q: int) -> OperatorPolynomial:
    """Finite operator sum for the direct-family e^{|p-q|} coefficient of C1,
    without the -2*pi*q^2*(-1)^(n_g q + n_l p) prefactor.

    p < q: ((-1)^(q-p)/2^(q-p)) * sum_k binom(D+q, k) p^(q-p-k)/(q-p-k)!
    p > q: ((-1)^(p-q)/2^(p-q)) * sum_k (-1)^k binom(-D-q, k) p^(p-q-k)/(p-q-k)!
    (applied to alpha*b_q at alpha=(p/q)^(2/3), resp. b_q at alpha=(q/p)^(2/3)).
    """
    D = OperatorPolynomial.identity()
    m = abs(p - q)
    total = OperatorPolynomial()
    if p < q:
        for k in range(m + 1):
            total = total + dpoly_binomial(D + q, k) * Fraction(
                p ** (m - k), math.factorial(m - k)
            )
    else:
        for k in range(m + 1):
            total = total + dpoly_binomial(-D - q, k) * (
                (-1) ** k * Fraction(p ** (m - k), math.factorial(m - k))
            )
    return total * Fraction((-1) ** m, 2**m)


def c2_value(f: ResonantFamily) -> float:
    """Finite-e value of C2 for q = 1 from its Bessel series (zero for q != 1)."""
    if f.q != 1:
        return 0.0
    p, e = f.p, f.e
    beta = (1.0 - math.sqrt(1.0 - e * e)) / e
    sign = (-1) ** (f.n_g + f.n_l * p)
    total = 0.0
    m = 0
    bm = 1.0
    while True:
        k = (p - 1 - m) if f.direction == "direct" else (m + p + 1)
        term = (m + 1) * bm * bessel_j(k, e * p)
        total += term
        bm *= beta
        m += 1
        if m > 5 and abs(term) < 1e-18 * (abs(total) + 1e-30):
            break
        if m > 1000:
            break
    return sign * 2.0 * math.pi * (1.0 + beta * beta) * p ** (-2.0 / 3.0) * total
