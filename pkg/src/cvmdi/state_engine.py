"""Closed-form probability and covariance of the (m,n)-TMSC family.

A two-mode squeezed coherent state (squeezing r, displacement d along x on
both modes before squeezing) has one arm mixed with a Fock state |m> on a
beam splitter of transmittance tau; detecting n photons on the ancilla
output heralds the non-Gaussian "(m,n)-TMSC" resource.

Everything evaluated here comes from one master generating function

    G(s,t,u,v,w1,y1,w2,y2) = exp(Q) / D,

the Gaussian phase-space integral of the Wigner function against the
detection (s,t), ancilla (u,v) and quadrature-source (w.,y.) generating
variables, where Q is quadratic and D = 1 + alpha^2 (1 - tau) with
alpha = sinh r.  Writing

    hs(p, q; a, X, Y) = d^p/ds^p d^q/dt^q exp(-a s t + X s + Y t) | 0
                      = sum_j (-1)^j p! q! a^j X^{p-j} Y^{q-j} / (j!(p-j)!(q-j)!)

(the scaled two-variable Hermite sum, polynomial in a — regular at a = 0),
the detection probability is

    P^(m,n) = (-1)^{m+n}/(m! n!) * e^{-i1}/D *
              sum_{k,l=0}^{min(m,n)} g1^{k+l}/(k! l!) *
              [n!^2 m!^2 / ((n-k)!(n-l)!(m-l)!(m-k)!)] *
              hs(n-k, n-l; a1, b1, c1) * hs(m-l, m-k; d1, e1, f1)

and quadrature moments replace (b1,c1,e1,f1) by source-dependent affine
forms S,T,U,V and multiply by the displaced-Gaussian source exponential;
the mixed partials in the sources are mechanized with TaylorJets.  Both
paths were cross-validated against the truncated-Fock oracle to machine
precision before the coefficients below were frozen.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    DegenerateStateError,
    InternalConsistencyError,
    NumericalDomainError,
    ParameterError,
)
from .specialfn import TaylorJet, hermite2_scaled, log_factorial_ratio

DEFAULT_STATE_ORDER_CAP = 4
TAU_BOUNDARY = 1.0 - 1e-9   # (TAU_BOUNDARY, 1) is excluded; tau = 1 is special
CROSS_TERM_TOL = 1e-9       # x-p covariance entries must vanish by symmetry
PROBABILITY_FLOOR = 1e-300  # below this the heralded state is degenerate


# --------------------------------------------------------------------------
# domain types
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class StateSpec:
    """Preparation parameters of an (m,n)-TMSC state."""

    r: float     # squeezing (dimensionless, >= 0); V_A = cosh 2r
    d: float     # x-displacement per mode before squeezing (SNU)
    tau: float   # beam-splitter transmittance in [0, 1]
    m: int       # ancilla input photon number
    n: int       # detected photon number

    def __post_init__(self):
        if self.r < 0:
            raise ParameterError(f"squeezing must be >= 0, got {self.r}")
        if self.d < 0:
            raise ParameterError(f"displacement must be >= 0, got {self.d}")
        if not 0.0 <= self.tau <= 1.0:
            raise ParameterError(f"transmittance must lie in [0,1], got {self.tau}")
        for name in ("m", "n"):
            k = getattr(self, name)
            if not isinstance(k, (int, np.integer)) or k < 0:
                raise ParameterError(f"{name} must be a non-negative integer, got {k!r}")

    @property
    def v_a(self):
        """Modal variance V_A = cosh 2r in shot-noise units."""
        return math.cosh(2.0 * self.r)

    @classmethod
    def from_variance(cls, v_a, d, tau, m, n):
        if v_a < 1.0:
            raise ParameterError(f"V_A = cosh 2r requires V_A >= 1, got {v_a}")
        return cls(r=0.5 * math.acosh(v_a), d=d, tau=tau, m=m, n=n)

    def as_dict(self):
        return {"r": float(self.r), "d": float(self.d), "tau": float(self.tau),
                "m": int(self.m), "n": int(self.n)}


@dataclass(frozen=True)
class CoefficientSetB:
    """Coefficients of the detection-variable generating exponent.

    exp(-a1 s t + b1 s + c1 t - d1 u v + e1 u + f1 v + g1 t u + h1 s v - i1)/D
    differentiated m times in (u,v) and n times in (s,t) yields P^(m,n).
    """

    alpha: float  # sinh r
    a1: float
    b1: float
    c1: float
    d1: float
    e1: float
    f1: float
    g1: float
    h1: float
    i1: float


@dataclass(frozen=True)
class CoefficientSetC:
    """Coefficients coupling the quadrature sources (w1,y1,w2,y2).

    a2/b2 (resp. d2/e2) couple the sources into the detection (resp. ancilla)
    linear forms; g2/h2 are source means, i2/j2 the source quadratic terms,
    k2 the displaced-Gaussian constant (cancels in normalized moments).
    """

    a2: float
    b2: float
    c2: float
    d2: float
    e2: float
    f2: float
    g2: float
    h2: float
    i2: float
    j2: float
    k2: float


@dataclass
class QuadCovariance:
    """Two-mode covariance in the x/p block pattern, plus first moments.

    Entries are central moments in shot-noise units; the pattern has
    diag(vxA, vpA, vxB, vpB) with cross-covariances only on (x1,x2) and
    (p1,p2).  Off-pattern entries vanish by the x -> -x, p -> -p symmetry
    of the heralded state and are asserted, then stored as exact zeros.
    """

    vxA: float
    vpA: float
    vxB: float
    vpB: float
    vxC: float
    vpC: float
    mean: np.ndarray

    @property
    def matrix(self):
        sigma = np.zeros((4, 4))
        sigma[0, 0], sigma[1, 1] = self.vxA, self.vpA
        sigma[2, 2], sigma[3, 3] = self.vxB, self.vpB
        sigma[0, 2] = sigma[2, 0] = self.vxC
        sigma[1, 3] = sigma[3, 1] = self.vpC
        return sigma

    def symplectic_spectrum(self):
        omega = np.array([[0.0, 1.0, 0.0, 0.0],
                          [-1.0, 0.0, 0.0, 0.0],
                          [0.0, 0.0, 0.0, 1.0],
                          [0.0, 0.0, -1.0, 0.0]])
        eigs = np.abs(np.linalg.eigvals(1j * omega @ self.matrix))
        return np.sort(eigs)[::2][::-1]  # each value appears twice


# --------------------------------------------------------------------------
# coefficient blocks
# --------------------------------------------------------------------------

def classify(spec):
    """State-family label: catalysis (m=n), subtraction (m<n), addition (m>n)."""
    if spec.m == spec.n:
        return "CTMSC"
    return "PSTMSC" if spec.m < spec.n else "PATMSC"


def _check_tau(tau):
    if TAU_BOUNDARY < tau < 1.0:
        raise ParameterError(
            f"tau = {tau!r} falls in the excluded boundary band "
            f"({TAU_BOUNDARY}, 1); use tau = 1 exactly for the identity case")


def coefficients_b(spec):
    """Detection-block coefficients a1..i1 for the probability sum."""
    _check_tau(spec.tau)
    alpha = math.sinh(spec.r)
    ch = math.cosh(spec.r)
    omt = 1.0 - spec.tau
    root_tau = math.sqrt(spec.tau)
    dd = 1.0 + alpha * alpha * omt
    c2 = spec.d * (alpha + ch) * math.sqrt(omt) / (2.0 * dd)
    return CoefficientSetB(
        alpha=alpha,
        a1=alpha * alpha * omt / dd,
        b1=-c2,
        c1=c2,
        d1=(1.0 + alpha * alpha) * omt / dd,
        e1=root_tau * c2,
        f1=-root_tau * c2,
        g1=-root_tau / dd,
        h1=-root_tau / dd,
        i1=spec.d * spec.d * omt * math.exp(2.0 * spec.r) / (4.0 * dd),
    )


def coefficients_c(spec):
    """Source-block coefficients a2..k2 for the moment generating function."""
    _check_tau(spec.tau)
    alpha = math.sinh(spec.r)
    ch = math.cosh(spec.r)
    omt = 1.0 - spec.tau
    root_tau = math.sqrt(spec.tau)
    root_omt = math.sqrt(omt)
    dd = 1.0 + alpha * alpha * omt
    a2 = alpha * ch * root_omt / dd
    c2 = spec.d * (alpha + ch) * root_omt / (2.0 * dd)
    return CoefficientSetC(
        a2=a2,
        b2=alpha * alpha * root_tau * root_omt / dd,
        c2=c2,
        d2=root_tau * a2,
        e2=(1.0 + alpha * alpha) * root_omt / dd,
        f2=root_tau * c2,
        g2=spec.d * (alpha * spec.tau + ch) / dd,
        h2=spec.d * root_tau * (alpha + ch) / dd,
        i2=(1.0 + alpha * alpha * (1.0 + spec.tau)) / (2.0 * dd),
        j2=2.0 * alpha * ch * root_tau / dd,
        k2=spec.d * spec.d * omt * math.exp(2.0 * spec.r) / (4.0 * dd),
    )


# --------------------------------------------------------------------------
# probability
# --------------------------------------------------------------------------

def _order_factor(m, n, k, l):
    # n!^2 m!^2 / ((n-k)! (n-l)! (m-l)! (m-k)!), exact for all tabulated orders
    return log_factorial_ratio([n, n, m, m], [n - k, n - l, m - l, m - k])


def _detection_sum(cb, m, n, s_lin, t_lin, u_lin, v_lin, zero, order_cap):
    """sum_{k,l} over the residual detection/ancilla derivative orders.

    The linear arguments may be scalars (probability path) or TaylorJets
    (moment path); `zero` is the additive identity of that algebra.
    """
    total = zero
    for k in range(min(m, n) + 1):
        for l in range(min(m, n) + 1):
            weight = (cb.g1 ** l / math.factorial(l)) \
                * (cb.h1 ** k / math.factorial(k)) \
                * _order_factor(m, n, k, l)
            term = hermite2_scaled(n - k, n - l, cb.a1, s_lin, t_lin,
                                   order_cap=order_cap) \
                * hermite2_scaled(m - l, m - k, cb.d1, u_lin, v_lin,
                                  order_cap=order_cap)
            total = total + weight * term
    return total


def probability(spec, order_cap=DEFAULT_STATE_ORDER_CAP):
    """Detection probability P^(m,n) in [0, 1].

    tau = 1 is the identity beam splitter: the ancilla passes through
    untouched and the detector sees exactly the injected |m>, so P is the
    Kronecker delta delta_{mn} — returned exactly.
    """
    if spec.m > order_cap or spec.n > order_cap:
        raise ParameterError(
            f"(m,n) = ({spec.m},{spec.n}) exceeds the order cap {order_cap}")
    if spec.tau == 1.0:
        return 1.0 if spec.m == spec.n else 0.0
    cb = coefficients_b(spec)
    dd = 1.0 + cb.alpha * cb.alpha * (1.0 - spec.tau)
    sign = -1.0 if (spec.m + spec.n) % 2 else 1.0
    prefactor = sign / (math.factorial(spec.m) * math.factorial(spec.n) * dd)
    summed = _detection_sum(cb, spec.m, spec.n,
                            cb.b1, cb.c1, cb.e1, cb.f1, 0.0, order_cap)
    value = prefactor * math.exp(-cb.i1) * summed
    if not math.isfinite(value):
        raise NumericalDomainError(
            "probability evaluation produced a non-finite value",
            context={"spec": spec.as_dict(), "coefficients": vars(cb)})
    if value < 0.0:
        if value < -1e-12:
            raise InternalConsistencyError(
                f"probability came out negative ({value:.3e}) for {spec}")
        value = 0.0
    elif value > 1.0:
        if value > 1.0 + 1e-12:
            raise InternalConsistencyError(
                f"probability came out above one ({value:.6e}) for {spec}")
        value = 1.0
    return value


# --------------------------------------------------------------------------
# moments
# --------------------------------------------------------------------------

_SOURCE_VARS = ("w1", "y1", "w2", "y2")


def _moment_jet(cb, cc, m, n, degrees, order_cap):
    """Numerator jet of the moment generating function in the four sources."""
    w1 = TaylorJet.variable("w1", _SOURCE_VARS, degrees)
    y1 = TaylorJet.variable("y1", _SOURCE_VARS, degrees)
    w2 = TaylorJet.variable("w2", _SOURCE_VARS, degrees)
    y2 = TaylorJet.variable("y2", _SOURCE_VARS, degrees)

    s_lin = -(cc.c2 + cc.a2 * (w1 - 1j * y1) + cc.b2 * (w2 + 1j * y2))
    t_lin = cc.c2 + cc.a2 * (w1 + 1j * y1) + cc.b2 * (w2 - 1j * y2)
    u_lin = cc.f2 + cc.d2 * (w1 - 1j * y1) + cc.e2 * (w2 + 1j * y2)
    v_lin = -(cc.f2 + cc.d2 * (w1 + 1j * y1) + cc.e2 * (w2 - 1j * y2))

    source_exponent = (
        cc.i2 * (w1 * w1 + y1 * y1 + w2 * w2 + y2 * y2)
        + cc.j2 * (w1 * w2 - y1 * y2)
        + cc.g2 * w1 + cc.h2 * w2
    )
    zero = TaylorJet.constant(0.0, _SOURCE_VARS, degrees)
    summed = _detection_sum(cb, m, n, s_lin, t_lin, u_lin, v_lin, zero, order_cap)
    return summed * source_exponent.exp()


def moment(spec, r1, s1, r2, s2, order_cap=DEFAULT_STATE_ORDER_CAP):
    """Normalized symmetric moment <x1^r1 p1^s1 x2^r2 p2^s2>_sym of the state.

    Orders are per-quadrature derivative counts of the moment generating
    function; (0,0,0,0) is the normalization and returns exactly 1.  The
    common prefactors (1/D, e^{-i1}, signs, factorials) cancel between the
    source-differentiated numerator and the probability denominator, so the
    ratio is taken inside a single jet evaluation.
    """
    orders = (r1, s1, r2, s2)
    for k in orders:
        if not isinstance(k, (int, np.integer)) or k < 0:
            raise ParameterError(f"moment orders must be non-negative integers: {orders}")
    if sum(orders) == 0:
        return 1.0
    if sum(orders) > 2 * order_cap:
        raise ParameterError(f"total moment order {sum(orders)} exceeds the jet cap")
    if probability(spec, order_cap=order_cap) < PROBABILITY_FLOOR:
        raise DegenerateStateError(
            f"P^({spec.m},{spec.n}) underflowed for {spec}; "
            "conditional moments are undefined")
    cb = coefficients_b(spec)
    cc = coefficients_c(spec)
    degrees = dict(zip(_SOURCE_VARS, orders))
    num = _moment_jet(cb, cc, spec.m, spec.n, degrees, order_cap)
    norm = num.coefficient((0, 0, 0, 0))
    value = num.partial(orders) / norm
    if abs(value.imag) > 1e-9 * max(1.0, abs(value.real)):
        raise InternalConsistencyError(
            f"moment {orders} of {spec} has a non-negligible imaginary part: {value}")
    return value.real


def _first_moments(spec, order_cap):
    basis = np.eye(4, dtype=int)
    return np.array([moment(spec, *basis[i], order_cap=order_cap) for i in range(4)])


def tmsc_covariance(r, d):
    """Analytic covariance of the plain TMSC (no beam splitter, no detection).

    diag cosh 2r, cross-covariances +-sinh 2r, mean (d e^r, 0, d e^r, 0):
    the squeezer maps the pre-squeeze mean (d, 0, d, 0) along its stretched
    quadrature.
    """
    ch2, sh2 = math.cosh(2.0 * r), math.sinh(2.0 * r)
    mean_x = d * math.exp(r)
    return QuadCovariance(
        vxA=ch2, vpA=ch2, vxB=ch2, vpB=ch2, vxC=sh2, vpC=-sh2,
        mean=np.array([mean_x, 0.0, mean_x, 0.0]),
    )


def covariance(spec, order_cap=DEFAULT_STATE_ORDER_CAP):
    """Central two-mode covariance and mean of the heralded state."""
    if spec.tau == 1.0:
        if spec.m != spec.n:
            raise DegenerateStateError(
                f"detection of n={spec.n} photons is impossible through an "
                f"identity beam splitter fed with m={spec.m}")
        return tmsc_covariance(spec.r, spec.d)

    mean = _first_moments(spec, order_cap)
    second = np.zeros((4, 4))
    basis = np.eye(4, dtype=int)
    for i in range(4):
        for j in range(i, 4):
            orders = tuple(basis[i] + basis[j])
            second[i, j] = second[j, i] = moment(spec, *orders, order_cap=order_cap)
    sigma = second - np.outer(mean, mean)

    # x-p cross blocks vanish by the p -> -p symmetry of the real-displaced
    # state; anything visibly nonzero means a transcription bug upstream
    for (i, j) in ((0, 1), (0, 3), (1, 2), (2, 3)):
        if abs(sigma[i, j]) > CROSS_TERM_TOL:
            raise InternalConsistencyError(
                f"covariance entry ({i},{j}) = {sigma[i, j]:.3e} should vanish "
                f"by symmetry for {spec}")
    cov = QuadCovariance(
        vxA=sigma[0, 0], vpA=sigma[1, 1], vxB=sigma[2, 2], vpB=sigma[3, 3],
        vxC=sigma[0, 2], vpC=sigma[1, 3], mean=mean,
    )
    spectrum = cov.symplectic_spectrum()
    if np.any(spectrum < 1.0 - 1e-9):
        raise InternalConsistencyError(
            f"unphysical covariance (symplectic spectrum {spectrum}) for {spec}")
    return cov


def covariance_document(spec, order_cap=DEFAULT_STATE_ORDER_CAP):
    """Interchange JSON document: {spec, probability, mean[4], sigma[4][4]}."""
    cov = covariance(spec, order_cap=order_cap)
    return {
        "spec": spec.as_dict(),
        "probability": probability(spec, order_cap=order_cap),
        "mean": [float(v) for v in cov.mean],
        "sigma": [[float(v) for v in row] for row in cov.matrix],
    }


def reduced_coefficient_sets(spec):
    """Coefficient sets with every displacement-borne entry forced to zero.

    Used by the d = 0 reduction check: evaluating through these must agree
    with the engine at d = 0 exactly.
    """
    cb = replace(coefficients_b(spec), b1=0.0, c1=0.0, e1=0.0, f1=0.0, i1=0.0)
    cc = replace(coefficients_c(spec), c2=0.0, f2=0.0, g2=0.0, h2=0.0, k2=0.0)
    return cb, cc
