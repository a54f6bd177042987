"""Special functions and jet (truncated-Taylor) machinery.

Two ingredients feed the closed-form state engine:

* two-variable Hermite polynomials
      H_{m,n}(x, y) = sum_{j=0}^{min(m,n)} (-1)^j m! n! x^{m-j} y^{n-j}
                      / (j! (m-j)! (n-j)!)
  together with a scaled variant that keeps the third parameter `a`
  polynomial (no square roots, hence no 0/0 at boundary transmittance),

* truncated multivariate Taylor polynomials ("jets") used to mechanize the
  parametric derivatives d^r/dw^r of exponential generating functions, so
  that no hand-expanded moment formula ever enters the code.

Everything here is pure and deterministic; complex scalars are supported
throughout because intermediate jet coefficients carry +-i factors even
though all physical outputs are real.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.signal import convolve

from .errors import ParameterError, ProgramError

DEFAULT_ORDER_CAP = 8


def _check_order(k, cap, what):
    if not isinstance(k, (int, np.integer)) or k < 0:
        raise ParameterError(f"{what} must be a non-negative integer, got {k!r}")
    if k > cap:
        raise ParameterError(f"{what} = {k} exceeds the order cap {cap}")


def hermite2(m, n, x, y, order_cap=DEFAULT_ORDER_CAP):
    """Two-variable Hermite polynomial H_{m,n}(x, y), evaluated as its finite sum.

    Accepts real or complex scalars (and anything supporting + and *,
    e.g. TaylorJet).  0**0 inside the sum is treated as 1.
    """
    return hermite2_scaled(m, n, 1.0, x, y, order_cap=order_cap)


def hermite2_scaled(m, n, a, x, y, order_cap=DEFAULT_ORDER_CAP):
    """Scaled two-variable Hermite sum: H with the pairing strength explicit.

        sum_{j=0}^{min(m,n)} (-1)^j m! n! a^j x^{m-j} y^{n-j} / (j!(m-j)!(n-j)!)

    equals d^m/ds^m d^n/dt^n exp(-a s t + x s + y t) at s = t = 0.  For a = 1
    this is hermite2.  Formally it is a^{(m+n)/2} H_{m,n}(x/sqrt(a), y/sqrt(a)),
    but evaluating the polynomial form avoids the square root entirely, which
    keeps a = 0 (zero squeezing, or an identity beam splitter) regular.

    `a` must be a scalar; `x` and `y` may be scalars or jets.
    """
    _check_order(m, order_cap, "m")
    _check_order(n, order_cap, "n")
    total = 0.0
    for j in range(min(m, n) + 1):
        coef = ((-1) ** j * math.factorial(m) * math.factorial(n)
                / (math.factorial(j) * math.factorial(m - j) * math.factorial(n - j)))
        term = coef * (a ** j)
        # explicit repeated products so jet operands stay inside the
        # truncated algebra (no __pow__ requirement on x, y)
        for _ in range(m - j):
            term = term * x
        for _ in range(n - j):
            term = term * y
        total = total + term
    return total


def hermite2_derivative(m, n, k, l, x, y, order_cap=DEFAULT_ORDER_CAP):
    """d^k/dx^k d^l/dy^l H_{m,n}(x, y) via the closed identity.

    Equals m! n! / ((m-k)! (n-l)!) * H_{m-k, n-l}(x, y); differentiating past
    the polynomial degree returns 0 rather than raising.
    """
    _check_order(m, order_cap, "m")
    _check_order(n, order_cap, "n")
    _check_order(k, order_cap, "k")
    _check_order(l, order_cap, "l")
    if k > m or l > n:
        return 0.0
    scale = math.factorial(m) // math.factorial(m - k) \
        * (math.factorial(n) // math.factorial(n - l))
    return scale * hermite2(m - k, n - l, x, y, order_cap=order_cap)


def log_factorial_ratio(numerators, denominators):
    """prod(n_i!) / prod(d_j!) as a positive float, log-space stabilized.

    Orders <= 20 are computed with exact integer arithmetic, so ratios that
    are integers come out exactly; larger orders fall back to lgamma sums.
    """
    nums = [int(k) for k in numerators]
    dens = [int(k) for k in denominators]
    if any(k < 0 for k in nums + dens):
        raise ParameterError("factorial orders must be non-negative")
    if max(nums + dens, default=0) <= 20:
        ratio = Fraction(1)
        for k in nums:
            ratio *= math.factorial(k)
        for k in dens:
            ratio /= math.factorial(k)
        return float(ratio)
    log_ratio = sum(math.lgamma(k + 1) for k in nums) \
        - sum(math.lgamma(k + 1) for k in dens)
    return math.exp(log_ratio)


# --------------------------------------------------------------------------
# truncated-Taylor jets
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TaylorJet:
    """Truncated Taylor polynomial in named formal variables.

    Coefficients live in a dense complex ndarray whose axis i runs over the
    powers 0..max_degree[i] of variables[i].  All arithmetic is exact up to
    the retained degree: products are truncated convolutions, exp() uses the
    fact that the zero-constant part is nilpotent in the quotient algebra.
    """

    variables: tuple
    arr: np.ndarray = field(repr=False)

    # -- constructors ------------------------------------------------------

    @classmethod
    def constant(cls, value, variables, degrees):
        variables = tuple(variables)
        shape = tuple(int(degrees[v]) + 1 for v in variables)
        arr = np.zeros(shape, dtype=complex)
        arr[(0,) * len(shape)] = value
        return cls(variables, arr)

    @classmethod
    def variable(cls, name, variables, degrees):
        jet = cls.constant(0.0, variables, degrees)
        idx = jet.variables.index(name)
        if jet.arr.shape[idx] > 1:
            key = [0] * jet.arr.ndim
            key[idx] = 1
            jet.arr[tuple(key)] = 1.0
        # a variable truncated at degree 0 is identically 0 in the quotient
        # algebra: any occurrence could never influence retained coefficients
        return jet

    # -- views matching the declared type fields ---------------------------

    @property
    def max_degree(self):
        return tuple(s - 1 for s in self.arr.shape)

    @property
    def coefficients(self):
        """Sparse view: multi-index -> coefficient, nonzero entries only."""
        out = {}
        for idx in zip(*np.nonzero(self.arr)):
            out[tuple(int(i) for i in idx)] = complex(self.arr[idx])
        return out

    # -- algebra -----------------------------------------------------------

    def _like(self, arr):
        return TaylorJet(self.variables, arr)

    def __add__(self, other):
        if isinstance(other, TaylorJet):
            self._check_compatible(other)
            return self._like(self.arr + other.arr)
        arr = self.arr.copy()
        arr[(0,) * arr.ndim] += other
        return self._like(arr)

    __radd__ = __add__

    def __neg__(self):
        return self._like(-self.arr)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, TaylorJet):
            return self._like(self.arr * other)
        self._check_compatible(other)
        full = convolve(self.arr, other.arr, method="direct")
        window = tuple(slice(0, s) for s in self.arr.shape)
        return self._like(full[window])

    __rmul__ = __mul__

    def __pow__(self, k):
        if not isinstance(k, (int, np.integer)) or k < 0:
            raise ParameterError("jet powers must be non-negative integers")
        out = TaylorJet.constant(
            1.0, self.variables, dict(zip(self.variables, self.max_degree)))
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base if k > 1 else base
            k >>= 1
        return out

    def exp(self):
        """exp of the jet: e^{c0} * sum x^k / k! with x the zero-constant part.

        x is nilpotent beyond the total retained degree, so the Horner-style
        product below is exact (no series truncation error).
        """
        zero = (0,) * self.arr.ndim
        c0 = self.arr[zero]
        x = self._like(self.arr.copy())
        x.arr[zero] = 0.0
        total_degree = sum(self.max_degree)
        acc = TaylorJet.constant(
            1.0, self.variables, dict(zip(self.variables, self.max_degree)))
        for k in range(total_degree, 0, -1):
            acc = acc * x * (1.0 / k) + 1.0
        return acc * complex(np.exp(c0))

    # -- extraction --------------------------------------------------------

    def coefficient(self, multi_index):
        return complex(self.arr[tuple(multi_index)])

    def partial(self, multi_index):
        """Mixed partial derivative at 0: coefficient times prod(r_i!)."""
        scale = 1.0
        for r in multi_index:
            scale *= math.factorial(r)
        return self.coefficient(multi_index) * scale

    def _check_compatible(self, other):
        if self.variables != other.variables or self.arr.shape != other.arr.shape:
            raise ProgramError(
                "jet operands disagree: "
                f"{self.variables}/{self.arr.shape} vs {other.variables}/{other.arr.shape}")


# --------------------------------------------------------------------------
# jet programs: a tiny closed expression language evaluated into TaylorJets
# --------------------------------------------------------------------------

_PRIMITIVES = frozenset({"var", "const", "param", "add", "mul", "exp", "pow"})


@dataclass(frozen=True)
class JetProgram:
    """Expression tree over formal variables, named scalars, and constants.

    Supported primitives: var, const, param, add, mul, exp, pow (non-negative
    integer exponent).  Anything else fails construction, per the closed-set
    contract.
    """

    op: str
    args: tuple = ()
    name: str = ""
    value: complex = 0j
    exponent: int = 0

    def __post_init__(self):
        if self.op not in _PRIMITIVES:
            raise ProgramError(f"unsupported jet primitive: {self.op!r}")
        if self.op == "pow" and (self.exponent < 0 or int(self.exponent) != self.exponent):
            raise ProgramError("pow exponent must be a non-negative integer")

    # operator sugar so programs read like formulas
    def __add__(self, other):
        return JetProgram("add", (self, _as_program(other)))

    __radd__ = __add__

    def __mul__(self, other):
        return JetProgram("mul", (self, _as_program(other)))

    __rmul__ = __mul__

    def __sub__(self, other):
        return self + (_as_program(other) * JetProgram("const", value=-1.0))

    def __rsub__(self, other):
        return _as_program(other) - self

    def __pow__(self, k):
        return JetProgram("pow", (self,), exponent=int(k))

    def exp(self):
        return JetProgram("exp", (self,))


def _as_program(obj):
    if isinstance(obj, JetProgram):
        return obj
    return JetProgram("const", value=complex(obj))


def jet_var(name):
    return JetProgram("var", name=name)


def jet_param(name):
    return JetProgram("param", name=name)


def jet_const(value):
    return _as_program(value)


def jet_eval(expression, point, degrees):
    """Evaluate a JetProgram into a TaylorJet.

    `point` assigns scalars to every param name; `degrees` maps each formal
    variable to its truncation degree (and fixes the variable ordering).
    The resulting jet satisfies partial(r) = the mixed partial derivative of
    the expression w.r.t. its formal variables at 0.
    """
    if not isinstance(expression, JetProgram):
        raise ProgramError(f"expected a JetProgram, got {type(expression).__name__}")
    variables = tuple(degrees)

    def ev(node):
        if node.op == "const":
            return TaylorJet.constant(node.value, variables, degrees)
        if node.op == "param":
            if node.name not in point:
                raise ProgramError(f"no value supplied for parameter {node.name!r}")
            return TaylorJet.constant(point[node.name], variables, degrees)
        if node.op == "var":
            if node.name not in degrees:
                raise ProgramError(f"variable {node.name!r} missing from degrees")
            return TaylorJet.variable(node.name, variables, degrees)
        if node.op == "add":
            left, right = (ev(a) for a in node.args)
            return left + right
        if node.op == "mul":
            left, right = (ev(a) for a in node.args)
            return left * right
        if node.op == "exp":
            return ev(node.args[0]).exp()
        if node.op == "pow":
            return ev(node.args[0]) ** node.exponent
        raise ProgramError(f"unsupported jet primitive: {node.op!r}")  # pragma: no cover

    return ev(expression)
