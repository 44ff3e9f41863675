"""
Cubic-drift return dynamics with a symmetry-breaking phase.

The excess return ``r`` of an arbitrage strategy follows

    dr/dt = rho - (lambda - lambda_c) r - (lambda_c / r_c**2) r**3 + noise

which is the polynomial drift ``-l1 r - l3 r**3`` with ``l1 = lambda - lambda_c``
and ``l3 = lambda_c / r_c**2``. Note that ``l1 > 0`` only in the no-arbitrage
phase; for ``lambda < lambda_c`` the linear coefficient changes sign and two
nonzero equilibria ``+-r_v`` appear, ``r_v = sqrt(1 - lambda/lambda_c) * r_c``.

Time is measured in periods. The discrete map used for data is the one-step
Euler form ``r[i+1] = (1 - (lambda - lambda_c)) r[i] - (lambda_c/r_c**2) r[i]**3 + eps``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy.signal import lfilter

from .errors import (
    DomainError,
    ParameterDomainError,
    PhaseError,
    SimulationOverflowError,
    StationarityError,
)
from .series import ReturnSeries

ROOT_TOL = 1e-12
# grid resolution and half-width of the fixed-point scan, in units of r_c
SCAN_STEP = 1e-4
SCAN_HALF_WIDTH = 10.0
DIVERGENCE_LIMIT = 1e6


class Phase(enum.Enum):
    LongLivingArbitrage = "LongLivingArbitrage"
    ShortLivingArbitrage = "ShortLivingArbitrage"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class SsbParams:
    """Parameter bundle of the dynamics.

    lam, lam_c : speed of adjustment and its critical value (1/period), > 0
    r_c : cutoff return scale, > 0
    rho : weak field (return per period), any real
    """

    lam: float
    lam_c: float
    r_c: float
    rho: float = 0.0

    def __post_init__(self):
        for name in ("lam", "lam_c", "r_c"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float, np.floating, np.integer))
                    and math.isfinite(value) and value > 0):
                raise ParameterDomainError(f"{name} must be a finite positive number, got {value!r}")
        if not math.isfinite(self.rho):
            raise ParameterDomainError(f"rho must be finite, got {self.rho!r}")
        for name in ("lam", "lam_c", "r_c", "rho"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @property
    def linear_coef(self) -> float:
        """``lambda - lambda_c`` (the l1 coefficient)."""
        return self.lam - self.lam_c

    @property
    def cubic_coef(self) -> float:
        """``lambda_c / r_c**2`` (the l3 coefficient)."""
        return self.lam_c / (self.r_c * self.r_c)

    @property
    def phase(self) -> Phase:
        return classify_phase(self)


@dataclass(frozen=True)
class PathSpec:
    r0: float
    n_steps: int
    noise_std: float = 0.0
    seed: Optional[int] = None

    def __post_init__(self):
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ParameterDomainError(f"n_steps must be a positive integer, got {self.n_steps!r}")
        if not (math.isfinite(self.noise_std) and self.noise_std >= 0):
            raise ParameterDomainError(f"noise_std must be >= 0, got {self.noise_std!r}")
        if not math.isfinite(self.r0):
            raise ParameterDomainError(f"r0 must be finite, got {self.r0!r}")
        object.__setattr__(self, "n_steps", int(self.n_steps))


class PsiSolutions(NamedTuple):
    """Transition-field solutions around each branch.

    ``plus`` expands around ``+r_v``, ``minus`` around ``-r_v``; each holds
    ``(trivial, nontrivial)``.
    """

    plus: tuple[float, float]
    minus: tuple[float, float]


def classify_phase(params: SsbParams) -> Phase:
    # lambda == lambda_c has the single equilibrium r = 0
    if params.lam < params.lam_c:
        return Phase.LongLivingArbitrage
    return Phase.ShortLivingArbitrage


def spontaneous_return(params: SsbParams) -> Optional[float]:
    """Positive broken-phase equilibrium ``r_v``, or ``None`` if lambda >= lambda_c."""
    if params.lam >= params.lam_c:
        return None
    return math.sqrt(1.0 - params.lam / params.lam_c) * params.r_c


def drift(params: SsbParams, r):
    """Deterministic right-hand side ``rho - (lam - lam_c) r - (lam_c/r_c^2) r^3``.

    Accepts scalars or arrays. With ``rho == 0`` the result is odd in ``r``
    bit-for-bit.
    """
    r = np.asarray(r, dtype=np.float64) if not isinstance(r, float) else r
    out = -params.linear_coef * r - params.cubic_coef * (r * r * r)
    if params.rho != 0.0:
        out = params.rho + out
    return float(out) if np.ndim(out) == 0 else out


def _bisect(f, lo: float, hi: float, flo: float, tol: float) -> float:
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def fixed_points(params: SsbParams) -> list[float]:
    """Sorted real equilibria of the deterministic drift.

    For ``rho == 0`` the closed form ``{0}`` or ``{-r_v, 0, +r_v}`` is used.
    Otherwise the drift is scanned for sign changes on a grid of spacing
    ``1e-4 r_c`` and each bracket is refined by bisection to ``1e-12``.
    """
    if params.rho == 0.0:
        r_v = spontaneous_return(params)
        return [0.0] if r_v is None else [-r_v, 0.0, r_v]

    # roots of a3 r^3 + a1 r - rho lie within the Cauchy bound
    a1, a3 = params.linear_coef, params.cubic_coef
    bound = 1.0 + max(abs(a1 / a3), abs(params.rho / a3))
    half_width = max(SCAN_HALF_WIDTH * params.r_c, bound)
    step = SCAN_STEP * params.r_c
    n = int(math.ceil(2 * half_width / step))
    grid = np.linspace(-half_width, half_width, n + 1)
    values = drift(params, grid)
    f = lambda x: drift(params, x)  # noqa: E731

    roots = []
    exact = np.flatnonzero(values == 0.0)
    roots.extend(float(grid[i]) for i in exact)
    signs = np.sign(values)
    brackets = np.flatnonzero(signs[:-1] * signs[1:] < 0)
    for i in brackets:
        roots.append(_bisect(f, float(grid[i]), float(grid[i + 1]), float(values[i]), ROOT_TOL))
    return sorted(roots)


def _validate_elapsed(elapsed: float) -> float:
    elapsed = float(elapsed)
    if not math.isfinite(elapsed) or elapsed < 0:
        raise DomainError(f"elapsed time must be finite and >= 0, got {elapsed!r}")
    return elapsed


def exact_solution(params: SsbParams, r_initial: float, elapsed: float) -> float:
    """Noise-free closed-form evolution of the return over ``elapsed`` periods.

    Uses the real-valued form of the Bernoulli solution,

        r(t)^2 = r0^2 / (e^{2 a t} + b r0^2 (e^{2 a t} - 1) / a),
        a = lam - lam_c, b = lam_c / r_c^2,

    which equals ``r_v r0 e^{-a t} / sqrt(r_v^2 - r0^2 (1 - e^{-2 a t}))`` in the
    broken phase and stays finite across ``lam == lam_c`` and in the
    symmetric phase (where ``r_v`` would be imaginary). The sign follows
    ``r_initial``.
    """
    if params.rho != 0.0:
        raise DomainError("the closed form holds only without a weak field (rho == 0)")
    elapsed = _validate_elapsed(elapsed)
    r0 = float(r_initial)
    if not math.isfinite(r0):
        raise DomainError(f"r_initial must be finite, got {r_initial!r}")
    if r0 == 0.0 or elapsed == 0.0:
        return r0
    a, b = params.linear_coef, params.cubic_coef
    x = 2.0 * a * elapsed
    if abs(x) > 600.0 or abs(r0) < 1e-140:
        return math.copysign(_exact_log_space(a, b, abs(r0), x, elapsed), r0)
    growth = math.exp(x)
    # (e^{2at} - 1)/a without cancellation; its a -> 0 limit is 2t
    ratio = math.expm1(x) / a if a != 0.0 else 2.0 * elapsed
    denom = growth + b * r0 * r0 * ratio
    if not denom > 0.0:
        raise DomainError(
            f"closed form breaks down: non-positive radicand {denom!r} "
            f"for r_initial={r0!r}, elapsed={elapsed!r}")
    return math.copysign(abs(r0) / math.sqrt(denom), r0)


def _exact_log_space(a: float, b: float, r0: float, x: float, elapsed: float) -> float:
    """``|r(t)|`` from ``r^-2 = e^x / r0^2 + b (e^x - 1) / a`` summed in log space.

    Used where ``e^x`` or ``r0^2`` would over- or underflow.
    """
    if a == 0.0:
        log_ratio = math.log(2.0 * elapsed)
    elif x > 0.0:
        log_ratio = x + math.log(-math.expm1(-x)) - math.log(a)
    else:
        log_ratio = math.log(math.expm1(x) / a)
    log_inv_sq = np.logaddexp(x - 2.0 * math.log(r0), math.log(b) + log_ratio)
    return math.exp(-0.5 * float(log_inv_sq))


def psi_solutions(params: SsbParams, elapsed: float) -> PsiSolutions:
    """Transition field ``psi`` for ``r = +-r_v + psi`` in the broken phase.

    The nontrivial member is ``-+2 r_v / (1 - exp(-(lam_c - lam) t))``, which
    tends to ``-+2 r_v`` and so carries ``+r_v`` to ``-r_v`` (and vice versa).
    """
    r_v = spontaneous_return(params)
    if r_v is None:
        raise PhaseError("psi field exists only in the long-living phase (lambda < lambda_c)")
    elapsed = float(elapsed)
    if not (math.isfinite(elapsed) or elapsed == math.inf) or elapsed <= 0:
        raise DomainError(f"elapsed must be > 0, got {elapsed!r}")
    decay = -math.expm1(-(params.lam_c - params.lam) * elapsed)
    nontrivial = 2.0 * r_v / decay
    return PsiSolutions(plus=(0.0, -nontrivial), minus=(0.0, nontrivial))


def discrete_step(params: SsbParams, r_i: float, eps: float = 0.0) -> float:
    """One step of the discrete map, with ``+rho`` added when nonzero."""
    r_i = float(r_i)
    out = (1.0 - params.linear_coef) * r_i - params.cubic_coef * (r_i * r_i * r_i)
    if params.rho != 0.0:
        out += params.rho
    return out + eps


def simulate_path(params: SsbParams, spec: PathSpec) -> ReturnSeries:
    """Iterate the discrete map from ``spec.r0`` for ``spec.n_steps`` steps.

    Returns ``n_steps + 1`` values (periods ``0..n_steps``) including ``r0``.
    Shocks are i.i.d. Gaussian with std ``spec.noise_std`` drawn from
    ``numpy.random.default_rng(spec.seed)``.
    """
    n = spec.n_steps
    if spec.noise_std > 0:
        eps = np.random.default_rng(spec.seed).normal(0.0, spec.noise_std, n)
    else:
        eps = np.zeros(n)
    limit = DIVERGENCE_LIMIT * params.r_c
    out = np.empty(n + 1)
    r = float(spec.r0)
    out[0] = r
    for i in range(n):
        r = discrete_step(params, r, float(eps[i]))
        if not abs(r) <= limit:
            raise SimulationOverflowError(
                f"path diverged at step {i + 1}: |r| = {abs(r):.3g} exceeds {limit:.3g}")
        out[i + 1] = r
    return ReturnSeries(np.arange(n + 1, dtype=np.int64), out)


def gen_ar1(phi: float, sigma: float, n: int, seed=None) -> ReturnSeries:
    """Stationary AR(1) sample ``r[i+1] = phi r[i] + eps``, eps ~ N(0, sigma^2).

    The first value is drawn from the stationary law N(0, sigma^2/(1-phi^2)).
    """
    if not abs(phi) < 1:
        raise StationarityError(f"|phi| must be < 1 for a stationary AR(1), got {phi!r}")
    if sigma < 0:
        raise ParameterDomainError(f"sigma must be >= 0, got {sigma!r}")
    if n < 2:
        raise ParameterDomainError(f"n must be >= 2, got {n!r}")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(n)
    r0 = z[0] * sigma / math.sqrt(1.0 - phi * phi)
    values = np.empty(n)
    values[0] = r0
    values[1:] = lfilter([1.0], [1.0, -phi], sigma * z[1:], zi=[phi * r0])[0]
    return ReturnSeries(np.arange(n, dtype=np.int64), values)
