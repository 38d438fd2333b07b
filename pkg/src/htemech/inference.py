"""From detected heterogeneity to statements about mechanisms.

Three tools live here:

* :func:`classify_case` maps (exclusion status, outcome type, HTE found) to
  one of four interpretive cases.
* :func:`bayes_point` and :func:`bayes_density` give the posterior probability
  that the focal mechanism is active when the exclusion assumptions may fail
  and the violation is modelled as a normal shift.
* :func:`monotone_hte` and :func:`check_sign_conditions` evaluate the
  cross-partial HTE of a thresholded outcome ``1[g(x, z) + e > c]``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import special, stats

from .numerics import (Grid1D, NumericalDomainError, central_cross_partial, central_derivative,
                       simpson_integrate, std_normal_pdf)


class InferenceError(ValueError):
    pass


class ExclusionRoutingError(InferenceError):
    """Raised when the case table is asked to interpret results under failed exclusion."""


class UnsupportedPriorError(InferenceError):
    pass


# ---------------------------------------------------------------------------
# case table
# ---------------------------------------------------------------------------

EXCLUSION_STATES = ("verified", "asserted", "failed")

_CASE2_EXPLANATIONS = (
    "(a) the covariate does not moderate the focal mechanism's effect, whether or not the mechanism is active",
    "(b) the mechanism is active but its indirect effect is the same for every unit (nothing moderates it)",
    "(c) the mechanism is inert and has no effect on any unit",
)


@dataclass(frozen=True)
class CaseVerdict:
    case: int
    outcome_type: str  # "structural" or "transformed"
    hte_detected: bool
    verdict: str
    explanations: tuple = ()

    def render(self) -> str:
        lines = [f"Case {self.case}: {self.verdict}"]
        lines.extend(f"  {e}" for e in self.explanations)
        return "\n".join(lines)

    def to_dict(self):
        return {"case": self.case, "outcome_type": self.outcome_type, "hte_detected": self.hte_detected,
                "verdict": self.verdict, "explanations": list(self.explanations)}


def classify_case(exclusion_ok: str, transformed: bool, hte_detected: bool) -> CaseVerdict:
    """Interpretive case for an HTE test result.

    Parameters
    ----------
    exclusion_ok : {"verified", "asserted", "failed"}
        Status of the two exclusion assumptions for this covariate.  A failed
        status cannot be read off the case table; use the Bayesian analysis in
        :func:`bayes_point` / :func:`bayes_density` instead.
    transformed : bool
        Whether the outcome is a non-linear transform of the structural one.
    hte_detected : bool
    """
    if exclusion_ok not in EXCLUSION_STATES:
        raise InferenceError(f"exclusion status must be one of {EXCLUSION_STATES}, got {exclusion_ok!r}")
    if exclusion_ok == "failed":
        raise ExclusionRoutingError(
            "exclusion assumptions failed: the case table does not apply; quantify the violation and use "
            "the Bayesian pathway (bayes_point / bayes_density, CLI 'bayes') instead")
    transformed, hte_detected = bool(transformed), bool(hte_detected)
    if not transformed and hte_detected:
        return CaseVerdict(1, "structural", True, "mechanism active for at least one unit")
    if not transformed:
        return CaseVerdict(2, "structural", False, "no information about activation", _CASE2_EXPLANATIONS)
    if hte_detected:
        return CaseVerdict(3, "transformed", True, "covariate is relevant; no information about activation")
    return CaseVerdict(4, "transformed", False, "no information",
                       ("without further assumptions the test says nothing about how the covariate relates "
                        "to the transformed outcome, nor about activation",))


# ---------------------------------------------------------------------------
# Bayesian magnitude analysis
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BayesConfig:
    """Inputs for the activation posterior.

    The observed difference in CATEs ``hte`` is modelled as the focal
    mechanism's heterogeneity ``N(mu1, sigma1)`` plus a violation
    ``N(mu2, sigma2)`` when the mechanism is active, and the violation alone
    when it is inert.  Supply exactly one of ``prior_p`` (point prior) or
    ``prior_beta`` ``(a, b)``.

    ``convolution=True`` scales the active likelihood by
    ``sqrt(sigma1**2 + sigma2**2)`` instead of ``sigma1 + sigma2``.
    """

    hte: float
    mu1: float
    mu2: float
    sigma1: float = 1.0
    sigma2: float = 1.0
    prior_p: float | None = None
    prior_beta: tuple | None = None
    convolution: bool = False

    def __post_init__(self):
        for name in ("hte", "mu1", "mu2", "sigma1", "sigma2"):
            if not math.isfinite(getattr(self, name)):
                raise InferenceError(f"{name} must be finite")
        if self.sigma2 <= 0:
            raise InferenceError("sigma2 must be positive")
        if self.sigma1 < 0:
            raise InferenceError("sigma1 must be non-negative")
        if (self.prior_p is None) == (self.prior_beta is None):
            raise InferenceError("give exactly one of prior_p or prior_beta")
        if self.prior_p is not None and not 0.0 <= self.prior_p <= 1.0:
            raise InferenceError(f"prior p must lie in [0, 1], got {self.prior_p}")
        if self.prior_beta is not None:
            a, b = self.prior_beta
            if not (a >= 1 and b >= 1):
                raise UnsupportedPriorError(f"Beta prior needs a, b >= 1, got ({a}, {b})")
            object.__setattr__(self, "prior_beta", (float(a), float(b)))
        if abs(self.mu1) <= abs(self.mu2):
            warnings.warn("|mu1| <= |mu2|: the focal mechanism is not the larger source of heterogeneity",
                          stacklevel=2)

    @property
    def active_scale(self) -> float:
        if self.convolution:
            return math.hypot(self.sigma1, self.sigma2)
        return self.sigma1 + self.sigma2

    def log_likelihoods(self) -> tuple[float, float]:
        """``(log L_a, log L_i)`` with ``L = Phi(-2 |standardised distance|)``."""
        za = (self.hte - self.mu1 - self.mu2) / self.active_scale
        zi = (self.hte - self.mu2) / self.sigma2
        return float(special.log_ndtr(-2.0 * abs(za))), float(special.log_ndtr(-2.0 * abs(zi)))

    def likelihoods(self) -> tuple[float, float]:
        la, li = self.log_likelihoods()
        return math.exp(la), math.exp(li)


def bayes_point(config: BayesConfig) -> float:
    """Posterior probability of activation under a point prior ``p``.

    ``p L_a / (p L_a + (1 - p) L_i)``, evaluated with the likelihoods rescaled
    by their maximum so tiny tail probabilities do not underflow.
    """
    if config.prior_p is None:
        raise InferenceError("bayes_point needs a point prior (prior_p)")
    p = config.prior_p
    if p == 0.0 or p == 1.0:
        return p
    la, li = config.log_likelihoods()
    top = max(la, li)
    ra, ri = math.exp(la - top), math.exp(li - top)
    return p * ra / (p * ra + (1 - p) * ri)


@dataclass(frozen=True)
class BayesPosterior:
    grid: np.ndarray
    prior_density: np.ndarray
    posterior_density: np.ndarray
    prior_mean: float
    posterior_mean: float
    normalizer: float

    def rows(self):
        return zip(self.grid.tolist(), self.prior_density.tolist(), self.posterior_density.tolist())


def bayes_density(config: BayesConfig, grid: Grid1D = Grid1D()) -> BayesPosterior:
    """Posterior density of the activation probability under a Beta prior.

    The density is ``Beta(p; a, b) * [p L_a + (1 - p) L_i]`` normalised by a
    Simpson integral over ``grid``.  ``normalizer`` is that integral with the
    likelihoods scaled so the larger equals one.  When the two likelihoods
    coincide the posterior is returned equal to the prior.
    """
    if config.prior_beta is None:
        raise InferenceError("bayes_density needs a Beta prior (prior_beta)")
    if grid.lo != 0.0 or grid.hi != 1.0:
        raise InferenceError("the grid must span [0, 1]")
    a, b = config.prior_beta
    p = grid.points
    prior = stats.beta.pdf(p, a, b)
    prior_mean = a / (a + b)
    la, li = config.log_likelihoods()
    if la == li:
        post = prior.copy()
        norm = 1.0
    else:
        top = max(la, li)
        ra, ri = math.exp(la - top), math.exp(li - top)
        unnorm = prior * (ri + p * (ra - ri))
        norm = simpson_integrate(lambda _: unnorm, grid)
        if not norm > 0:
            raise InferenceError("posterior normalising constant is zero")
        post = unnorm / norm
    post_mean = simpson_integrate(lambda x: x * post, grid)
    return BayesPosterior(p, prior, post, prior_mean, post_mean, norm)


# ---------------------------------------------------------------------------
# monotone cross-partials for a thresholded outcome
# ---------------------------------------------------------------------------

class NormalNoise:
    """``N(mean, sd^2)`` error with density derivative ``-(t - m) / s^2 * f(t)``."""

    family = "normal"

    def __init__(self, mean: float = 0.0, sd: float = 1.0):
        if not sd > 0:
            raise InferenceError("sd must be positive")
        self.mean, self.sd = float(mean), float(sd)

    def pdf(self, t: float) -> float:
        u = (t - self.mean) / self.sd
        return float(std_normal_pdf(u)) / self.sd

    def dpdf(self, t: float) -> float:
        u = (t - self.mean) / self.sd
        return -u * float(std_normal_pdf(u)) / self.sd ** 2

    def __repr__(self):
        return f"NormalNoise({self.mean}, {self.sd})"


class UniformNoise:
    """``U[lo, hi]`` error: flat density, zero derivative on the support."""

    family = "uniform"

    def __init__(self, lo: float = -0.5, hi: float = 0.5):
        if not lo < hi:
            raise InferenceError("uniform noise needs lo < hi")
        self.lo, self.hi = float(lo), float(hi)

    def _check(self, t):
        if not self.lo <= t <= self.hi:
            raise NumericalDomainError(f"{t} is outside the uniform support [{self.lo}, {self.hi}]")

    def pdf(self, t: float) -> float:
        self._check(t)
        return 1.0 / (self.hi - self.lo)

    def dpdf(self, t: float) -> float:
        self._check(t)
        return 0.0

    def __repr__(self):
        return f"UniformNoise({self.lo}, {self.hi})"


@dataclass
class MonotoneSpec:
    """Latent ``Y = g(x, z) + e`` with outcome ``1[Y > cut]``.

    ``beta(x, z)`` is the moderation cross-partial; when omitted it is
    finite-differenced from ``g``.  ``g_x`` / ``g_z`` default to central
    differences.
    """

    g: Callable[[float, float], float]
    noise: object = None
    cut: float = 0.0
    beta: Callable[[float, float], float] | None = None
    g_x: Callable[[float, float], float] | None = None
    g_z: Callable[[float, float], float] | None = None
    step: float = 1e-4

    def __post_init__(self):
        if self.noise is None:
            self.noise = NormalNoise()

    def partials(self, x, z):
        gx = self.g_x(x, z) if self.g_x else central_derivative(lambda u: self.g(u, z), x, self.step)
        gz = self.g_z(x, z) if self.g_z else central_derivative(lambda u: self.g(x, u), z, self.step)
        return gx, gz

    def moderation(self, x, z):
        if self.beta is not None:
            return float(self.beta(x, z))
        return central_cross_partial(self.g, x, z, self.step)


def _first_term(spec: MonotoneSpec, x, z):
    t = spec.cut - spec.g(x, z)
    gx, gz = spec.partials(x, z)
    return spec.noise.dpdf(t) * gx * gz, spec.noise.pdf(t)


def monotone_hte(spec: MonotoneSpec, variant: str, x: float, z: float) -> float:
    """Cross-partial of ``P(Y > cut | x, z)`` in ``x`` and ``z``.

    ``moderated``:   ``-f'(c - g) g_x g_z + f(c - g) beta``
    ``unmoderated``: ``-f'(c - g) g_x g_z``
    """
    if variant not in ("moderated", "unmoderated"):
        raise InferenceError(f"variant must be 'moderated' or 'unmoderated', got {variant!r}")
    fprime_term, f = _first_term(spec, x, z)
    out = -fprime_term
    if variant == "moderated":
        out += f * spec.moderation(x, z)
    return out + 0.0  # normalise -0.0


@dataclass(frozen=True)
class SignReport:
    x: float
    z: float
    fprime_term: float  # f'(c - g) g_x g_z
    ratio: float  # fprime_term / f(c - g)
    beta: float
    condition_2a: bool
    condition_2b: bool
    corollary_hint: str

    def to_dict(self):
        return dict(self.__dict__)


def check_sign_conditions(spec: MonotoneSpec, x: float, z: float) -> SignReport:
    """Evaluate the two sign-reversal conditions at ``(x, z)``.

    (2a) ``f' g_x g_z < 0`` and ``beta < f' g_x g_z / f``;
    (2b) ``f' g_x g_z > 0`` and ``beta > f' g_x g_z / f``.
    The hint reports the region the point falls in by the sign of
    ``f'(c - g)``: negative means the small-(x, z) side, positive the large side.
    """
    fprime_term, f = _first_term(spec, x, z)
    beta = spec.moderation(x, z)
    ratio = fprime_term / f if f > 0 else float("nan")
    c2a = bool(fprime_term < 0 and beta < ratio)
    c2b = bool(fprime_term > 0 and beta > ratio)
    slope = spec.noise.dpdf(spec.cut - spec.g(x, z))
    hint = "small-xz" if slope < 0 else ("large-xz" if slope > 0 else "none")
    return SignReport(float(x), float(z), fprime_term, ratio, beta, c2a, c2b, hint)


def noise_from_dict(d: dict):
    fam = d.get("family", "normal")
    if fam == "normal":
        return NormalNoise(d.get("mean", 0.0), d.get("sd", 1.0))
    if fam == "uniform":
        return UniformNoise(d.get("lo", -0.5), d.get("hi", 0.5))
    raise InferenceError(f"unknown noise family {fam!r}")
