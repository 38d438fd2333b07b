"""Mediation decompositions, conditional effects and exclusion/membership checks.

Conventions
-----------
For treated value ``z`` and control value ``z'`` the decomposition uses the
sequential switching order: the direct effect moves treatment with every
mediator held at ``M_j(z)``; the indirect effect of mechanism ``j`` switches
``M_j`` from ``z`` to ``z'`` with earlier mediators already at ``z'`` and later
ones still at ``z``.  The pieces telescope, so ``te = de + sum(ie)``.

Conditional effects fix one covariate and average over the others, either by
Monte Carlo or by tensor-product quadrature ("exact" mode).  In exact mode one
normal covariate entering the structural outcome linearly is integrated in
closed form, which keeps threshold and Likert transforms exact.

Monte Carlo evaluations at different grid points reuse the same draws of the
non-fixed covariates (common random numbers), so contrasts between grid points
are paired and their standard errors come from per-draw differences.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .dgp import DGPError, StructuralDGP, TransformSpec, UnitRecord
from .numerics import Grid1D, norm_cdf, simpson_integrate, std_normal_cdf, std_normal_pdf

OUTCOME_TAGS = ("y", "y_t")
DEFAULT_N_NODES = 64
EXACT_TOLERANCE = 1e-6
MC_TOLERANCE = 1e-3


class EffectsError(ValueError):
    pass


# ---------------------------------------------------------------------------
# unit level
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EffectDecomposition:
    te: float
    de: float
    ie: tuple

    @property
    def residual(self) -> float:
        return self.te - self.de - sum(self.ie)


def _treatments(dgp, z, z_prime):
    return (dgp.z_treated if z is None else z), (dgp.z_control if z_prime is None else z_prime)


def _check_tag(outcome):
    if outcome not in OUTCOME_TAGS:
        raise EffectsError(f"outcome tag must be one of {OUTCOME_TAGS}, got {outcome!r}")


def switching_sequence(dgp: StructuralDGP, covs, z, z_prime) -> list:
    """Structural outcomes ``Y(s_0), ..., Y(s_{J+1})`` along the switching order.

    ``s_0`` is fully treated, ``s_1`` moves treatment to ``z'`` with all
    mediators at ``z``, and ``s_{k+1}`` additionally sets mediators ``1..k``
    to ``z'``.
    """
    med_z = dgp.mediator_values(covs, z)
    med_zp = dgp.mediator_values(covs, z_prime)
    names = dgp.mediator_names
    seq = [dgp.structural(covs, z, med_z)]
    for k in range(len(names) + 1):
        meds = {n: (med_zp[n] if i < k else med_z[n]) for i, n in enumerate(names)}
        seq.append(dgp.structural(covs, z_prime, meds))
    return seq


def _components(values):
    """(de, ie_1..ie_J, te) from the switching-sequence values."""
    de = values[0] - values[1]
    ie = [values[j] - values[j + 1] for j in range(1, len(values) - 1)]
    te = values[0] - values[-1]
    return de, ie, te


def unit_decomposition(dgp: StructuralDGP, unit, z=None, z_prime=None, outcome: str = "y") -> EffectDecomposition:
    """Unit-level total, direct and per-mechanism indirect effects."""
    _check_tag(outcome)
    if dgp.n_mechanisms < 1:
        raise EffectsError("decomposition needs at least one mediator")
    z, z_prime = _treatments(dgp, z, z_prime)
    covs = unit.covariates if isinstance(unit, UnitRecord) else unit
    seq = switching_sequence(dgp, covs, z, z_prime)
    if outcome == "y_t":
        seq = [dgp.transform(v) for v in seq]
    de, ie, te = _components([float(np.asarray(v)) for v in seq])
    return EffectDecomposition(te, de, tuple(ie))


# ---------------------------------------------------------------------------
# evaluation at a fixed covariate value
# ---------------------------------------------------------------------------

@dataclass
class _Point:
    """Effect components at one covariate value.

    ``values`` has columns (de, ie_1..ie_J, te, mean_z, mean_zp); in MC mode it
    is a per-draw matrix, in exact mode a single row of expectations.
    """

    values: np.ndarray
    exact: bool
    cat_probs: np.ndarray | None = None  # (draws or 1, categories, 2) for (z, z')

    @property
    def mean(self):
        return self.values.mean(axis=0)

    @property
    def se(self):
        if self.exact:
            return np.zeros(self.values.shape[1])
        n = self.values.shape[0]
        return self.values.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.full(self.values.shape[1], np.inf)


def _contrast(p: _Point, q: _Point, weights=None):
    """Paired contrast ``p - q`` (optionally a weighted sum of columns): (estimate, se)."""
    d = p.values - q.values
    if weights is not None:
        d = d @ np.asarray(weights, dtype=float)
    est = d.mean(axis=0)
    if p.exact and q.exact:
        return est, np.zeros_like(np.asarray(est))
    n = d.shape[0]
    return est, d.std(axis=0, ddof=1) / math.sqrt(n)


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _validate_point(dgp, x_k, x_value):
    cov = dgp.covariate(x_k)
    if not cov.in_support(float(x_value)):
        raise EffectsError(f"{x_value} is outside the support of {x_k!r}")


def _analytic_normal(dgp: StructuralDGP, outcome: str, x_k: str):
    """Normal covariate that can be integrated in closed form, or None."""
    if outcome == "y_t" and not (dgp.transform.is_linear or dgp.transform.is_discrete):
        return None
    for c in dgp.covariates:
        if c.name != x_k and c.dist == "normal" and dgp.degree_in(c.name) <= 1:
            return c
    return None


def exact_available(dgp: StructuralDGP, outcome: str, x_k: str) -> bool:
    """Whether quadrature gives numerically exact conditional effects.

    True for structural (polynomial) outcomes and linear transforms; for
    discrete transforms only when a normal covariate can be integrated in
    closed form or every remaining covariate is discrete.
    """
    if outcome == "y" or dgp.transform.is_linear:
        return True
    if not dgp.transform.is_discrete:
        return False
    if _analytic_normal(dgp, outcome, x_k) is not None:
        return True
    return all(c.dist in ("discrete_uniform", "constant") for c in dgp.covariates if c.name != x_k)


def _node_grid(dgp, x_k, x_value, skip, n_nodes):
    names, node_sets, weight_sets = [], [], []
    for c in dgp.covariates:
        if c.name == x_k or (skip is not None and c.name == skip.name):
            continue
        nodes, w = c.quadrature(n_nodes)
        names.append(c.name)
        node_sets.append(nodes)
        weight_sets.append(w)
    if node_sets:
        mesh = np.meshgrid(*node_sets, indexing="ij")
        wmesh = np.meshgrid(*weight_sets, indexing="ij")
        covs = {n: m.ravel() for n, m in zip(names, mesh)}
        weights = np.prod([w.ravel() for w in wmesh], axis=0)
    else:
        covs, weights = {}, np.ones(1)
    covs[x_k] = np.full(weights.shape, float(x_value))
    return covs, weights


def _pass_prob(A, B, mean, sd, cut, inclusive):
    """P(A + B*G crosses ``cut``) for G ~ N(mean, sd^2): ``>=`` if inclusive else ``>``."""
    out = np.empty(np.broadcast(A, B).shape)
    A, B = np.broadcast_arrays(A, B)
    nz = B != 0
    with np.errstate(divide="ignore", invalid="ignore"):
        out[nz] = norm_cdf((A[nz] + B[nz] * mean - cut) / (np.abs(B[nz]) * sd))
    out[~nz] = (A[~nz] >= cut) if inclusive else (A[~nz] > cut)
    return out


def _exact_point(dgp, outcome, x_k, x_value, z, z_prime, n_nodes) -> _Point:
    transform = dgp.transform if outcome == "y_t" else TransformSpec.identity()
    g = _analytic_normal(dgp, outcome, x_k)
    covs, w = _node_grid(dgp, x_k, x_value, g, n_nodes)
    n_cfg = dgp.n_mechanisms + 2

    def _seq(extra):
        c = dict(covs)
        c.update(extra)
        return [np.broadcast_to(np.asarray(v, dtype=float), w.shape) for v in switching_sequence(dgp, c, z, z_prime)]

    cat_probs = None
    if g is None:
        seq = _seq({})
        if transform.is_discrete:
            cats = np.asarray(transform.categories())
            cat_probs = np.stack([[w @ (transform(v) == cv) for cv in cats] for v in (seq[0], seq[-1])], axis=-1)
        expect = [float(w @ np.asarray(transform(v))) for v in seq]
    else:
        mean, sd = g.params["mean"], g.params["sd"]
        at0, at1 = _seq({g.name: np.zeros_like(w)}), _seq({g.name: np.ones_like(w)})
        expect = []
        passes = []
        for A, Y1 in zip(at0, at1):
            B = Y1 - A
            if transform.is_linear:
                expect.append(float(transform(w @ (A + B * mean))))
                continue
            inclusive = transform.kind == "threshold"
            cuts = transform.cuts()
            cats = transform.categories()
            p_pass = [w @ _pass_prob(A, B, mean, sd, c, inclusive) for c in cuts]
            base = cats[0]
            expect.append(float(base + sum(p_pass[i] * (cats[i + 1] - cats[i]) for i in range(len(cuts)))))
            passes.append([1.0] + p_pass + [0.0])
        if passes:
            probs = [np.array([pp[i] - pp[i + 1] for i in range(len(pp) - 1)]) for pp in (passes[0], passes[-1])]
            cat_probs = np.stack(probs, axis=-1)
    de, ie, te = _components(expect)
    row = np.array([de, *ie, te, expect[0], expect[n_cfg - 1]])
    return _Point(row[None, :], True, None if cat_probs is None else cat_probs[None, ...])


def _mc_point(dgp, outcome, x_k, x_value, z, z_prime, n_draws, seed) -> _Point:
    rng = _rng(seed)
    covs = {c.name: c.sample(rng, n_draws) for c in dgp.covariates}
    covs[x_k] = np.full(n_draws, float(x_value))
    seq = [np.broadcast_to(np.asarray(v, dtype=float), (n_draws,)) for v in switching_sequence(dgp, covs, z, z_prime)]
    if outcome == "y_t":
        seq = [np.asarray(dgp.transform(v), dtype=float) for v in seq]
    de, ie, te = _components(seq)
    cat_probs = None
    if outcome == "y_t" and dgp.transform.is_discrete:
        cats = dgp.transform.categories()
        cat_probs = np.stack([np.stack([(v == c).astype(float) for c in cats], axis=1) for v in (seq[0], seq[-1])], axis=-1)
    return _Point(np.column_stack([de, *ie, te, seq[0], seq[-1]]), False, cat_probs)


def _evaluate_point(dgp, outcome, x_k, x_value, z, z_prime, n_draws, seed, exact, n_nodes) -> _Point:
    _check_tag(outcome)
    if dgp.n_mechanisms < 1:
        raise EffectsError("conditional effects need at least one mediator")
    _validate_point(dgp, x_k, x_value)
    if n_draws < 1:
        raise EffectsError("n_draws must be >= 1")
    if exact:
        return _exact_point(dgp, outcome, x_k, x_value, z, z_prime, n_nodes)
    return _mc_point(dgp, outcome, x_k, x_value, z, z_prime, n_draws, seed)


def _resolve_exact(dgp, outcome, x_k, exact):
    if exact is None:
        return exact_available(dgp, outcome, x_k)
    return bool(exact)


@dataclass(frozen=True)
class ConditionalEffects:
    x_k: str
    x_value: float
    outcome: str
    ade: float
    aie: tuple
    cate: float
    ade_se: float
    aie_se: tuple
    cate_se: float
    n_draws: int
    exact: bool
    mean_treated: float = float("nan")
    mean_control: float = float("nan")

    @property
    def mc_se(self) -> list:
        return [self.ade_se, *self.aie_se, self.cate_se]

    @property
    def decomposition_gap(self) -> float:
        return self.cate - self.ade - sum(self.aie)


def _summarise(point: _Point, dgp, outcome, x_k, x_value, n_draws) -> ConditionalEffects:
    J = dgp.n_mechanisms
    m, s = point.mean, point.se
    return ConditionalEffects(
        x_k=x_k, x_value=float(x_value), outcome=outcome,
        ade=float(m[0]), aie=tuple(float(v) for v in m[1:J + 1]), cate=float(m[J + 1]),
        ade_se=float(s[0]), aie_se=tuple(float(v) for v in s[1:J + 1]), cate_se=float(s[J + 1]),
        n_draws=int(point.values.shape[0]) if not point.exact else 0, exact=point.exact,
        mean_treated=float(m[J + 2]), mean_control=float(m[J + 3]),
    )


def conditional_effects(dgp: StructuralDGP, outcome: str, x_k: str, x_value: float, z=None, z_prime=None,
                        n_draws: int = 100_000, rng=None, exact: bool = False,
                        n_nodes: int = DEFAULT_N_NODES) -> ConditionalEffects:
    """Conditional ADE, AIE_j and CATE with ``x_k`` fixed at ``x_value``.

    Parameters
    ----------
    outcome : {"y", "y_t"}
        Structural or transformed outcome.
    rng : numpy Generator or int seed
        Stream for the Monte Carlo draws of the other covariates.
    exact : bool
        Use quadrature instead of Monte Carlo; standard errors are then zero.
    """
    z, z_prime = _treatments(dgp, z, z_prime)
    point = _evaluate_point(dgp, outcome, x_k, x_value, z, z_prime, n_draws, rng, exact, n_nodes)
    return _summarise(point, dgp, outcome, x_k, x_value, n_draws)


# ---------------------------------------------------------------------------
# closed-form voter CATEs
# ---------------------------------------------------------------------------

def _psi(x: float) -> float:
    """Antiderivative of the normal CDF: ``x Phi(x) + phi(x)``."""
    return x * std_normal_cdf(x) + float(std_normal_pdf(x))


def oracle_voter_cate(outcome: str, moderator: str, value: float, mu: float = 0.0) -> float:
    """Closed-form CATE in the voter model.

    ``outcome`` is ``"y1"`` (utility) or ``"y2"`` (vote choice);
    ``moderator`` is ``"lambda"`` or ``"a"``.
    """
    if moderator == "lambda":
        if not 0.0 <= value <= 1.0:
            raise EffectsError(f"lambda must lie in [0, 1], got {value}")
    elif moderator == "a":
        if value not in (-1, 0, 1):
            raise EffectsError(f"a must be -1, 0 or 1, got {value}")
    else:
        raise EffectsError(f"unknown moderator {moderator!r}")
    if outcome == "y1":
        return -float(value) if moderator == "lambda" else -0.5
    if outcome != "y2":
        raise EffectsError(f"unknown outcome {outcome!r}")
    if moderator == "lambda":
        return sum(std_normal_cdf(mu + a - value) - std_normal_cdf(mu + a) for a in (-1, 0, 1)) / 3.0
    c = mu + value
    return (_psi(c) - _psi(c - 1.0)) - std_normal_cdf(c)


# ---------------------------------------------------------------------------
# checks
# ---------------------------------------------------------------------------

def _default_tolerance(exact, tolerance):
    if tolerance is not None:
        return float(tolerance)
    return EXACT_TOLERANCE if exact else MC_TOLERANCE


def _grid_points(dgp, outcome, x_k, grid, z, z_prime, n_draws, seed, exact, n_nodes):
    valid = []
    for x in grid:
        if dgp.covariate(x_k).in_support(float(x)):
            valid.append(float(x))
    if len(valid) < 2:
        raise EffectsError(f"need at least two grid values inside the support of {x_k!r}")
    pts = [_evaluate_point(dgp, outcome, x_k, x, z, z_prime, n_draws, seed, exact, n_nodes) for x in valid]
    return valid, pts


def _max_pair(values, points, col):
    """Largest paired deviation of column ``col`` across grid pairs."""
    best = None
    for (i, p), (j, q) in itertools.combinations(enumerate(points), 2):
        est, se = _contrast(p, q)
        dev, s = abs(float(est[col])), float(se[col])
        key = dev - 3 * s
        if best is None or key > best[0]:
            best = (key, dev, s, values[i], values[j], float(p.mean[col]), float(q.mean[col]))
    return best


@dataclass(frozen=True)
class Witness:
    x: float
    x_prime: float
    value: float
    value_prime: float


@dataclass(frozen=True)
class ExclusionReport:
    covariate: str
    outcome: str
    focal: int
    assumption1_max_dev: float
    assumption1_se: float
    assumption1_witness: Witness
    assumption2_max_dev: dict
    assumption2_se: dict
    assumption2_witness: dict
    tolerance: float
    exact: bool
    assumption1_pass: bool
    assumption2_pass: bool

    @property
    def passed(self) -> bool:
        return self.assumption1_pass and self.assumption2_pass

    def to_dict(self):
        return asdict(self)


def check_exclusion(dgp: StructuralDGP, outcome: str, x_k: str, grid: Sequence[float], z=None, z_prime=None,
                    n_draws: int = 100_000, tolerance: float | None = None, focal: int = 1, seed=0,
                    exact: bool | None = None, n_nodes: int = DEFAULT_N_NODES) -> ExclusionReport:
    """Check that ``x_k`` shifts neither the conditional ADE nor any non-focal AIE.

    A deviation passes when ``|diff| <= tolerance + 3 * se`` for every pair of
    grid values (``se`` is zero in exact mode).
    """
    z, z_prime = _treatments(dgp, z, z_prime)
    exact = _resolve_exact(dgp, outcome, x_k, exact)
    tol = _default_tolerance(exact, tolerance)
    J = dgp.n_mechanisms
    if not 1 <= focal <= J:
        raise EffectsError(f"focal mechanism must be in 1..{J}")
    values, pts = _grid_points(dgp, outcome, x_k, grid, z, z_prime, n_draws, seed, exact, n_nodes)
    _, dev1, se1, x1, x2, v1, v2 = _max_pair(values, pts, 0)
    a1_pass = dev1 <= tol + 3 * se1
    dev2, se2, wit2 = {}, {}, {}
    a2_pass = True
    for j in range(1, J + 1):
        if j == focal:
            continue
        _, d, s, xa, xb, va, vb = _max_pair(values, pts, j)
        dev2[j], se2[j], wit2[j] = d, s, Witness(xa, xb, va, vb)
        a2_pass = a2_pass and d <= tol + 3 * s
    return ExclusionReport(x_k, outcome, focal, dev1, se1, Witness(x1, x2, v1, v2), dev2, se2, wit2,
                           tol, exact, bool(a1_pass), bool(a2_pass))


@dataclass(frozen=True)
class MembershipVerdict:
    covariate: str
    outcome: str
    question: str  # "mdv" or "relevant"
    member: bool
    set_label: str  # "MDV(j)", "R_only" or "neither"
    witness: Witness | None
    max_dev: float
    se: float
    tolerance: float
    exact: bool

    def to_dict(self):
        return asdict(self)


def _membership(dgp, outcome, x_k, grid, z, z_prime, n_draws, tolerance, seed, exact, n_nodes, mechanism):
    z, z_prime = _treatments(dgp, z, z_prime)
    exact = _resolve_exact(dgp, outcome, x_k, exact)
    tol = _default_tolerance(exact, tolerance)
    J = dgp.n_mechanisms
    values, pts = _grid_points(dgp, outcome, x_k, grid, z, z_prime, n_draws, seed, exact, n_nodes)

    def _test(col):
        _, dev, se, xa, xb, va, vb = _max_pair(values, pts, col)
        return dev > tol + 3 * se, dev, se, Witness(xa, xb, va, vb)

    mdv = {j: _test(j) for j in range(1, J + 1)}
    rel_z, rel_zp = _test(J + 2), _test(J + 3)
    relevant = rel_z if rel_z[0] or not rel_zp[0] else rel_zp
    if rel_zp[0] and rel_z[0] and rel_zp[1] > rel_z[1]:
        relevant = rel_zp
    mdv_any = [j for j in range(1, J + 1) if mdv[j][0]]
    if mechanism in mdv_any:
        label = f"MDV({mechanism})"
    elif mdv_any:
        label = f"MDV({mdv_any[0]})"
    elif relevant[0]:
        label = "R_only"
    else:
        label = "neither"
    return mdv, relevant, label, tol, exact


def is_mdv(dgp: StructuralDGP, outcome: str, mechanism: int, x_k: str, grid: Sequence[float], z=None, z_prime=None,
           n_draws: int = 100_000, tolerance: float | None = None, seed=0, exact: bool | None = None,
           n_nodes: int = DEFAULT_N_NODES) -> MembershipVerdict:
    """Whether ``x_k`` is a mechanism detector variable for ``mechanism``.

    True iff some grid pair has ``|AIE_j(x) - AIE_j(x')| > tolerance + 3 se``.
    """
    if not 1 <= mechanism <= dgp.n_mechanisms:
        raise EffectsError(f"mechanism must be in 1..{dgp.n_mechanisms}")
    mdv, relevant, label, tol, exact = _membership(dgp, outcome, x_k, grid, z, z_prime, n_draws, tolerance,
                                                   seed, exact, n_nodes, mechanism)
    hit, dev, se, wit = mdv[mechanism]
    return MembershipVerdict(x_k, outcome, "mdv", bool(hit), label, wit, dev, se, tol, exact)


def is_relevant(dgp: StructuralDGP, outcome: str, x_k: str, grid: Sequence[float], z=None, z_prime=None,
                n_draws: int = 100_000, tolerance: float | None = None, seed=0, exact: bool | None = None,
                n_nodes: int = DEFAULT_N_NODES) -> MembershipVerdict:
    """Whether the conditional mean outcome moves with ``x_k`` under either treatment value."""
    mdv, relevant, label, tol, exact = _membership(dgp, outcome, x_k, grid, z, z_prime, n_draws, tolerance,
                                                   seed, exact, n_nodes, 1)
    hit, dev, se, wit = relevant
    return MembershipVerdict(x_k, outcome, "relevant", bool(hit), label, wit, dev, se, tol, exact)


@dataclass(frozen=True)
class EffectivenessReport:
    covariate: str
    x: float
    x_prime: float
    categories: tuple
    contrast_x: tuple  # p_i(x; z, z')
    contrast_x_prime: tuple
    difference: tuple
    se: tuple
    tolerance: float
    exact: bool
    effective: bool

    def to_dict(self):
        return asdict(self)


def check_effective(dgp: StructuralDGP, x_k: str, x: float, x_prime: float, z=None, z_prime=None,
                    n_draws: int = 100_000, tolerance: float | None = None, seed=0, exact: bool | None = None,
                    n_nodes: int = DEFAULT_N_NODES) -> EffectivenessReport:
    """Category-probability contrasts ``p_i(x; z, z')`` for a discrete transform.

    The covariate is effective when some category contrast differs between
    ``x`` and ``x_prime``.
    """
    if not dgp.transform.is_discrete:
        raise EffectsError(f"effectiveness needs a discrete transform, got {dgp.transform.kind}")
    z, z_prime = _treatments(dgp, z, z_prime)
    exact = _resolve_exact(dgp, "y_t", x_k, exact)
    tol = _default_tolerance(exact, tolerance)
    p = _evaluate_point(dgp, "y_t", x_k, x, z, z_prime, n_draws, seed, exact, n_nodes)
    q = _evaluate_point(dgp, "y_t", x_k, x_prime, z, z_prime, n_draws, seed, exact, n_nodes)
    cp = p.cat_probs[..., 0] - p.cat_probs[..., 1]  # (draws, categories)
    cq = q.cat_probs[..., 0] - q.cat_probs[..., 1]
    d = cp - cq
    diff = d.mean(axis=0)
    if exact:
        se = np.zeros_like(diff)
    else:
        se = d.std(axis=0, ddof=1) / math.sqrt(d.shape[0])
    effective = bool(np.any(np.abs(diff) > tol + 3 * se))
    return EffectivenessReport(x_k, float(x), float(x_prime), dgp.transform.categories(),
                               tuple(cp.mean(axis=0).tolist()), tuple(cq.mean(axis=0).tolist()),
                               tuple(diff.tolist()), tuple(se.tolist()), tol, exact, effective)


@dataclass(frozen=True)
class IdentificationReport:
    covariate: str
    outcome: str
    x: float
    x_prime: float
    focal: int
    diff_cate: float
    diff_ade: float
    diff_aie: tuple
    diff_aie_focal: float
    residual: float
    residual_se: float
    non_focal_sum: float
    tolerance: float
    exact: bool
    residual_zero: bool

    def to_dict(self):
        return asdict(self)


def verify_identification(dgp: StructuralDGP, outcome: str, x_k: str, x: float, x_prime: float, z=None,
                          z_prime=None, n_draws: int = 100_000, focal: int = 1, tolerance: float | None = None,
                          seed=0, exact: bool | None = None, n_nodes: int = DEFAULT_N_NODES) -> IdentificationReport:
    """Compare the difference in CATEs with the difference in the focal AIE.

    ``residual = diff_cate - diff_aie_focal`` equals the ADE difference plus the
    non-focal AIE differences; under the exclusion assumptions it is zero.
    """
    z, z_prime = _treatments(dgp, z, z_prime)
    exact = _resolve_exact(dgp, outcome, x_k, exact)
    tol = _default_tolerance(exact, tolerance)
    J = dgp.n_mechanisms
    if not 1 <= focal <= J:
        raise EffectsError(f"focal mechanism must be in 1..{J}")
    p = _evaluate_point(dgp, outcome, x_k, x, z, z_prime, n_draws, seed, exact, n_nodes)
    q = _evaluate_point(dgp, outcome, x_k, x_prime, z, z_prime, n_draws, seed, exact, n_nodes)
    est, _ = _contrast(p, q)
    width = p.values.shape[1]
    w = np.zeros(width)
    w[J + 1] = 1.0
    w[focal] -= 1.0
    residual, residual_se = _contrast(p, q, w)
    residual, residual_se = float(residual), float(residual_se)
    non_focal = float(est[0] + sum(est[j] for j in range(1, J + 1) if j != focal))
    return IdentificationReport(
        x_k, outcome, float(x), float(x_prime), focal, float(est[J + 1]), float(est[0]),
        tuple(float(v) for v in est[1:J + 1]), float(est[focal]), residual, residual_se, non_focal,
        tol, exact, bool(abs(residual) <= tol + 3 * residual_se),
    )


@dataclass(frozen=True)
class InvarianceReport:
    covariate: str
    x: float
    x_prime: float
    transform: str
    scale: float
    diff_structural: float
    diff_transformed: float
    residual: float  # diff_transformed - scale * diff_structural
    se: float
    tolerance: float
    holds: bool

    def to_dict(self):
        return asdict(self)


def verify_linear_invariance(dgp: StructuralDGP, x_k: str, x: float, x_prime: float,
                             transform: TransformSpec, z=None, z_prime=None, n_draws: int = 100_000,
                             tolerance: float | None = None, seed=0, exact: bool | None = None,
                             n_nodes: int = DEFAULT_N_NODES) -> InvarianceReport:
    """Check ``diff_cate(h(Y)) == a * diff_cate(Y)`` for ``h``.

    For an affine ``h(y) = a y + b`` this holds by linearity.  Any other
    transform is compared against slope 1, which exposes HTEs the transform
    creates on its own (e.g. a threshold on the voter model in ``a``).
    """
    if transform.kind == "affine":
        scale = float(transform.params["a"])
        if scale == 0:
            raise EffectsError("affine scale must be non-zero")
    else:
        scale = 1.0
    z, z_prime = _treatments(dgp, z, z_prime)
    tdgp = dgp.with_transform(transform)
    exact = _resolve_exact(tdgp, "y_t", x_k, exact) and _resolve_exact(dgp, "y", x_k, exact)
    tol = _default_tolerance(exact, tolerance)
    ps = _evaluate_point(dgp, "y", x_k, x, z, z_prime, n_draws, seed, exact, n_nodes)
    qs = _evaluate_point(dgp, "y", x_k, x_prime, z, z_prime, n_draws, seed, exact, n_nodes)
    pt = _evaluate_point(tdgp, "y_t", x_k, x, z, z_prime, n_draws, seed, exact, n_nodes)
    qt = _evaluate_point(tdgp, "y_t", x_k, x_prime, z, z_prime, n_draws, seed, exact, n_nodes)
    col = dgp.n_mechanisms + 1
    d_s = ps.values[:, col] - qs.values[:, col]
    d_t = pt.values[:, col] - qt.values[:, col]
    r = d_t - scale * d_s
    se = 0.0 if exact else float(r.std(ddof=1) / math.sqrt(len(r)))
    resid = float(r.mean())
    return InvarianceReport(x_k, float(x), float(x_prime), transform.kind, scale, float(d_s.mean()),
                            float(d_t.mean()), resid, se, tol, bool(abs(resid) <= tol + 3 * se))


# ---------------------------------------------------------------------------
# tabular output
# ---------------------------------------------------------------------------

def effects_table(dgp: StructuralDGP, outcome: str, x_k: str, grid: Sequence[float], z=None, z_prime=None,
                  n_draws: int = 100_000, seed=0, exact: bool | None = None,
                  n_nodes: int = DEFAULT_N_NODES) -> list[ConditionalEffects]:
    z, z_prime = _treatments(dgp, z, z_prime)
    exact = _resolve_exact(dgp, outcome, x_k, exact)
    return [conditional_effects(dgp, outcome, x_k, x, z, z_prime, n_draws, seed, exact, n_nodes) for x in grid]


def effects_rows(rows: Sequence[ConditionalEffects]) -> tuple[list, list]:
    J = len(rows[0].aie)
    header = ["covariate", "x", "ade"] + [f"aie_{j + 1}" for j in range(J)] + ["cate", "mc_se"]
    body = [[r.x_k, repr(r.x_value), repr(r.ade), *(repr(v) for v in r.aie), repr(r.cate), repr(r.cate_se)]
            for r in rows]
    return header, body


def integrate_unit_interval(f, n_points: int = 2001) -> float:
    return simpson_integrate(f, Grid1D(0.0, 1.0, n_points))
