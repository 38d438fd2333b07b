"""White-box structural data-generating processes.

A :class:`StructuralDGP` is made of independent covariates, polynomial
mediators ``M_j(z; X)``, a polynomial structural outcome ``Y(z, M; X)`` and an
outcome transform ``h``.  Every evaluation is vectorised: covariate values are
passed as a mapping of name to array (or scalar) and broadcast together.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .numerics import normal_nodes, std_normal_quantile, uniform_nodes

TREATMENT = "z"


class DGPError(ValueError):
    """Invalid DGP specification or evaluation request."""


# ---------------------------------------------------------------------------
# covariates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CovariateSpec:
    """A pre-treatment covariate and its sampling distribution.

    ``dist`` is one of ``uniform`` (lo, hi), ``discrete_uniform`` (values),
    ``normal`` (mean, sd) or ``constant`` (value).
    """

    name: str
    dist: str
    params: Mapping = field(default_factory=dict)

    def __post_init__(self):
        p = dict(self.params)
        if self.dist == "uniform":
            if not p["lo"] < p["hi"]:
                raise DGPError(f"{self.name}: uniform needs lo < hi")
        elif self.dist == "discrete_uniform":
            vals = tuple(float(v) for v in p["values"])
            if not vals:
                raise DGPError(f"{self.name}: discrete_uniform needs at least one value")
            p["values"] = vals
        elif self.dist == "normal":
            if not p["sd"] > 0:
                raise DGPError(f"{self.name}: normal needs sd > 0")
        elif self.dist == "constant":
            p["value"] = float(p["value"])
        else:
            raise DGPError(f"{self.name}: unknown distribution {self.dist!r}")
        object.__setattr__(self, "params", p)

    @classmethod
    def uniform(cls, name, lo, hi):
        return cls(name, "uniform", {"lo": float(lo), "hi": float(hi)})

    @classmethod
    def discrete_uniform(cls, name, values):
        return cls(name, "discrete_uniform", {"values": list(values)})

    @classmethod
    def normal(cls, name, mean, sd):
        return cls(name, "normal", {"mean": float(mean), "sd": float(sd)})

    @classmethod
    def constant(cls, name, value):
        return cls(name, "constant", {"value": value})

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        p = self.params
        if self.dist == "uniform":
            return rng.uniform(p["lo"], p["hi"], n)
        if self.dist == "discrete_uniform":
            vals = np.asarray(p["values"])
            return vals[rng.integers(0, len(vals), n)]
        if self.dist == "normal":
            return rng.normal(p["mean"], p["sd"], n)
        return np.full(n, p["value"])

    def in_support(self, x: float) -> bool:
        p = self.params
        if not math.isfinite(x):
            return False
        if self.dist == "uniform":
            return p["lo"] <= x <= p["hi"]
        if self.dist == "discrete_uniform":
            return any(x == v for v in p["values"])
        if self.dist == "constant":
            return x == p["value"]
        return True

    def quadrature(self, n_nodes: int = 64):
        """Nodes and probability weights integrating this distribution."""
        p = self.params
        if self.dist == "uniform":
            return uniform_nodes(p["lo"], p["hi"], n_nodes)
        if self.dist == "normal":
            return normal_nodes(p["mean"], p["sd"], n_nodes)
        if self.dist == "discrete_uniform":
            vals = np.asarray(p["values"])
            return vals, np.full(len(vals), 1.0 / len(vals))
        return np.array([p["value"]]), np.array([1.0])

    @property
    def mean(self) -> float:
        p = self.params
        if self.dist == "uniform":
            return (p["lo"] + p["hi"]) / 2
        if self.dist == "discrete_uniform":
            return float(np.mean(p["values"]))
        if self.dist == "normal":
            return p["mean"]
        return p["value"]


# ---------------------------------------------------------------------------
# polynomial forms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Term:
    """``coef * z**z_exp * prod(v**e for v, e in powers)``."""

    coef: float
    z_exp: int = 0
    powers: tuple = ()

    def __post_init__(self):
        powers = self.powers
        if isinstance(powers, Mapping):
            powers = powers.items()
        clean = tuple(sorted((str(k), int(e)) for k, e in powers if int(e) != 0))
        if self.z_exp < 0 or any(e < 0 for _, e in clean):
            raise DGPError("exponents must be non-negative")
        object.__setattr__(self, "powers", clean)
        object.__setattr__(self, "coef", float(self.coef))
        object.__setattr__(self, "z_exp", int(self.z_exp))

    @property
    def names(self):
        return [k for k, _ in self.powers]

    def evaluate(self, values: Mapping, z):
        out = self.coef * np.power(z, self.z_exp) if self.z_exp else self.coef
        for name, e in self.powers:
            out = out * np.power(values[name], e)
        return out

    def degree_in(self, name: str) -> int:
        return dict(self.powers).get(name, 0)


def _evaluate_terms(terms, values, z):
    total = 0.0
    for t in terms:
        total = total + t.evaluate(values, z)
    return total


@dataclass(frozen=True)
class MediatorSpec:
    name: str
    terms: tuple

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if not any(t.coef != 0 and t.z_exp > 0 for t in self.terms):
            raise DGPError(f"mediator {self.name!r} must depend on treatment")

    def evaluate(self, covariates: Mapping, z):
        return _evaluate_terms(self.terms, covariates, z)


@dataclass(frozen=True)
class OutcomeSpec:
    terms: tuple

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))

    def evaluate(self, values: Mapping, z):
        return _evaluate_terms(self.terms, values, z)


# ---------------------------------------------------------------------------
# transforms
# ---------------------------------------------------------------------------

TRANSFORM_KINDS = ("identity", "affine", "threshold", "likert", "winsorize", "log_shift")


@dataclass(frozen=True)
class TransformSpec:
    """Outcome transform ``h``.

    ``threshold`` maps ``y >= cut`` to 1 (ties go up).  ``likert`` maps
    ``y <= c_1`` to 1, ``(c_1, c_2]`` to 2, ... and ``y > c_{Q-1}`` to Q.
    ``winsorize`` with ``lo``/``hi`` left as None clips at the 1st/99th
    percentile of the array being transformed.
    """

    kind: str = "identity"
    params: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in TRANSFORM_KINDS:
            raise DGPError(f"unknown transform kind {self.kind!r}")
        p = dict(self.params)
        if self.kind == "affine":
            p.setdefault("b", 0.0)
            if p.get("a", 0) == 0:
                raise DGPError("affine transform needs a != 0")
        elif self.kind == "threshold":
            p.setdefault("cut", 0.0)
        elif self.kind == "likert":
            cuts = tuple(float(c) for c in p["cutpoints"])
            if not cuts or any(b <= a for a, b in zip(cuts, cuts[1:])):
                raise DGPError("likert cutpoints must be strictly increasing")
            p["cutpoints"] = cuts
        elif self.kind == "winsorize":
            p.setdefault("lo", None)
            p.setdefault("hi", None)
            if p["lo"] is not None and p["hi"] is not None and not p["lo"] < p["hi"]:
                raise DGPError("winsorize needs lo < hi")
        elif self.kind == "log_shift":
            p.setdefault("shift", 1.0)
        object.__setattr__(self, "params", p)

    @classmethod
    def identity(cls):
        return cls("identity")

    @classmethod
    def affine(cls, a, b=0.0):
        return cls("affine", {"a": float(a), "b": float(b)})

    @classmethod
    def threshold(cls, cut=0.0):
        return cls("threshold", {"cut": float(cut)})

    @classmethod
    def likert(cls, cutpoints):
        return cls("likert", {"cutpoints": list(cutpoints)})

    @classmethod
    def winsorize(cls, lo=None, hi=None):
        return cls("winsorize", {"lo": lo, "hi": hi})

    @classmethod
    def log_shift(cls, shift=1.0):
        return cls("log_shift", {"shift": float(shift)})

    @property
    def is_linear(self) -> bool:
        return self.kind in ("identity", "affine")

    @property
    def is_discrete(self) -> bool:
        return self.kind in ("threshold", "likert")

    def categories(self):
        if self.kind == "threshold":
            return (0.0, 1.0)
        if self.kind == "likert":
            return tuple(float(i) for i in range(1, len(self.params["cutpoints"]) + 2))
        raise DGPError(f"{self.kind} transform has no categories")

    def cuts(self):
        if self.kind == "threshold":
            return (self.params["cut"],)
        if self.kind == "likert":
            return self.params["cutpoints"]
        raise DGPError(f"{self.kind} transform has no cut points")

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        p = self.params
        if self.kind == "identity":
            out = y.copy()
        elif self.kind == "affine":
            out = p["a"] * y + p["b"]
        elif self.kind == "threshold":
            out = (y >= p["cut"]).astype(float)
        elif self.kind == "likert":
            out = 1.0 + np.searchsorted(np.asarray(p["cutpoints"]), y, side="left")
        elif self.kind == "winsorize":
            lo = np.percentile(y, 1) if p["lo"] is None else p["lo"]
            hi = np.percentile(y, 99) if p["hi"] is None else p["hi"]
            out = np.clip(y, lo, hi)
        else:
            arg = y + p["shift"]
            if np.any(arg <= 0):
                raise DGPError(f"log_shift argument must be positive (shift={p['shift']})")
            out = np.log(arg)
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class NonlinearityCheck:
    verdict: str  # "linear" | "nonlinear" | "inconclusive"
    witness: tuple | None = None  # (t, t_prime, d, delta_t, delta_t_prime)


def check_transform_nonlinearity(transform: TransformSpec, probes: Iterable[float] = (-1.0, -0.5, 0.0, 0.5, 1.0, 2.0),
                                 steps: Iterable[float] = (0.5, 1.0), atol: float = 1e-12) -> NonlinearityCheck:
    """Look for ``t, t', d`` with ``h(t+d) - h(t) != h(t'+d) - h(t')``.

    Identity and affine maps are linear by construction.  For other kinds every
    ordered pair of probe points is tried with every step ``d``.
    """
    if transform.is_linear:
        return NonlinearityCheck("linear")
    probes = [float(t) for t in probes]
    for d in steps:
        if d == 0:
            continue
        for i, t in enumerate(probes):
            dt = float(transform(t + d)) - float(transform(t))
            for t2 in probes[i + 1:]:
                dt2 = float(transform(t2 + d)) - float(transform(t2))
                if abs(dt - dt2) > atol:
                    return NonlinearityCheck("nonlinear", (t, t2, d, dt, dt2))
    return NonlinearityCheck("inconclusive")


# ---------------------------------------------------------------------------
# the structural model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UnitRecord:
    covariates: dict
    z: float
    mediators: dict
    y: float
    y_t: float


@dataclass(frozen=True)
class StructuralDGP:
    covariates: tuple
    mediators: tuple
    outcome: OutcomeSpec
    transform: TransformSpec = TransformSpec()
    treatment_values: tuple = (0.0, 1.0)  # (control z', treated z)
    treatment_prob: float = 0.5
    name: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "covariates", tuple(self.covariates))
        object.__setattr__(self, "mediators", tuple(self.mediators))
        cov = [c.name for c in self.covariates]
        med = [m.name for m in self.mediators]
        names = cov + med
        if len(set(names)) != len(names) or TREATMENT in names:
            raise DGPError(f"covariate/mediator names must be unique and not {TREATMENT!r}: {names}")
        for m in self.mediators:
            for t in m.terms:
                missing = set(t.names) - set(cov)
                if missing:
                    raise DGPError(f"mediator {m.name!r} references unknown covariates {sorted(missing)}")
        for t in self.outcome.terms:
            missing = set(t.names) - set(names)
            if missing:
                raise DGPError(f"outcome references unknown names {sorted(missing)}")
        if not 0.0 <= self.treatment_prob <= 1.0:
            raise DGPError("treatment_prob must lie in [0, 1]")

    @property
    def covariate_names(self):
        return [c.name for c in self.covariates]

    @property
    def mediator_names(self):
        return [m.name for m in self.mediators]

    @property
    def n_mechanisms(self) -> int:
        return len(self.mediators)

    @property
    def z_control(self):
        return self.treatment_values[0]

    @property
    def z_treated(self):
        return self.treatment_values[1]

    def covariate(self, name: str) -> CovariateSpec:
        for c in self.covariates:
            if c.name == name:
                return c
        raise DGPError(f"unknown covariate {name!r}")

    def with_transform(self, transform: TransformSpec) -> "StructuralDGP":
        return replace(self, transform=transform)

    def mediator_values(self, covariates: Mapping, z) -> dict:
        return {m.name: m.evaluate(covariates, z) for m in self.mediators}

    def structural(self, covariates: Mapping, z, mediators: Mapping):
        values = dict(covariates)
        values.update(mediators)
        return self.outcome.evaluate(values, z)

    def degree_in(self, name: str) -> int:
        """Polynomial degree of the structural outcome in covariate ``name``.

        Holds whatever treatment value each mediator is evaluated at.
        """
        med_deg = {m.name: max((t.degree_in(name) for t in m.terms if t.coef != 0), default=0)
                   for m in self.mediators}
        deg = 0
        for t in self.outcome.terms:
            if t.coef == 0:
                continue
            d = t.degree_in(name) + sum(e * med_deg[k] for k, e in t.powers if k in med_deg)
            deg = max(deg, d)
        return deg


def potential_outcome(dgp: StructuralDGP, unit, z, overrides: Mapping | None = None):
    """Return ``(y, y_t)`` for treatment ``z`` with optional mediator overrides.

    ``unit`` is a :class:`UnitRecord` or a mapping of covariate values.
    Mediators not listed in ``overrides`` are recomputed at ``z``.
    """
    covs = unit.covariates if isinstance(unit, UnitRecord) else unit
    overrides = dict(overrides or {})
    unknown = set(overrides) - set(dgp.mediator_names)
    if unknown:
        raise DGPError(f"unknown mediators in overrides: {sorted(unknown)}")
    meds = {}
    for m in dgp.mediators:
        meds[m.name] = overrides[m.name] if m.name in overrides else m.evaluate(covs, z)
    y = dgp.structural(covs, z, meds)
    y_t = dgp.transform(y)
    if np.ndim(y) == 0:
        return float(y), float(y_t)
    return y, y_t


def sample_units(dgp: StructuralDGP, n: int, rng: np.random.Generator, treatment_prob: float | None = None) -> dict:
    """Draw ``n`` units; returns a dict of arrays keyed by covariate, ``z``, mediator, ``y`` and ``y_t``."""
    if n < 1:
        raise DGPError("n must be >= 1")
    p = dgp.treatment_prob if treatment_prob is None else treatment_prob
    if not 0.0 <= p <= 1.0:
        raise DGPError("treatment_prob must lie in [0, 1]")
    covs = {c.name: c.sample(rng, n) for c in dgp.covariates}
    treated = rng.random(n) < p
    z = np.where(treated, dgp.z_treated, dgp.z_control).astype(float)
    meds = dgp.mediator_values(covs, z)
    y = np.broadcast_to(np.asarray(dgp.structural(covs, z, meds), dtype=float), z.shape).copy()
    out = dict(covs)
    out[TREATMENT] = z
    out.update(meds)
    out["y"] = y
    out["y_t"] = dgp.transform(y)
    return out


def sample_unit(dgp: StructuralDGP, rng: np.random.Generator, treatment_prob: float | None = None) -> UnitRecord:
    draw = sample_units(dgp, 1, rng, treatment_prob)
    return UnitRecord(
        covariates={c: float(draw[c][0]) for c in dgp.covariate_names},
        z=float(draw[TREATMENT][0]),
        mediators={m: float(draw[m][0]) for m in dgp.mediator_names},
        y=float(draw["y"][0]),
        y_t=float(draw["y_t"][0]),
    )


def make_unit(dgp: StructuralDGP, covariates: Mapping, z) -> UnitRecord:
    covs = {k: float(v) for k, v in covariates.items()}
    meds = {k: float(v) for k, v in dgp.mediator_values(covs, z).items()}
    y, y_t = potential_outcome(dgp, covs, z)
    return UnitRecord(covs, float(z), meds, y, y_t)


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------

def voter_dgp(mu: float = 0.0) -> StructuralDGP:
    """Corruption-information voter model: ``y1 = -lambda*c + a + eps``, ``y2 = 1[y1 >= 0]``."""
    if not math.isfinite(mu):
        raise DGPError("mu must be finite")
    return StructuralDGP(
        covariates=(
            CovariateSpec.uniform("lambda", 0.0, 1.0),
            CovariateSpec.discrete_uniform("a", (-1.0, 0.0, 1.0)),
            CovariateSpec.normal("eps", mu, 1.0),
        ),
        mediators=(MediatorSpec("m", (Term(1.0, 1, {"lambda": 1}),)),),
        outcome=OutcomeSpec((Term(-1.0, 0, {"m": 1}), Term(1.0, 0, {"a": 1}), Term(1.0, 0, {"eps": 1}))),
        transform=TransformSpec.threshold(0.0),
        name="voter",
    )


def turnout_dgp() -> StructuralDGP:
    """Mobilisation example: ``M = (1 + Z) X1``, ``U = M + X2``, turnout ``1[U >= 0]``."""
    return StructuralDGP(
        covariates=(
            CovariateSpec.normal("x1", 0.0, 1.0),
            CovariateSpec.discrete_uniform("x2", (0.0, 1.0)),
        ),
        mediators=(MediatorSpec("m", (Term(1.0, 0, {"x1": 1}), Term(1.0, 1, {"x1": 1}))),),
        outcome=OutcomeSpec((Term(1.0, 0, {"m": 1}), Term(1.0, 0, {"x2": 1}))),
        transform=TransformSpec.threshold(0.0),
        name="turnout",
    )


def two_mech_dgp(shared_moderator: bool = False) -> StructuralDGP:
    """Two additively separable mechanisms ``M1 = lambda z`` and ``M2 = r z``; ``Y = M1 + M2 + a``.

    With ``shared_moderator`` the second mechanism is ``M2 = lambda z`` so
    ``lambda`` moderates both mechanisms.
    """
    m2_mod = "lambda" if shared_moderator else "r"
    return StructuralDGP(
        covariates=(
            CovariateSpec.uniform("lambda", 0.0, 1.0),
            CovariateSpec.uniform("r", 0.0, 1.0),
            CovariateSpec.discrete_uniform("a", (-1.0, 0.0, 1.0)),
        ),
        mediators=(
            MediatorSpec("m1", (Term(1.0, 1, {"lambda": 1}),)),
            MediatorSpec("m2", (Term(1.0, 1, {m2_mod: 1}),)),
        ),
        outcome=OutcomeSpec((Term(1.0, 0, {"m1": 1}), Term(1.0, 0, {"m2": 1}), Term(1.0, 0, {"a": 1}))),
        transform=TransformSpec.identity(),
        name="two_mech_shared" if shared_moderator else "two_mech",
    )


PRESETS = ("voter", "turnout", "two_mech")


def builtin_dgp(preset: str, **params) -> StructuralDGP:
    """Named preset: ``voter(mu=0)``, ``turnout`` or ``two_mech(shared_moderator=False)``."""
    if preset == "voter":
        return voter_dgp(params.get("mu", 0.0))
    if preset == "turnout":
        return turnout_dgp()
    if preset == "two_mech":
        return two_mech_dgp(params.get("shared_moderator", False))
    raise DGPError(f"unknown preset {preset!r}; choose from {PRESETS}")


def voter_mu_for_support(q: float) -> float:
    return std_normal_quantile(q) + 0.25


# ---------------------------------------------------------------------------
# JSON configuration
# ---------------------------------------------------------------------------

def _term_from_dict(d: Mapping) -> Term:
    powers = dict(d.get("x_exps", {}))
    powers.update(d.get("m_exps", {}))
    return Term(d["coef"], d.get("z_exp", 0), powers)


def _term_to_dict(t: Term) -> dict:
    return {"coef": t.coef, "z_exp": t.z_exp, "x_exps": dict(t.powers)}


def dgp_from_dict(cfg: Mapping) -> StructuralDGP:
    try:
        covs = tuple(CovariateSpec(c["name"], c["dist"], c.get("params", {})) for c in cfg["covariates"])
        meds = tuple(MediatorSpec(m["name"], tuple(_term_from_dict(t) for t in m["terms"])) for m in cfg["mediators"])
        outcome = OutcomeSpec(tuple(_term_from_dict(t) for t in cfg["outcome"]["terms"]))
        tr = cfg.get("transform", {"kind": "identity"})
        transform = TransformSpec(tr["kind"], tr.get("params", {}))
        treat = cfg.get("treatment", {})
        values = tuple(float(v) for v in treat.get("values", (0.0, 1.0)))
        prob = float(treat.get("prob", 0.5))
    except (KeyError, TypeError) as exc:
        raise DGPError(f"malformed DGP config: {exc!r}") from exc
    return StructuralDGP(covs, meds, outcome, transform, values, prob, cfg.get("name", "custom"))


def dgp_to_dict(dgp: StructuralDGP) -> dict:
    def _jsonable(p):
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in p.items()}

    return {
        "name": dgp.name,
        "covariates": [{"name": c.name, "dist": c.dist, "params": _jsonable(c.params)} for c in dgp.covariates],
        "mediators": [{"name": m.name, "terms": [_term_to_dict(t) for t in m.terms]} for m in dgp.mediators],
        "outcome": {"terms": [_term_to_dict(t) for t in dgp.outcome.terms]},
        "transform": {"kind": dgp.transform.kind, "params": _jsonable(dgp.transform.params)},
        "treatment": {"values": list(dgp.treatment_values), "prob": dgp.treatment_prob},
    }


def load_dgp(path) -> StructuralDGP:
    with open(Path(path)) as fh:
        return dgp_from_dict(json.load(fh))
