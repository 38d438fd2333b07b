"""Regression engines: OLS with interaction designs, coefficient tests and IRLS logit.

Data are passed as column mappings (a dict of 1-D arrays, or anything with
``data[name]`` access such as a DataFrame).  Designs are lists of term strings:

``"const"``      intercept
``"x"``          column ``x``
``"a[1]"``       indicator ``1[a == 1]``
``"c:lambda"``   product of the parts

Thin scikit-learn wrappers (:class:`InteractionOLS`, :class:`LogitIRLS`) sit on
top of the functional API for use in pipelines.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import linalg, special
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .numerics import norm_cdf, student_t_two_sided_p


class EstimationError(ValueError):
    pass


class SingularDesignError(EstimationError):
    """The design matrix is rank deficient; ``dependent`` lists the offending columns."""

    def __init__(self, message, dependent=()):
        super().__init__(message)
        self.dependent = tuple(dependent)


class InsufficientDataError(EstimationError):
    pass


class ConvergenceError(EstimationError):
    pass


class SeparationError(ConvergenceError):
    pass


# ---------------------------------------------------------------------------
# designs
# ---------------------------------------------------------------------------

LINEAR_TERMS = ("const", "c", "lambda", "a", "c:lambda", "c:a")
FACTOR_TERMS = ("const", "c", "lambda", "a[0]", "a[1]", "c:lambda", "c:a[0]", "c:a[1]")

_INDICATOR = re.compile(r"^(?P<name>[^\[\]]+)\[(?P<level>[^\[\]]+)\]$")


def factor_terms(treatment: str, continuous: Sequence[str], factor: str, levels: Sequence, base) -> tuple:
    """Terms for a saturated-in-factor interaction design with ``base`` omitted."""
    dummies = [f"{factor}[{_fmt_level(v)}]" for v in levels if float(v) != float(base)]
    mains = [treatment, *continuous, *dummies]
    inter = [f"{treatment}:{x}" for x in (*continuous, *dummies)]
    return ("const", *mains, *inter)


def _fmt_level(v) -> str:
    v = float(v)
    return str(int(v)) if v.is_integer() else repr(v)


@dataclass(frozen=True)
class DesignSpec:
    """Regression design.

    Parameters
    ----------
    kind : {"linear", "factor", "custom"}
    response : str
        Name of the response column.
    terms : sequence of str, optional
        Required for ``custom``; ignored for the built-in kinds.
    base : float
        Omitted level of ``a`` in the factor design.
    """

    kind: str = "linear"
    response: str = "y1"
    terms: tuple = ()
    base: float = -1.0

    def __post_init__(self):
        if self.kind == "linear":
            terms = LINEAR_TERMS
        elif self.kind == "factor":
            if self.base not in (-1.0, 0.0, 1.0):
                raise EstimationError(f"factor base level must be -1, 0 or 1, got {self.base}")
            terms = factor_terms("c", ("lambda",), "a", (-1.0, 0.0, 1.0), self.base)
        elif self.kind == "custom":
            terms = tuple(self.terms)
            if not terms:
                raise EstimationError("custom design needs at least one term")
        else:
            raise EstimationError(f"unknown design kind {self.kind!r}; use linear, factor or custom")
        if len(set(terms)) != len(terms):
            raise EstimationError("design terms must be unique")
        object.__setattr__(self, "terms", tuple(terms))

    @classmethod
    def linear(cls, response="y1"):
        return cls("linear", response)

    @classmethod
    def factor(cls, response="y1", base=-1.0):
        return cls("factor", response, base=float(base))

    @classmethod
    def custom(cls, terms, response="y"):
        return cls("custom", response, tuple(terms))

    @property
    def columns(self):
        return self.terms

    def with_response(self, response):
        return DesignSpec(self.kind, response, self.terms, self.base)


def _column(data, name):
    try:
        col = data[name]
    except (KeyError, IndexError) as exc:
        raise EstimationError(f"data has no column {name!r}") from exc
    col = np.asarray(col, dtype=float)
    if col.ndim != 1:
        raise EstimationError(f"column {name!r} must be one-dimensional")
    return col


def _term_values(data, term: str, n: int) -> np.ndarray:
    if term == "const":
        return np.ones(n)
    out = np.ones(n)
    for part in term.split(":"):
        m = _INDICATOR.match(part)
        if m:
            out = out * (_column(data, m["name"]) == float(m["level"]))
        elif part == "const":
            raise EstimationError(f"'const' cannot appear inside an interaction ({term!r})")
        else:
            out = out * _column(data, part)
    return out


def _n_rows(data, design):
    try:
        return len(np.asarray(data[design.response]))
    except (KeyError, IndexError) as exc:
        raise EstimationError(f"data has no column {design.response!r}") from exc


def design_matrix(data, design: DesignSpec) -> tuple[np.ndarray, tuple]:
    """Design matrix and column names for ``design`` evaluated on ``data``."""
    n = _n_rows(data, design)
    X = np.column_stack([_term_values(data, t, n) for t in design.terms])
    if not np.all(np.isfinite(X)):
        raise EstimationError("design contains non-finite values")
    return X, design.terms


# ---------------------------------------------------------------------------
# OLS
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OlsFit:
    names: tuple
    coef: np.ndarray
    se: np.ndarray
    t: np.ndarray
    p: np.ndarray
    df: int
    sigma2: float
    errors: str
    n: int
    cov: np.ndarray = field(repr=False)
    residuals: np.ndarray = field(repr=False)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise EstimationError(f"unknown coefficient {name!r}; have {list(self.names)}") from None

    def __getitem__(self, name):
        i = self.index(name)
        return {"estimate": float(self.coef[i]), "se": float(self.se[i]), "t": float(self.t[i]),
                "p": float(self.p[i])}

    def summary_rows(self, alpha: float | None = None) -> list[dict]:
        rows = []
        for i, name in enumerate(self.names):
            row = {"coef": name, "estimate": float(self.coef[i]), "se": float(self.se[i]),
                   "t": float(self.t[i]), "p": float(self.p[i])}
            if alpha is not None:
                row["reject"] = bool(self.p[i] < alpha)
            rows.append(row)
        return rows

    def to_dict(self) -> dict:
        return {"names": list(self.names), "coef": self.coef.tolist(), "se": self.se.tolist(),
                "t": self.t.tolist(), "p": self.p.tolist(), "df": self.df, "sigma2": self.sigma2,
                "errors": self.errors, "n": self.n}


def _rank_check(R, names, rtol):
    """Mask of pivots whose diagonal is negligible relative to the largest."""
    diag = np.abs(np.diag(R))
    scale = diag.max() if diag.size else 0.0
    bad = diag <= rtol * max(scale, np.finfo(float).tiny)
    return bad


def ols_qr(X: np.ndarray, y: np.ndarray, names: Sequence[str] | None = None, errors: str = "classical",
           rtol: float = 1e-10, allow_saturated: bool = False) -> OlsFit:
    """Least squares by pivoted QR.

    Parameters
    ----------
    errors : {"classical", "hc1"}
        Homoskedastic or HC1 sandwich covariance.
    allow_saturated : bool
        Permit ``n == k``; coefficients are returned with NaN inference.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, k = X.shape
    names = tuple(names) if names is not None else tuple(f"x{i}" for i in range(k))
    if errors not in ("classical", "hc1"):
        raise EstimationError(f"errors must be 'classical' or 'hc1', got {errors!r}")
    if y.shape != (n,):
        raise EstimationError("response length does not match the design")
    if not np.all(np.isfinite(y)):
        raise EstimationError("response contains non-finite values")
    if n < k or (n == k and not allow_saturated):
        raise InsufficientDataError(f"need more observations than regressors (n={n}, k={k})")

    Q, R, piv = linalg.qr(X, mode="economic", pivoting=True)
    bad = _rank_check(R, names, rtol)
    if bad.any():
        dependent = [names[piv[i]] for i in np.flatnonzero(bad)]
        raise SingularDesignError(f"design is rank deficient; dependent columns: {dependent}", dependent)

    qty = Q.T @ y
    b_piv = linalg.solve_triangular(R, qty)
    coef = np.empty(k)
    coef[piv] = b_piv
    resid = y - X @ coef
    df = n - k
    Rinv = linalg.solve_triangular(R, np.eye(k))
    if df == 0:
        nan = np.full(k, np.nan)
        return OlsFit(names, coef, nan, nan, nan, 0, float("nan"), errors, n, np.full((k, k), np.nan), resid)

    sigma2 = float(resid @ resid / df)
    if errors == "classical":
        cov_piv = sigma2 * (Rinv @ Rinv.T)
    else:
        meat = (Q * resid[:, None] ** 2).T @ Q
        cov_piv = Rinv @ meat @ Rinv.T * (n / df)
    cov = np.empty((k, k))
    cov[np.ix_(piv, piv)] = cov_piv
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = coef / se
    p = np.asarray(student_t_two_sided_p(np.where(np.isnan(t), 0.0, t), df), dtype=float)
    p = np.where(np.isnan(t), np.nan, p)
    return OlsFit(names, coef, se, t, p, df, sigma2, errors, n, cov, resid)


def fit_ols(data, design: DesignSpec, errors: str = "classical", allow_saturated: bool = False) -> OlsFit:
    """Fit ``design`` to ``data`` by least squares (see :func:`ols_qr`)."""
    X, names = design_matrix(data, design)
    y = _column(data, design.response)
    return ols_qr(X, y, names, errors=errors, allow_saturated=allow_saturated)


@dataclass(frozen=True)
class DiffCateTest:
    names: tuple
    estimates: tuple
    p_values: tuple
    reject: tuple
    alpha: float
    joint_stat: float
    joint_p: float
    joint_reject: bool
    bonferroni_reject: bool | None

    def to_dict(self):
        return {"names": list(self.names), "estimates": list(self.estimates), "p_values": list(self.p_values),
                "reject": list(self.reject), "alpha": self.alpha, "joint_stat": self.joint_stat,
                "joint_p": self.joint_p, "joint_reject": self.joint_reject,
                "bonferroni_reject": self.bonferroni_reject}


def _f_sf(F, d1, d2):
    """Upper tail of the F(d1, d2) distribution."""
    if not math.isfinite(F):
        return 0.0
    return float(special.betainc(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * F)))


def diff_cate_test(fit: OlsFit, names, alpha: float = 0.05, bonferroni: bool = False) -> DiffCateTest:
    """Test interaction coefficients (differences in CATEs) individually and jointly.

    Each coefficient is rejected when its two-sided p-value is below
    ``alpha``.  With several names a Wald F test gives the joint verdict, and
    ``bonferroni=True`` adds a flag rejecting when any p < alpha / m.
    """
    if isinstance(names, str):
        names = (names,)
    names = tuple(names)
    if not names:
        raise EstimationError("need at least one coefficient name")
    if not 0.0 < alpha < 1.0:
        raise EstimationError("alpha must lie in (0, 1)")
    idx = [fit.index(nm) for nm in names]
    est = tuple(float(fit.coef[i]) for i in idx)
    pv = tuple(float(fit.p[i]) for i in idx)
    rej = tuple(bool(p < alpha) for p in pv)
    b = fit.coef[idx]
    V = fit.cov[np.ix_(idx, idx)]
    try:
        stat = float(b @ np.linalg.solve(V, b)) / len(idx)
        jp = _f_sf(stat, len(idx), fit.df)
    except np.linalg.LinAlgError:
        stat, jp = float("inf"), 0.0
    bonf = any(p < alpha / len(idx) for p in pv) if bonferroni else None
    return DiffCateTest(names, est, pv, rej, alpha, stat, jp, bool(jp < alpha), bonf)


# ---------------------------------------------------------------------------
# logit
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LogitFit:
    names: tuple
    coef: np.ndarray
    se: np.ndarray
    loglik: float
    iterations: int
    converged: bool
    grad_norm: float
    design: DesignSpec | None = None
    cov: np.ndarray = field(default=None, repr=False)
    loglik_path: tuple = field(default=(), repr=False)

    def to_dict(self):
        return {"names": list(self.names), "coef": self.coef.tolist(), "se": self.se.tolist(),
                "loglik": self.loglik, "iterations": self.iterations, "converged": self.converged,
                "grad_norm": self.grad_norm}


def _loglik(eta, y):
    # log p = -log(1 + e^-eta), log(1-p) = -log(1 + e^eta)
    return float(-(y * np.logaddexp(0.0, -eta) + (1 - y) * np.logaddexp(0.0, eta)).sum())


def logit_irls(X: np.ndarray, y: np.ndarray, names: Sequence[str] | None = None, tol: float = 1e-8,
               max_iter: int = 100, max_norm: float = 1e3, max_eta: float = 30.0) -> LogitFit:
    """Binary logit by iteratively reweighted least squares (Newton) with step halving.

    Separation is reported when the coefficient norm exceeds ``max_norm`` or
    any fitted linear predictor exceeds ``max_eta`` in absolute value.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, k = X.shape
    names = tuple(names) if names is not None else tuple(f"x{i}" for i in range(k))
    if y.shape != (n,):
        raise EstimationError("response length does not match the design")
    if not np.all((y == 0) | (y == 1)):
        raise EstimationError("logit response must be binary (0/1)")
    if y.min() == y.max():
        raise EstimationError("response has no variation")
    if n <= k:
        raise InsufficientDataError(f"need more observations than regressors (n={n}, k={k})")
    _, R, piv = linalg.qr(X, mode="economic", pivoting=True)
    bad = _rank_check(R, names, 1e-10)
    if bad.any():
        dependent = [names[piv[i]] for i in np.flatnonzero(bad)]
        raise SingularDesignError(f"design is rank deficient; dependent columns: {dependent}", dependent)

    beta = np.zeros(k)
    eta = X @ beta
    ll = _loglik(eta, y)
    path = [ll]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        mu = special.expit(eta)
        grad = X.T @ (y - mu)
        gnorm = float(np.linalg.norm(grad))
        if gnorm <= tol:
            converged = True
            it -= 1
            break
        w = mu * (1 - mu)
        H = (X * w[:, None]).T @ X
        try:
            step = linalg.solve(H, grad, assume_a="pos")
        except (linalg.LinAlgError, ValueError):
            raise SeparationError("information matrix became singular; the data look separated") from None
        t = 1.0
        while True:
            cand = beta + t * step
            eta_c = X @ cand
            ll_c = _loglik(eta_c, y)
            if ll_c >= ll - 1e-12 * abs(ll) or t < 1e-10:
                break
            t /= 2
        beta, eta, ll = cand, eta_c, ll_c
        path.append(ll)
        if np.linalg.norm(beta) > max_norm:
            raise SeparationError(f"coefficient norm exceeded {max_norm:g}; the data look separated")
    mu = special.expit(eta)
    grad_norm = float(np.linalg.norm(X.T @ (y - mu)))
    converged = converged or grad_norm <= tol
    if not converged:
        raise ConvergenceError(f"IRLS did not converge in {max_iter} iterations (gradient norm {grad_norm:.3g})")
    if np.abs(eta).max() > max_eta:
        # fitted probabilities pinned at 0 or 1: the optimum is at infinity
        raise SeparationError(f"linear predictor reached {np.abs(eta).max():.3g}; the data look separated")
    w = mu * (1 - mu)
    cov = linalg.inv((X * w[:, None]).T @ X)
    se = np.sqrt(np.diag(cov))
    return LogitFit(names, beta, se, ll, it, converged, grad_norm, None, cov, tuple(path))


def fit_logit(data, design: DesignSpec, tol: float = 1e-8, max_iter: int = 100) -> LogitFit:
    X, names = design_matrix(data, design)
    y = _column(data, design.response)
    fit = logit_irls(X, y, names, tol=tol, max_iter=max_iter)
    return LogitFit(fit.names, fit.coef, fit.se, fit.loglik, fit.iterations, fit.converged, fit.grad_norm,
                    design, fit.cov, fit.loglik_path)


def recover_utility(fit: LogitFit, data) -> np.ndarray:
    """Systematic utility ``V = X beta`` for each row of ``data``."""
    if not fit.converged:
        raise ConvergenceError("cannot recover utilities from a non-converged fit")
    if fit.design is None:
        raise EstimationError("fit carries no design; use fit_logit")
    X, _ = design_matrix(data, fit.design)
    return X @ fit.coef


def utility_interaction_fit(fit: LogitFit, data, design: DesignSpec | None = None) -> OlsFit:
    """Regress recovered utilities on an interaction design.

    ``V`` is an exact linear function of the logit coefficients, so regressing
    it on the logit design leaves no residual.  Standard errors are therefore
    propagated from the logit covariance: ``cov = A X S X' A'`` with
    ``A = (D'D)^{-1} D'``.  Tests use the normal reference distribution.
    """
    design = design or fit.design
    V = recover_utility(fit, data)
    X, _ = design_matrix(data, fit.design)
    D, names = design_matrix({**{k: data[k] for k in _referenced(data, design)}, design.response: V}, design)
    n, k = D.shape
    if n <= k:
        raise InsufficientDataError(f"need more observations than regressors (n={n}, k={k})")
    Q, R = linalg.qr(D, mode="economic")
    if _rank_check(R, names, 1e-10).any():
        raise SingularDesignError("utility design is rank deficient")
    A = linalg.solve_triangular(R, Q.T)
    coef = A @ V
    AX = A @ X
    cov = AX @ fit.cov @ AX.T
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    t = coef / se
    p = 2.0 * norm_cdf(-np.abs(t))
    resid = V - D @ coef
    return OlsFit(tuple(names), coef, se, t, p, n - k, float(resid @ resid / (n - k)), "propagated", n, cov, resid)


def _referenced(data, design):
    cols = set()
    for term in design.terms:
        for part in term.split(":"):
            m = _INDICATOR.match(part)
            name = m["name"] if m else part
            if name != "const" and name != design.response:
                cols.add(name)
    return cols


def simulate_rum(n: int, rng: np.random.Generator) -> dict:
    """Binary choices from a logit model with systematic utility ``V = -c*lambda + a``.

    ``c ~ Bernoulli(1/2)``, ``lambda ~ U[0, 1]``, ``a`` uniform on {-1, 0, 1};
    the returned dict has columns ``c``, ``lambda``, ``a``, ``v`` and ``y``.
    """
    if n < 1:
        raise EstimationError("n must be positive")
    lam = rng.uniform(0.0, 1.0, n)
    a = rng.integers(-1, 2, n).astype(float)
    c = (rng.random(n) < 0.5).astype(float)
    v = -c * lam + a
    y = (rng.random(n) < special.expit(v)).astype(float)
    return {"c": c, "lambda": lam, "a": a, "v": v, "y": y}


# ---------------------------------------------------------------------------
# scikit-learn wrappers
# ---------------------------------------------------------------------------

class InteractionOLS(RegressorMixin, BaseEstimator):
    """OLS on a pre-built design matrix with inference attributes.

    Parameters
    ----------
    fit_intercept : bool
        Prepend a constant column.
    errors : {"classical", "hc1"}
    feature_names : sequence of str, optional
        Names used for ``coef_names_``.
    """

    def __init__(self, fit_intercept=True, errors="classical", feature_names=None):
        self.fit_intercept = fit_intercept
        self.errors = errors
        self.feature_names = feature_names

    def _augment(self, X):
        return np.column_stack([np.ones(len(X)), X]) if self.fit_intercept else X

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        names = list(self.feature_names) if self.feature_names is not None else [f"x{i}" for i in range(X.shape[1])]
        if len(names) != X.shape[1]:
            raise EstimationError("feature_names length does not match X")
        if self.fit_intercept:
            names = ["const", *names]
        res = ols_qr(self._augment(X), y, names, errors=self.errors)
        self.result_ = res
        self.coef_ = res.coef[1:] if self.fit_intercept else res.coef
        self.intercept_ = float(res.coef[0]) if self.fit_intercept else 0.0
        self.bse_ = res.se
        self.pvalues_ = res.p
        self.coef_names_ = res.names
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        return X @ self.coef_ + self.intercept_


class LogitIRLS(ClassifierMixin, BaseEstimator):
    """Binary logit fitted by IRLS; ``decision_function`` returns recovered utilities."""

    def __init__(self, fit_intercept=True, tol=1e-8, max_iter=100):
        self.fit_intercept = fit_intercept
        self.tol = tol
        self.max_iter = max_iter

    def _augment(self, X):
        return np.column_stack([np.ones(len(X)), X]) if self.fit_intercept else X

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        self.classes_ = np.unique(y)
        if len(self.classes_) != 2:
            raise EstimationError("LogitIRLS needs exactly two classes")
        yb = (y == self.classes_[1]).astype(float)
        res = logit_irls(self._augment(X), yb, tol=self.tol, max_iter=self.max_iter)
        self.result_ = res
        self.coef_ = res.coef[1:] if self.fit_intercept else res.coef
        self.intercept_ = float(res.coef[0]) if self.fit_intercept else 0.0
        self.n_iter_ = res.iterations
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        return X @ self.coef_ + self.intercept_

    def predict_proba(self, X):
        p1 = special.expit(self.decision_function(X))
        return np.column_stack([1 - p1, p1])

    def predict(self, X):
        return self.classes_[(self.decision_function(X) > 0).astype(int)]


# ---------------------------------------------------------------------------
# CSV datasets
# ---------------------------------------------------------------------------

def read_dataset(path, schema: str | None = None) -> dict:
    """Read a column-named CSV into a dict of float arrays.

    A leading ``# htemech-csv v1 <schema>`` comment is checked against
    ``schema`` when both are present; files without the comment are accepted.
    """
    from .csvio import read_table

    header, rows = read_table(path, schema)
    cols = {}
    for j, name in enumerate(header):
        try:
            cols[name] = np.array([float(r[j]) for r in rows])
        except ValueError:
            cols[name] = np.array([r[j] for r in rows])
    return cols
