"""Design matrices and from-scratch maximum-likelihood fits.

Two models: a logistic regression of link liveness on link/paper
characteristics, and an NB2 negative binomial regression of citation counts
on link provision indicators. Both are fit by Newton ascent with
step-halving so the log-likelihood never decreases, and both report Wald
standard errors from the observed information at the optimum.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import digamma, erfc, gammaln, xlogy

from .classify import LinkClass
from .ingest import Field

ALPHA_FLOOR = 1e-8


class SingularDesignError(ValueError):
    pass


@dataclass
class DesignMatrix:
    columns: list
    X: np.ndarray
    y: np.ndarray
    response_name: str = "y"

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.X.ndim != 2 or self.X.shape[0] != self.y.shape[0]:
            raise ValueError("design shape mismatch")
        if self.X.shape[1] != len(self.columns):
            raise ValueError("column names do not match design width")
        if not np.isfinite(self.X).all() or not np.isfinite(self.y).all():
            raise ValueError("design contains non-finite values")


@dataclass
class RegressionFit:
    columns: list
    beta: np.ndarray
    se: np.ndarray
    z: np.ndarray
    p: np.ndarray
    log_likelihood: float
    converged: bool
    iterations: int
    alpha: float = None
    alpha_se: float = None
    diagnostics: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# Design construction
# ---------------------------------------------------------------------------

LIVENESS_COLUMNS = [
    "intercept",
    "log2_domain_mentions",
    "log2_url_mentions",
    "log2_citations_plus_1",
    "in_footnote",
    "field_cs",        # vs math baseline
    "field_physics",   # vs math baseline
    "class_methods",   # vs supplement baseline
    "class_data",      # vs supplement baseline
    "age",
    "age_squared",
]

CITATION_COLUMNS = [
    "intercept",
    "has_live_methods",
    "has_live_data",
    "has_problematic_methods",
    "has_problematic_data",
    "field_math",      # vs cs baseline
    "field_physics",   # vs cs baseline
    "age",
    "age_squared",
]


def build_liveness_design(table, analysis_year):
    """One row per probed mention; response = alive.

    URL and domain popularity counts come from the full mention table and
    enter in log2 so doubling statements read directly off the coefficients.
    """
    domain_counts = {}
    url_counts = {}
    for r in table.rows:
        domain_counts[r.domain] = domain_counts.get(r.domain, 0) + 1
        url_counts[r.canonical] = url_counts.get(r.canonical, 0) + 1
    rows = []
    y = []
    for r in table.rows:
        if r.alive is None:
            continue
        age = analysis_year - r.year
        rows.append([
            1.0,
            math.log2(domain_counts[r.domain]),
            math.log2(url_counts[r.canonical]),
            math.log2(1 + r.citation_count),
            1.0 if r.in_footnote else 0.0,
            1.0 if r.field == Field.CS else 0.0,
            1.0 if r.field == Field.PHYSICS else 0.0,
            1.0 if r.link_class == LinkClass.METHODS else 0.0,
            1.0 if r.link_class == LinkClass.DATA else 0.0,
            float(age),
            float(age * age),
        ])
        y.append(1.0 if r.alive else 0.0)
    if not rows:
        raise ValueError("no probed mentions: liveness design would be empty")
    return DesignMatrix(LIVENESS_COLUMNS, np.array(rows), np.array(y), "alive")


def build_citation_design(papers, table, analysis_year):
    """One row per paper; response = citation count.

    The four link indicators are independent 0/1 flags derived from the
    paper's probed mentions; a paper can have both a live and a problematic
    link of the same class.
    """
    flags = {p.paper_id: [0.0, 0.0, 0.0, 0.0] for p in papers}
    for r in table.rows:
        if r.alive is None or r.paper_id not in flags:
            continue
        if r.link_class == LinkClass.METHODS:
            flags[r.paper_id][0 if r.alive else 2] = 1.0
        elif r.link_class == LinkClass.DATA:
            flags[r.paper_id][1 if r.alive else 3] = 1.0
    rows = []
    y = []
    for p in papers:
        age = analysis_year - p.year
        live_m, live_d, prob_m, prob_d = flags[p.paper_id]
        rows.append([
            1.0,
            live_m,
            live_d,
            prob_m,
            prob_d,
            1.0 if p.field == Field.MATH else 0.0,
            1.0 if p.field == Field.PHYSICS else 0.0,
            float(age),
            float(age * age),
        ])
        y.append(float(p.citation_count))
    return DesignMatrix(CITATION_COLUMNS, np.array(rows), np.array(y), "citations")


# ---------------------------------------------------------------------------
# Shared numerics
# ---------------------------------------------------------------------------

def _wald(beta, cov):
    se = np.sqrt(np.maximum(np.diag(cov), 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, beta / se, np.inf * np.sign(beta))
    p = erfc(np.abs(z) / math.sqrt(2.0))
    return se, z, p


def _solve_information(H, g, columns):
    """Solve H x = g, naming the most collinear column when H is singular."""
    try:
        return np.linalg.solve(H, g)
    except np.linalg.LinAlgError:
        pass
    ridge = H + np.eye(H.shape[0]) * (1e-10 * max(np.trace(H), 1.0))
    try:
        return np.linalg.solve(ridge, g)
    except np.linalg.LinAlgError as exc:
        _, _, vt = np.linalg.svd(H)
        worst = columns[int(np.argmax(np.abs(vt[-1])))]
        raise SingularDesignError(
            f"singular information matrix; column {worst!r} appears collinear"
        ) from exc


def _invert_information(H, columns):
    try:
        return np.linalg.inv(H)
    except np.linalg.LinAlgError as exc:
        _, _, vt = np.linalg.svd(H)
        worst = columns[int(np.argmax(np.abs(vt[-1])))]
        raise SingularDesignError(
            f"singular information matrix; column {worst!r} appears collinear"
        ) from exc


_DIVERGENCE_BOUND = 30.0


# ---------------------------------------------------------------------------
# Logistic regression
# ---------------------------------------------------------------------------

def logistic_log_likelihood(X, y, beta):
    eta = X @ beta
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)))


def logistic_gradient(X, y, beta):
    eta = X @ beta
    prob = 1.0 / (1.0 + np.exp(-eta))
    return X.T @ (y - prob)


def fit_logistic(design, max_iter=100, tol=1e-8):
    """Newton ascent of the Bernoulli log-likelihood with step-halving.

    Diverging coefficients (perfect separation, constant response) are
    flagged as non-converged rather than raised; a singular information
    matrix is an error naming the offending column.
    """
    X, y, columns = design.X, design.y, design.columns
    n, k = X.shape
    if n <= k:
        raise ValueError("need more rows than columns to fit")
    if not np.isin(y, (0.0, 1.0)).all():
        raise ValueError("logistic response must be binary")

    beta = np.zeros(k)
    ll = logistic_log_likelihood(X, y, beta)
    converged = False
    diagnostics = []
    iterations = 0
    for iterations in range(1, max_iter + 1):
        eta = X @ beta
        prob = 1.0 / (1.0 + np.exp(-eta))
        g = X.T @ (y - prob)
        W = prob * (1.0 - prob)
        H = X.T @ (X * W[:, None])
        step = _solve_information(H, g, columns)
        scale = 1.0
        for _ in range(40):
            candidate = beta + scale * step
            ll_new = logistic_log_likelihood(X, y, candidate)
            if ll_new >= ll:
                break
            scale /= 2.0
        else:
            candidate, ll_new = beta, ll
        delta = np.max(np.abs(candidate - beta))
        beta, ll = candidate, ll_new
        if np.max(np.abs(beta)) > _DIVERGENCE_BOUND:
            diagnostics.append(
                "coefficients diverging: possible perfect separation or "
                "constant response"
            )
            break
        if delta < tol:
            converged = True
            break

    eta = X @ beta
    prob = 1.0 / (1.0 + np.exp(-eta))
    W = prob * (1.0 - prob)
    H = X.T @ (X * W[:, None])
    cov = _invert_information(H, columns)
    se, z, p = _wald(beta, cov)
    return RegressionFit(
        columns=list(columns), beta=beta, se=se, z=z, p=p,
        log_likelihood=ll, converged=converged, iterations=iterations,
        diagnostics=diagnostics,
    )


# ---------------------------------------------------------------------------
# Poisson regression (negative binomial starting point)
# ---------------------------------------------------------------------------

def poisson_log_likelihood(X, y, beta):
    eta = X @ beta
    return float(np.sum(y * eta - np.exp(eta) - gammaln(y + 1.0)))


def fit_poisson_beta(X, y, columns, max_iter=100, tol=1e-10):
    beta = np.zeros(X.shape[1])
    # start the intercept at log(mean) so exp(eta) is well-scaled
    ybar = max(float(np.mean(y)), 1e-8)
    beta[0] = math.log(ybar)
    ll = poisson_log_likelihood(X, y, beta)
    for _ in range(max_iter):
        mu = np.exp(X @ beta)
        g = X.T @ (y - mu)
        H = X.T @ (X * mu[:, None])
        step = _solve_information(H, g, columns)
        scale = 1.0
        for _ in range(40):
            candidate = beta + scale * step
            ll_new = poisson_log_likelihood(X, y, candidate)
            if ll_new >= ll:
                break
            scale /= 2.0
        else:
            candidate, ll_new = beta, ll
        if ll_new - ll < tol:
            beta, ll = candidate, ll_new
            break
        beta, ll = candidate, ll_new
    return beta, ll


# ---------------------------------------------------------------------------
# Negative binomial (NB2) regression
# ---------------------------------------------------------------------------

def negbin_log_likelihood(X, y, beta, alpha):
    mu = np.exp(X @ beta)
    inv = 1.0 / alpha
    # xlogy keeps the y = 0 terms at exactly zero even when alpha*mu underflows
    return float(np.sum(
        gammaln(y + inv) - gammaln(inv) - gammaln(y + 1.0)
        - inv * np.log1p(alpha * mu)
        + xlogy(y, alpha * mu / (1.0 + alpha * mu))
    ))


def negbin_gradient(X, y, beta, alpha):
    """Analytic gradient (d/d beta, d/d alpha) of the NB2 log-likelihood."""
    mu = np.exp(X @ beta)
    denom = 1.0 + alpha * mu
    g_beta = X.T @ ((y - mu) / denom)
    inv = 1.0 / alpha
    g_alpha = float(np.sum(
        (digamma(inv) - digamma(y + inv) + np.log1p(alpha * mu)) * inv ** 2
        + (y - mu) / (alpha * denom)
    ))
    return g_beta, g_alpha


def _moment_alpha(y, mu):
    num = float(np.sum((y - mu) ** 2 - mu))
    den = float(np.sum(mu ** 2))
    return max(num / den if den > 0 else ALPHA_FLOOR, ALPHA_FLOOR)


def fit_negbin(design, max_iter=200, tol=1e-10):
    """NB2 fit alternating Newton steps on beta with a safeguarded 1-D
    Newton step on log(alpha), keeping the log-likelihood monotone.

    alpha starts from the Poisson method-of-moments estimate and is floored
    at 1e-8; an alpha stuck at the floor is reported with a Poisson-limit
    diagnostic. Standard errors come from the observed information over
    (beta, alpha), obtained by differencing the analytic gradient.
    """
    X, y, columns = design.X, design.y, design.columns
    n, k = X.shape
    if n <= k + 1:
        raise ValueError("need more rows than parameters to fit")
    if (y < 0).any() or not np.allclose(y, np.round(y)):
        raise ValueError("negative binomial response must be counts")
    if not y.any():
        raise ValueError("all-zero response: dispersion is unidentifiable")

    beta, _ = fit_poisson_beta(X, y, columns)
    alpha = _moment_alpha(y, np.exp(X @ beta))
    ll = negbin_log_likelihood(X, y, beta, alpha)
    converged = False
    diagnostics = []
    iterations = 0

    for iterations in range(1, max_iter + 1):
        ll_start = ll

        # beta step at fixed alpha (observed information weights)
        mu = np.exp(X @ beta)
        denom = 1.0 + alpha * mu
        g = X.T @ ((y - mu) / denom)
        W = mu * (1.0 + alpha * y) / denom ** 2
        H = X.T @ (X * W[:, None])
        step = _solve_information(H, g, columns)
        scale = 1.0
        for _ in range(40):
            candidate = beta + scale * step
            ll_new = negbin_log_likelihood(X, y, candidate, alpha)
            if ll_new >= ll:
                beta, ll = candidate, ll_new
                break
            scale /= 2.0

        # log(alpha) step at fixed beta
        t = math.log(alpha)
        _, g_alpha = negbin_gradient(X, y, beta, alpha)
        g_t = alpha * g_alpha
        h = 1e-5 * max(1.0, abs(t))
        _, ga_plus = negbin_gradient(X, y, beta, math.exp(t + h))
        _, ga_minus = negbin_gradient(X, y, beta, math.exp(t - h))
        d2_t = (math.exp(t + h) * ga_plus - math.exp(t - h) * ga_minus) / (2 * h)
        if d2_t < -1e-12:
            dt = -g_t / d2_t
        else:
            dt = math.copysign(0.5, g_t)  # non-concave region: bounded ascent
        dt = max(min(dt, 2.0), -2.0)
        scale = 1.0
        for _ in range(40):
            alpha_new = max(math.exp(t + scale * dt), ALPHA_FLOOR)
            ll_new = negbin_log_likelihood(X, y, beta, alpha_new)
            if ll_new >= ll:
                alpha, ll = alpha_new, ll_new
                break
            scale /= 2.0

        if ll - ll_start < tol:
            converged = True
            break

    if alpha <= ALPHA_FLOOR * (1 + 1e-6):
        diagnostics.append(
            "alpha at floor: data shows no overdispersion (Poisson limit)"
        )

    cov = _negbin_covariance(X, y, beta, alpha, columns)
    se, z, p = _wald(beta, cov[:k, :k])
    alpha_se = float(np.sqrt(max(cov[k, k], 0.0))) if cov.shape[0] > k else None
    return RegressionFit(
        columns=list(columns), beta=beta, se=se, z=z, p=p,
        log_likelihood=ll, converged=converged, iterations=iterations,
        alpha=float(alpha), alpha_se=alpha_se, diagnostics=diagnostics,
    )


def _negbin_covariance(X, y, beta, alpha, columns):
    """Inverse observed information over (beta, alpha), with the Hessian
    formed by central differences of the analytic gradient."""
    k = X.shape[1]
    params = np.append(beta, alpha)

    def gradient(theta):
        b, a = theta[:k], max(theta[k], ALPHA_FLOOR / 10)
        g_beta, g_alpha = negbin_gradient(X, y, b, a)
        return np.append(g_beta, g_alpha)

    H = np.zeros((k + 1, k + 1))
    for j in range(k + 1):
        h = 1e-6 * max(1.0, abs(params[j]))
        if j == k:
            h = max(1e-6 * params[j], 1e-10)
        up = params.copy()
        down = params.copy()
        up[j] += h
        down[j] -= h
        H[:, j] = (gradient(up) - gradient(down)) / (2 * h)
    H = -(H + H.T) / 2.0  # symmetrized observed information
    try:
        return np.linalg.inv(H)
    except np.linalg.LinAlgError:
        return np.linalg.pinv(H)


# ---------------------------------------------------------------------------
# Effect-size transforms and reporting
# ---------------------------------------------------------------------------

def rate_ratio_percent(b):
    """Percent change in the expected count for a unit increase, to one
    decimal: (exp(b) - 1) * 100."""
    return round((math.exp(b) - 1.0) * 100.0, 1)


def doubling_odds_percent(b):
    """Odds multiplier, as a whole percent of the original, when a log2
    covariate doubles: 2**b * 100."""
    return round(2.0 ** b * 100.0)


def significance_stars(p):
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    return ""


def fit_to_rows(fit):
    """Rows for the fit-report CSV: one per coefficient plus footer rows."""
    rows = []
    for name, b, s, zv, pv in zip(fit.columns, fit.beta, fit.se, fit.z, fit.p):
        rows.append({
            "name": name,
            "beta": float(b),
            "se": float(s),
            "z": float(zv),
            "p": float(pv),
            "stars": significance_stars(float(pv)),
        })
    if fit.alpha is not None:
        rows.append({
            "name": "alpha",
            "beta": fit.alpha,
            "se": fit.alpha_se if fit.alpha_se is not None else "",
            "z": "", "p": "", "stars": "",
        })
    rows.append({
        "name": "log_likelihood",
        "beta": fit.log_likelihood,
        "se": "", "z": "", "p": "", "stars": "",
    })
    return rows
