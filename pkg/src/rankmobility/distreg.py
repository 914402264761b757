"""Distribution-regression estimator of the upward mobility curve.

For each threshold y1 on the child-income scale, fit a binary MLE of
1{child <= y1} on a polynomial basis in parent income (logit or probit
link).  The curve value at parent rank s with upward shift tau is then

    1 - F( basis(Q0(s))' theta(Q1(s + tau)) )

with Q0, Q1 the empirical parent/child quantile functions.  A grouped
variant interacts the full basis with group indicators while keeping
the quantile anchors pooled, so group curves stay on a common scale.

Fitting is Fisher scoring with step halving, run simultaneously for all
thresholds a curve needs: one shared design matrix, an (n, T) indicator
matrix, and batched p x p solves.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .curves import CurveEstimate, default_grid, validate_grid
from .errors import DomainError, EstimationError, InputError, UnfittedThresholdError
from .ranks import Sample, empirical_quantile

__all__ = [
    "DRSpec",
    "ThresholdFit",
    "DRFit",
    "WarmStartCache",
    "fit_threshold",
    "fit_dr",
    "dr_curve",
    "dr_curve_conditional",
]

_LINKS = ("logit", "probit")
_DESIGNS = ("linear", "quadratic")

_PROB_EPS = 1e-10
_SEP_EPS = 1e-6
_COEF_NORM_LIMIT = 1e6


@dataclass(frozen=True)
class DRSpec:
    """Link and parent-income basis for the distribution regression."""

    link: str = "logit"
    design: str = "linear"

    def __post_init__(self):
        if self.link not in _LINKS:
            raise DomainError(f"link must be one of {_LINKS}, got {self.link!r}")
        if self.design not in _DESIGNS:
            raise DomainError(f"design must be one of {_DESIGNS}, got {self.design!r}")

    @property
    def basis_dim(self) -> int:
        return 2 if self.design == "linear" else 3

    @property
    def tag(self) -> str:
        return f"dr({self.link},{self.design})"


def _basis(spec: DRSpec, y0: np.ndarray) -> np.ndarray:
    y0 = np.asarray(y0, dtype=np.float64)
    cols = [np.ones_like(y0), y0]
    if spec.design == "quadratic":
        cols.append(y0 * y0)
    return np.column_stack(cols)


def _grouped_design(spec: DRSpec, y0: np.ndarray, groups: np.ndarray, labels: tuple):
    """Full interaction: one basis block per group label, no shared terms."""
    base = _basis(spec, y0)
    p = base.shape[1]
    X = np.zeros((base.shape[0], p * len(labels)))
    intercept_cols = []
    for j, lab in enumerate(labels):
        mask = groups == lab
        X[mask, j * p : (j + 1) * p] = base[mask]
        intercept_cols.append(j * p)
    return X, intercept_cols


def _grouped_row(spec: DRSpec, y0: float, labels: tuple, label: str) -> np.ndarray:
    row = np.zeros(spec.basis_dim * len(labels))
    j = labels.index(label)
    row[j * spec.basis_dim : (j + 1) * spec.basis_dim] = _basis(
        spec, np.array([y0])
    )[0]
    return row


def _inverse_link(link: str, p: np.ndarray) -> np.ndarray:
    if link == "logit":
        return special.logit(p)
    return special.ndtri(p)


def _normal_pdf(x: np.ndarray) -> np.ndarray:
    return np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def _link_cdf(link: str, eta: np.ndarray) -> np.ndarray:
    return special.expit(eta) if link == "logit" else special.ndtr(eta)


def _loglik_from_p(Pc: np.ndarray, Wb: np.ndarray) -> np.ndarray:
    """Bernoulli log likelihood per column from clipped probabilities.

    Wb is the boolean indicator; each log is evaluated only on the
    branch that needs it.
    """
    out = np.empty_like(Pc)
    np.log(Pc, out=out, where=Wb)
    np.log1p(-Pc, out=out, where=~Wb)
    return out.sum(axis=0)


def _loglik(eta: np.ndarray, W: np.ndarray, link: str) -> np.ndarray:
    Pc = np.clip(_link_cdf(link, eta), _PROB_EPS, 1.0 - _PROB_EPS)
    return _loglik_from_p(Pc, np.asarray(W) != 0.0)


def _fit_binary_batch(
    X: np.ndarray,
    W: np.ndarray,
    link: str,
    intercept_cols,
    tol: float = 1e-8,
    max_iter: int = 100,
    init_coef: np.ndarray | None = None,
):
    """Fisher scoring for T binary regressions sharing one design.

    X is (n, p); W is an (n, T) float 0/1 indicator matrix, every
    column non-degenerate.  Columns of X that are not {0,1}-valued are
    standardized internally; coefficients are mapped back, with the
    centering constant absorbed into ``intercept_cols`` (which must be
    active exactly once per row).

    ``init_coef`` (T, p), on the original scale, seeds the iteration;
    rows with non-finite entries fall back to the intercept-only start.
    Step halving makes any start safe, so warm starts from a nearby
    fit change the iteration path but not the fixed point.

    Returns coef (T, p), iterations, grad_norm, converged, separated.
    """
    n, p = X.shape
    T = W.shape[1]
    binary = np.array([np.all((X[:, j] == 0.0) | (X[:, j] == 1.0)) for j in range(p)])
    mu = np.where(binary, 0.0, X.mean(axis=0))
    sd = X.std(axis=0)
    sd = np.where(binary | (sd == 0.0), 1.0, sd)
    Xs = (X - mu) / sd

    pbar = np.clip(W.mean(axis=0), _PROB_EPS, 1.0 - _PROB_EPS)
    coef = np.zeros((T, p))
    coef[:, intercept_cols] = _inverse_link(link, pbar)[:, None]
    if init_coef is not None:
        start = np.asarray(init_coef, dtype=np.float64)
        shift0 = (start[:, ~binary] * mu[~binary]).sum(axis=1)
        start = start * sd
        start[:, intercept_cols] += shift0[:, None] * sd[intercept_cols]
        ok_rows = np.isfinite(start).all(axis=1)
        coef[ok_rows] = start[ok_rows]

    iterations = np.zeros(T, dtype=np.int64)
    converged = np.zeros(T, dtype=bool)
    grad_norm = np.full(T, np.inf)

    # Only still-unconverged columns are carried through an iteration,
    # and eta / P for those columns are reused from the accepted step
    # instead of being recomputed; per-column arithmetic is unchanged,
    # so results do not depend on when other columns drop out.
    act = np.arange(T)
    Wb = W != 0.0
    eta = Xs @ coef.T
    P = _link_cdf(link, eta)
    Pc = np.clip(P, _PROB_EPS, 1.0 - _PROB_EPS)
    ll = _loglik_from_p(Pc, Wb)

    for _ in range(max_iter):
        Wa = W[:, act]
        if link == "logit":
            resid = Wa - P
            iw = Pc * (1.0 - Pc)
        else:
            dens = _normal_pdf(eta)
            ratio = dens / (Pc * (1.0 - Pc))
            resid = ratio * (Wa - P)
            iw = ratio * dens
        G = Xs.T @ resid  # (p, a)
        gn = np.abs(G).max(axis=0)
        grad_norm[act] = gn
        hit = gn <= tol
        converged[act[hit]] = True
        keep = ~hit
        if hit.any():
            act, G, iw = act[keep], G[:, keep], iw[:, keep]
            eta, P, Pc, ll = eta[:, keep], P[:, keep], Pc[:, keep], ll[keep]
        if act.size == 0:
            break

        H = np.einsum("ni,nt,nj->tij", Xs, iw, Xs, optimize=True)
        rhs = G.T
        try:
            step = np.linalg.solve(H, rhs[:, :, None])[:, :, 0]
        except np.linalg.LinAlgError:
            step = np.stack(
                [np.linalg.lstsq(H[t], rhs[t], rcond=None)[0] for t in range(act.size)]
            )

        # Step halving: never move to a measurably lower likelihood.
        # The slack is float noise on the log-likelihood scale; without
        # it, steps whose true gain is below resolution get rejected
        # and the iteration stalls just above the gradient tolerance.
        Wba = Wb[:, act]
        slack = 1e-11 * (1.0 + np.abs(ll))
        lam = np.ones(act.size)
        accepted = np.zeros(act.size, dtype=bool)
        new_coef = coef[act].copy()
        for _ in range(31):
            trial = coef[act] + lam[:, None] * step
            eta_trial = Xs @ trial.T
            P_trial = _link_cdf(link, eta_trial)
            Pc_trial = np.clip(P_trial, _PROB_EPS, 1.0 - _PROB_EPS)
            ll_trial = _loglik_from_p(Pc_trial, Wba)
            ok = ~accepted & (ll_trial >= ll - slack)
            new_coef[ok] = trial[ok]
            eta[:, ok] = eta_trial[:, ok]
            P[:, ok] = P_trial[:, ok]
            Pc[:, ok] = Pc_trial[:, ok]
            ll[ok] = ll_trial[ok]
            accepted |= ok
            if accepted.all():
                break
            lam[~accepted] /= 2.0
        coef[act] = new_coef
        iterations[act] += 1

    # Final gradient for columns that exhausted the cap.
    if act.size:
        if link == "logit":
            resid = W[:, act] - P
        else:
            resid = _normal_pdf(eta) * (W[:, act] - P) / (Pc * (1.0 - Pc))
        grad_norm[act] = np.abs(Xs.T @ resid).max(axis=0)

    # Separation diagnostics on the final fit.  A separated fit can
    # still zero its gradient once the link saturates in float, so the
    # check is independent of the convergence bit: every probability
    # pinned to {0,1} means the data are (quasi-)perfectly classified
    # and the reported coefficients are not an interior optimum.
    P_all = _link_cdf(link, Xs @ coef.T)
    near_degenerate = np.minimum(P_all, 1.0 - P_all).max(axis=0) < _SEP_EPS
    big = np.abs(coef).max(axis=1) > _COEF_NORM_LIMIT
    separated = near_degenerate | big

    # Back to the original scale.  Exactly one intercept column is
    # active per row, so the full centering constant is subtracted from
    # each of them.
    shift = (coef[:, ~binary] * (mu[~binary] / sd[~binary])).sum(axis=1)
    coef_orig = coef / sd
    coef_orig[:, intercept_cols] -= shift[:, None]

    if separated.any():
        # The full MLE does not exist for these columns, and a pinned
        # fit predicts certainty at the quantile anchors, which wrecks
        # the curve at extreme thresholds.  Fall back to the intercept-
        # only solution (slopes zero, each intercept block at its own
        # class rate), which always exists; the flag is kept.
        idx = np.nonzero(separated)[0]
        coef_orig[idx] = 0.0
        for j in intercept_cols:
            rows = X[:, j] != 0.0
            if rows.any():
                rate = np.clip(
                    W[np.ix_(rows, idx)].mean(axis=0), _PROB_EPS, 1.0 - _PROB_EPS
                )
                coef_orig[idx, j] = _inverse_link(link, rate)
    return coef_orig, iterations, grad_norm, converged, separated


@dataclass(frozen=True)
class ThresholdFit:
    """Single-threshold binary fit: coefficients plus diagnostics."""

    threshold: float
    coef: np.ndarray
    iterations: int
    grad_norm: float
    converged: bool
    separated: bool


@dataclass
class DRFit:
    """Fitted coefficients for a set of thresholds, with lazy extension.

    Acts as the threshold cache: ``conditional_cdf`` looks a threshold
    up by exact value and, when ``fit_on_demand`` is set, fits missing
    ones against the stored sample and inserts them.
    """

    spec: DRSpec
    thresholds: np.ndarray
    coef: np.ndarray
    iterations: np.ndarray
    grad_norm: np.ndarray
    converged: np.ndarray
    separated: np.ndarray
    degenerate: np.ndarray
    degenerate_value: np.ndarray
    labels: tuple | None = None
    fit_on_demand: bool = False
    sample: Sample | None = field(default=None, repr=False)

    @property
    def n_thresholds(self) -> int:
        return int(self.thresholds.size)

    def _locate(self, y1: float) -> int:
        i = int(np.searchsorted(self.thresholds, y1))
        if i < self.thresholds.size and self.thresholds[i] == y1:
            return i
        if not self.fit_on_demand:
            raise UnfittedThresholdError(
                f"threshold {y1!r} was not fitted (on-demand fitting disabled)"
            )
        if self.sample is None:
            raise EstimationError("on-demand fitting requires the training sample")
        other = fit_dr(
            self.sample,
            self.spec,
            np.array([y1]),
            by_group=self.labels is not None,
        )
        for name in (
            "thresholds",
            "coef",
            "iterations",
            "grad_norm",
            "converged",
            "separated",
            "degenerate",
            "degenerate_value",
        ):
            merged = np.insert(getattr(self, name), i, getattr(other, name)[0], axis=0)
            setattr(self, name, merged)
        return i

    def conditional_cdf(self, y1: float, y0: float, group: str | None = None) -> float:
        """P(child <= y1 | parent = y0 [, group]) under the fitted model.

        Strictly inside (0, 1): fitted probabilities are clamped away
        from the endpoints, and degenerate thresholds return their
        clamped sample frequency.
        """
        i = self._locate(float(y1))
        if self.degenerate[i]:
            return float(self.degenerate_value[i])
        if self.labels is None:
            if group is not None:
                raise DomainError("fit has no group structure")
            row = _basis(self.spec, np.array([float(y0)]))[0]
        else:
            if group is None:
                raise DomainError("grouped fit requires a group label")
            if group not in self.labels:
                raise InputError(f"unknown group {group!r}; fitted {self.labels}")
            row = _grouped_row(self.spec, float(y0), self.labels, group)
        eta = float(row @ self.coef[i])
        p = special.expit(eta) if self.spec.link == "logit" else special.ndtr(eta)
        return float(np.clip(p, _PROB_EPS, 1.0 - _PROB_EPS))


def _map_init(init: "DRFit", thr: np.ndarray, spec: DRSpec, labels, p: int):
    """Starting coefficients for ``thr`` taken from a previous fit.

    Each new threshold borrows the coefficients of the nearest fitted
    one.  Returns None when the previous fit has a different design
    (spec or group structure), or has no usable rows.
    """
    if init.spec != spec or init.labels != labels or init.coef.shape[1] != p:
        return None
    usable = ~init.degenerate & ~init.separated
    if not usable.any():
        return None
    src_thr = init.thresholds[usable]
    src_coef = init.coef[usable]
    if src_thr.size == 1:
        return np.broadcast_to(src_coef[0], (thr.size, p)).copy()
    pos = np.searchsorted(src_thr, thr).clip(1, src_thr.size - 1)
    left = pos - 1
    pick = np.where(np.abs(src_thr[left] - thr) <= np.abs(src_thr[pos] - thr), left, pos)
    return src_coef[pick]


def fit_dr(
    sample: Sample,
    spec: DRSpec,
    thresholds,
    by_group: bool = False,
    init: "DRFit | None" = None,
) -> DRFit:
    """Fit the binary regressions for a sorted set of child thresholds.

    Degenerate thresholds (indicator constant across the sample) are
    not fitted; they carry a flag and the clamped frequency instead.
    ``init`` warm-starts the iteration from a compatible previous fit
    (useful across bootstrap resamples); it never changes what the
    fit converges to, only how fast.
    """
    thr = np.unique(np.asarray(thresholds, dtype=np.float64))
    if thr.size == 0:
        raise DomainError("need at least one threshold")
    if not np.all(np.isfinite(thr)):
        raise DomainError("thresholds must be finite")
    labels = None
    if by_group:
        if sample.group is None:
            raise InputError("sample has no group labels")
        labels = sample.group_labels()
        X, intercept_cols = _grouped_design(spec, sample.parent, sample.group, labels)
    else:
        X = _basis(spec, sample.parent)
        intercept_cols = [0]

    W = (sample.child[:, None] <= thr[None, :]).astype(np.float64)
    wbar = W.mean(axis=0)
    degenerate = (wbar == 0.0) | (wbar == 1.0)
    T = thr.size
    p = X.shape[1]

    coef = np.zeros((T, p))
    iterations = np.zeros(T, dtype=np.int64)
    grad_norm = np.zeros(T)
    converged = np.zeros(T, dtype=bool)
    separated = np.zeros(T, dtype=bool)
    degenerate_value = np.full(T, np.nan)
    degenerate_value[degenerate] = np.clip(
        wbar[degenerate], _PROB_EPS, 1.0 - _PROB_EPS
    )

    live = ~degenerate
    if live.any():
        init_coef = None
        if init is not None:
            init_coef = _map_init(init, thr[live], spec, labels, p)
        out = _fit_binary_batch(
            X, W[:, live], spec.link, intercept_cols, init_coef=init_coef
        )
        coef[live], iterations[live], grad_norm[live], converged[live], separated[live] = out

    return DRFit(
        spec=spec,
        thresholds=thr,
        coef=coef,
        iterations=iterations,
        grad_norm=grad_norm,
        converged=converged,
        separated=separated,
        degenerate=degenerate,
        degenerate_value=degenerate_value,
        labels=labels,
        sample=sample,
    )


def fit_threshold(sample: Sample, spec: DRSpec, y1: float) -> ThresholdFit:
    """Fit the binary regression at a single child-income threshold."""
    w = sample.child <= y1
    if w.all() or not w.any():
        raise EstimationError(
            f"degenerate threshold {y1!r}: indicator is constant over the sample"
        )
    fit = fit_dr(sample, spec, np.array([y1]))
    return ThresholdFit(
        threshold=float(y1),
        coef=fit.coef[0],
        iterations=int(fit.iterations[0]),
        grad_norm=float(fit.grad_norm[0]),
        converged=bool(fit.converged[0]),
        separated=bool(fit.separated[0]),
    )


def _assemble_curve(fit, spec, g, tau, q0, q1, n, rows, tag, warnings=()):
    idx = np.searchsorted(fit.thresholds, q1)
    eta = np.einsum("gp,gp->g", rows, fit.coef[idx])
    p = special.expit(eta) if spec.link == "logit" else special.ndtr(eta)
    p = np.clip(p, _PROB_EPS, 1.0 - _PROB_EPS)
    flags = []
    for j, i in enumerate(idx):
        if fit.degenerate[i]:
            p[j] = fit.degenerate_value[i]
            flags.append("degenerate-threshold")
        elif fit.separated[i]:
            flags.append("separation")
        elif not fit.converged[i]:
            flags.append("non-converged")
        else:
            flags.append("")
    return CurveEstimate(g, 1.0 - p, tau, tag, n, flags=tuple(flags), warnings=warnings)


class WarmStartCache:
    """Carries the latest DRFit between repeated curve estimations.

    Pass one instance through a bootstrap loop: each fit starts from
    the previous resample's coefficients instead of from scratch.
    """

    def __init__(self):
        self.fit: DRFit | None = None


def dr_curve(
    sample: Sample, spec: DRSpec, tau: float, grid=None, warm: WarmStartCache | None = None
) -> CurveEstimate:
    """Distribution-regression mobility curve on a rank grid.

    Thresholds are the empirical child quantiles at ``grid + tau``;
    evaluation points are the empirical parent quantiles at ``grid``.
    """
    if grid is None:
        grid = default_grid(tau)
    g = validate_grid(grid, tau)
    q0 = empirical_quantile(sample.parent, g)
    q1 = empirical_quantile(sample.child, g + tau)
    fit = fit_dr(sample, spec, np.unique(q1), init=warm.fit if warm else None)
    if warm is not None:
        warm.fit = fit
    rows = _basis(spec, q0)
    return _assemble_curve(fit, spec, g, tau, q0, q1, sample.n, rows, spec.tag)


def _conditional_curves_shared_fit(
    sample: Sample, spec: DRSpec, groups, tau: float, g: np.ndarray, init=None
):
    """One grouped fit evaluated as a curve per requested group label."""
    labels = sample.group_labels()
    q0 = empirical_quantile(sample.parent, g)
    q1 = empirical_quantile(sample.child, g + tau)
    fit = fit_dr(sample, spec, np.unique(q1), by_group=True, init=init)
    curves = []
    for group in groups:
        rows = np.stack([_grouped_row(spec, y, labels, group) for y in q0])
        tag = f"dr({spec.link},{spec.design}|group={group})"
        curves.append(_assemble_curve(fit, spec, g, tau, q0, q1, sample.n, rows, tag))
    return fit, curves


def dr_curve_conditional(
    sample: Sample,
    spec: DRSpec,
    group: str,
    tau: float,
    grid=None,
    min_group_size: int = 30,
) -> CurveEstimate:
    """Group-specific mobility curve with pooled rank anchors.

    The model interacts the basis with every group label; quantiles
    (both margins) always come from the pooled sample, so curves for
    different groups answer "upward relative to the whole population".
    """
    if sample.group is None:
        raise InputError("sample has no group column")
    labels = sample.group_labels()
    if group not in labels:
        raise InputError(f"unknown group {group!r}; sample has {labels}")
    if grid is None:
        grid = default_grid(tau)
    g = validate_grid(grid, tau)
    _, (curve,) = _conditional_curves_shared_fit(sample, spec, (group,), tau, g)
    count = int((sample.group == group).sum())
    if count < min_group_size:
        curve = dataclasses.replace(
            curve,
            warnings=(
                f"group {group!r} has only {count} observations (< {min_group_size})",
            ),
        )
    return curve
