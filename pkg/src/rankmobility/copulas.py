"""Parametric copula families used as simulation truths.

Each family exposes the joint CDF, the conditional CDF of the child
rank given the parent rank (the partial derivative in the first
argument), exact samplers, Kendall's tau calibration, and the
smoothing bias/variance functionals that drive the optimal Bernstein
order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .curves import CurveEstimate, default_grid, validate_grid
from .errors import DomainError
from .ranks import Sample

__all__ = [
    "Copula",
    "IndependenceCopula",
    "GaussianCopula",
    "ClaytonCopula",
    "GumbelCopula",
    "make_copula",
]

_BOUNDARY_EPS = 1e-6


def _phi2(h: float, k: float, rho: float) -> float:
    """Standard bivariate normal CDF P(X <= h, Y <= k) at correlation rho.

    Owen's T representation; accurate to near machine precision, which
    the finite-difference identity between cdf and cond_cdf relies on.
    """
    if rho == 0.0:
        return special.ndtr(h) * special.ndtr(k)
    if h == -math.inf or k == -math.inf:
        return 0.0
    if h == math.inf:
        return float(special.ndtr(k))
    if k == math.inf:
        return float(special.ndtr(h))
    denom = math.sqrt(1.0 - rho * rho)
    if h == 0.0 and k == 0.0:
        return 0.25 + math.asin(rho) / (2.0 * math.pi)
    if h == 0.0:
        return 0.5 * special.ndtr(k) + float(special.owens_t(k, rho / denom))
    if k == 0.0:
        return 0.5 * special.ndtr(h) + float(special.owens_t(h, rho / denom))
    t1 = special.owens_t(h, (k - rho * h) / (h * denom))
    t2 = special.owens_t(k, (h - rho * k) / (k * denom))
    beta = 0.5 if h * k < 0 or (h * k == 0.0 and h + k < 0) else 0.0
    return 0.5 * (special.ndtr(h) + special.ndtr(k)) - float(t1) - float(t2) - beta


_phi2_vec = np.vectorize(_phi2, otypes=[np.float64])


def _unit_interval(u, name: str, open_interval: bool) -> np.ndarray:
    arr = np.asarray(u, dtype=np.float64)
    if open_interval:
        bad = (arr <= 0.0) | (arr >= 1.0)
    else:
        bad = (arr < 0.0) | (arr > 1.0)
    if np.any(bad) or not np.all(np.isfinite(arr)):
        bounds = "(0, 1)" if open_interval else "[0, 1]"
        raise DomainError(f"{name} must lie in {bounds}")
    return arr


def _maybe_scalar(out: np.ndarray, *inputs):
    if all(np.isscalar(x) or np.ndim(x) == 0 for x in inputs):
        return float(out)
    return out


class Copula:
    """Bivariate copula with the operations the estimators need."""

    family: str = "abstract"

    # --- family-specific interior formulas -------------------------------

    def _cdf_interior(self, u0: np.ndarray, u1: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _cond_interior(self, u0: np.ndarray, u1: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _sample_uniform(self, n: int, rng: np.random.Generator) -> tuple:
        raise NotImplementedError

    def kendall_tau(self) -> float:
        raise NotImplementedError

    # --- shared surface ---------------------------------------------------

    def cdf(self, u0, u1):
        """Joint CDF C(u0, u1) with exact boundary handling."""
        a0 = _unit_interval(u0, "u0", open_interval=False)
        a1 = _unit_interval(u1, "u1", open_interval=False)
        a0, a1 = np.broadcast_arrays(a0, a1)
        out = np.empty(a0.shape, dtype=np.float64)
        zero = (a0 == 0.0) | (a1 == 0.0)
        top0 = (a0 == 1.0) & ~zero
        top1 = (a1 == 1.0) & ~zero & ~top0
        interior = ~(zero | top0 | top1)
        out[zero] = 0.0
        out[top0] = a1[top0]
        out[top1] = a0[top1]
        if interior.any():
            out[interior] = self._cdf_interior(a0[interior], a1[interior])
        return _maybe_scalar(out, u0, u1)

    def cond_cdf(self, u0, u1):
        """Conditional CDF of the child rank at u1 given parent rank u0.

        This is dC/du0; both arguments must be strictly interior.
        """
        a0 = _unit_interval(u0, "u0", open_interval=True)
        a1 = _unit_interval(u1, "u1", open_interval=True)
        a0, a1 = np.broadcast_arrays(a0, a1)
        out = np.asarray(self._cond_interior(a0, a1), dtype=np.float64)
        return _maybe_scalar(out, u0, u1)

    def sample(self, n: int, rng=None, marginal: str = "normal") -> Sample:
        """Draw n pairs from the copula with the given margins.

        marginal "normal" pushes the uniforms through the standard
        normal quantile (rank statistics are unaffected by this choice);
        "uniform" returns the raw copula draws.
        """
        if n < 1:
            raise DomainError(f"sample size must be >= 1, got {n}")
        if marginal not in ("normal", "uniform"):
            raise DomainError(f"unknown marginal {marginal!r}")
        gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        v0, v1 = self._sample_uniform(n, gen)
        if marginal == "normal":
            v0 = special.ndtri(v0)
            v1 = special.ndtri(v1)
        return Sample(v0, v1)

    def true_curve(self, tau: float, grid=None) -> CurveEstimate:
        """Model-implied upward mobility curve 1 - cond_cdf(s, s + tau)."""
        if grid is None:
            grid = default_grid(tau)
        g = validate_grid(grid, tau)
        values = 1.0 - self.cond_cdf(g, g + tau)
        return CurveEstimate(g, values, tau, f"true({self.family})", 0)

    def smoothing_bias(self, u0: float, u1: float) -> float:
        """Leading bias functional of the Bernstein copula derivative.

        (1-2*u0) C_200 + u0(1-u0) C_000 + u1(1-u1) C_011 in subscript-
        derivative notation, evaluated by central finite differences of
        the conditional CDF.  Steps shrink near the boundary; points
        within 1e-6 of {0, 1} are rejected.
        """
        u0 = float(u0)
        u1 = float(u1)
        for u, name in ((u0, "u0"), (u1, "u1")):
            if not (_BOUNDARY_EPS < u < 1.0 - _BOUNDARY_EPS):
                raise DomainError(
                    f"{name}={u:g} is within {_BOUNDARY_EPS:g} of the boundary"
                )
        h1 = min(1e-4, u0 / 2, (1.0 - u0) / 2)
        h2 = min(1e-3, u0 / 2, (1.0 - u0) / 2, u1 / 2, (1.0 - u1) / 2)
        c = self.cond_cdf
        d1 = (c(u0 + h1, u1) - c(u0 - h1, u1)) / (2.0 * h1)
        d2_00 = (c(u0 + h2, u1) - 2.0 * c(u0, u1) + c(u0 - h2, u1)) / (h2 * h2)
        d2_11 = (c(u0, u1 + h2) - 2.0 * c(u0, u1) + c(u0, u1 - h2)) / (h2 * h2)
        return float(
            (1.0 - 2.0 * u0) * d1 + u0 * (1.0 - u0) * d2_00 + u1 * (1.0 - u1) * d2_11
        )

    def smoothing_variance(self, u0: float, u1: float) -> float:
        """Leading variance functional of the Bernstein copula derivative."""
        u0 = float(u0)
        if not (0.0 < u0 < 1.0):
            raise DomainError("u0 must lie strictly inside (0, 1)")
        p = float(self.cond_cdf(u0, u1))
        return p * (1.0 - p) / (2.0 * math.sqrt(math.pi * u0 * (1.0 - u0)))

    def optimal_order(self, tau: float, s: float, n: int) -> int:
        """AMSE-optimal Bernstein order at one curve point.

        ceil((b^2 / sigma^2)^(2/5) * n^(2/5)) clamped to [2, n]; a bias
        that vanishes numerically (|b| < 1e-8) yields order 2.  The
        ceiling backs off by one ulp-scale factor so ratios that are
        integers up to float noise do not round up.
        """
        if n < 2:
            raise DomainError(f"need n >= 2 for an optimal order, got {n}")
        b = self.smoothing_bias(s, s + tau)
        if abs(b) < 1e-8:
            return 2
        var = self.smoothing_variance(s, s + tau)
        if var == 0.0:
            raise DomainError(
                f"degenerate conditional at (s, s+tau)=({s:g}, {s + tau:g}): "
                "zero variance with nonzero bias"
            )
        ratio = (b * b / var) ** 0.4 * n ** 0.4
        m = math.ceil(ratio * (1.0 - 1e-12))
        return int(min(max(m, 2), n))

    def optimal_order_curve(self, tau: float, n: int, grid=None) -> np.ndarray:
        """Per-point optimal orders along a grid (infeasible benchmark)."""
        if grid is None:
            grid = default_grid(tau)
        g = validate_grid(grid, tau)
        return np.array([self.optimal_order(tau, s, n) for s in g], dtype=np.int64)


@dataclass(frozen=True)
class IndependenceCopula(Copula):
    family = "independence"

    def _cdf_interior(self, u0, u1):
        return u0 * u1

    def _cond_interior(self, u0, u1):
        return np.asarray(u1, dtype=np.float64).copy()

    def _sample_uniform(self, n, rng):
        u = rng.random((n, 2))
        return u[:, 0], u[:, 1]

    def true_curve(self, tau: float, grid=None) -> CurveEstimate:
        # Closed form: keeps 1 - s - tau exact in floating point, which
        # the generic 1 - cond(s, s + tau) route does not.
        if grid is None:
            grid = default_grid(tau)
        g = validate_grid(grid, tau)
        return CurveEstimate(g, 1.0 - g - tau, tau, "true(independence)", 0)

    def kendall_tau(self) -> float:
        return 0.0

    @classmethod
    def from_kendall_tau(cls, tau_k: float) -> "IndependenceCopula":
        if tau_k != 0.0:
            raise DomainError("independence copula has Kendall tau 0")
        return cls()


@dataclass(frozen=True)
class GaussianCopula(Copula):
    theta: float
    family = "gaussian"

    def __post_init__(self):
        if not (-1.0 < self.theta < 1.0):
            raise DomainError(f"gaussian theta must lie in (-1, 1), got {self.theta}")

    def _cdf_interior(self, u0, u1):
        return _phi2_vec(special.ndtri(u0), special.ndtri(u1), self.theta)

    def _cond_interior(self, u0, u1):
        z0 = special.ndtri(u0)
        z1 = special.ndtri(u1)
        return special.ndtr((z1 - self.theta * z0) / math.sqrt(1.0 - self.theta ** 2))

    def _sample_uniform(self, n, rng):
        z0 = rng.standard_normal(n)
        z1 = self.theta * z0 + math.sqrt(1.0 - self.theta ** 2) * rng.standard_normal(n)
        return special.ndtr(z0), special.ndtr(z1)

    def kendall_tau(self) -> float:
        return 2.0 * math.asin(self.theta) / math.pi

    @classmethod
    def from_kendall_tau(cls, tau_k: float) -> "GaussianCopula":
        if not (-1.0 < tau_k < 1.0):
            raise DomainError(f"gaussian Kendall tau must lie in (-1, 1), got {tau_k}")
        return cls(math.sin(math.pi * tau_k / 2.0))


@dataclass(frozen=True)
class ClaytonCopula(Copula):
    theta: float
    family = "clayton"

    def __post_init__(self):
        if not (self.theta > 0.0 and math.isfinite(self.theta)):
            raise DomainError(f"clayton theta must be positive, got {self.theta}")

    def _cdf_interior(self, u0, u1):
        # u**-theta overflows for extreme theta; downstream validation
        # reports the resulting non-finite values, so only the warning
        # is suppressed here
        with np.errstate(over="ignore", invalid="ignore"):
            t = u0 ** (-self.theta) + u1 ** (-self.theta) - 1.0
            return t ** (-1.0 / self.theta)

    def _cond_interior(self, u0, u1):
        th = self.theta
        with np.errstate(over="ignore", invalid="ignore"):
            t = u0 ** (-th) + u1 ** (-th) - 1.0
            return t ** (-1.0 / th - 1.0) * u0 ** (-th - 1.0)

    def _sample_uniform(self, n, rng):
        # Marshall-Olkin: gamma(1/theta) frailty mixed with exponentials.
        w = rng.gamma(1.0 / self.theta, size=n)
        e = rng.exponential(size=(n, 2))
        u = (1.0 + e / w[:, None]) ** (-1.0 / self.theta)
        return u[:, 0], u[:, 1]

    def kendall_tau(self) -> float:
        return self.theta / (self.theta + 2.0)

    @classmethod
    def from_kendall_tau(cls, tau_k: float) -> "ClaytonCopula":
        if not (0.0 < tau_k < 1.0):
            raise DomainError(
                f"clayton Kendall tau must lie in (0, 1), got {tau_k}"
            )
        return cls(2.0 * tau_k / (1.0 - tau_k))


@dataclass(frozen=True)
class GumbelCopula(Copula):
    theta: float
    family = "gumbel"

    def __post_init__(self):
        if not (self.theta >= 1.0 and math.isfinite(self.theta)):
            raise DomainError(f"gumbel theta must be >= 1, got {self.theta}")

    def _cdf_interior(self, u0, u1):
        # same float-limit handling as the Clayton formulas
        th = self.theta
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            a = (-np.log(u0)) ** th + (-np.log(u1)) ** th
            return np.exp(-(a ** (1.0 / th)))

    def _cond_interior(self, u0, u1):
        th = self.theta
        x = -np.log(u0)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            a = x ** th + (-np.log(u1)) ** th
            return (
                np.exp(-(a ** (1.0 / th))) * x ** (th - 1.0) * a ** (1.0 / th - 1.0) / u0
            )

    def _sample_uniform(self, n, rng):
        th = self.theta
        if th == 1.0:
            u = rng.random((n, 2))
            return u[:, 0], u[:, 1]
        # Positive stable frailty (Kanter's representation).
        alpha = 1.0 / th
        v = rng.uniform(0.0, math.pi, size=n)
        w = rng.exponential(size=n)
        s = (
            np.sin(alpha * v)
            / np.sin(v) ** th  # th == 1/alpha
            * (np.sin((1.0 - alpha) * v) / w) ** ((1.0 - alpha) / alpha)
        )
        e = rng.exponential(size=(n, 2))
        u = np.exp(-((e / s[:, None]) ** alpha))
        return u[:, 0], u[:, 1]

    def kendall_tau(self) -> float:
        return 1.0 - 1.0 / self.theta

    @classmethod
    def from_kendall_tau(cls, tau_k: float) -> "GumbelCopula":
        if not (0.0 <= tau_k < 1.0):
            raise DomainError(f"gumbel Kendall tau must lie in [0, 1), got {tau_k}")
        return cls(1.0 / (1.0 - tau_k))


_FAMILIES = {
    "independence": IndependenceCopula,
    "gaussian": GaussianCopula,
    "clayton": ClaytonCopula,
    "gumbel": GumbelCopula,
}


def make_copula(
    family: str, theta: float | None = None, kendall_tau: float | None = None
) -> Copula:
    """Build a copula from a family name and one calibration parameter.

    Exactly one of ``theta`` / ``kendall_tau`` for the parametric
    families; neither for independence.
    """
    key = str(family).lower()
    if key not in _FAMILIES:
        raise DomainError(
            f"unknown copula family {family!r}; choose from {sorted(_FAMILIES)}"
        )
    cls = _FAMILIES[key]
    if key == "independence":
        if theta is not None or kendall_tau is not None:
            raise DomainError("independence copula takes no parameter")
        return cls()
    if (theta is None) == (kendall_tau is None):
        raise DomainError("pass exactly one of theta or kendall_tau")
    if theta is not None:
        return cls(float(theta))
    return cls.from_kendall_tau(float(kendall_tau))
