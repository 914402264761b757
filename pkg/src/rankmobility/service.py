"""FastAPI service exposing estimation, bands, and simulation.

The CLI talks to this app in-process by default, so every code path
(command line or HTTP) crosses the same schema boundary.  Input and
domain problems surface as 400s, estimation failures as 500s.
"""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from . import __version__
from .bernstein import bernstein_curve, beta_curve, default_order
from .copulas import make_copula
from .curves import band_grid, default_grid, make_grid
from .distreg import DRSpec, WarmStartCache, dr_curve
from .errors import DomainError, EstimationError, InputError, MobilityError
from .inference import bootstrap_band, difference_band, dominance_report
from .ranks import Sample
from .schemas import (
    BandPoint,
    BandsRequest,
    BandsResponse,
    CurvePoint,
    DominanceSummary,
    EstimateRequest,
    EstimateResponse,
    MetricRow,
    OverlayRow,
    SimulateRequest,
    SimulateResponse,
)
from .simulation import ExperimentConfig, overlay_rows, run_experiment

__all__ = ["create_app"]


def _sample_from_rows(rows) -> Sample:
    parents = [r.parent_income for r in rows]
    children = [r.child_income for r in rows]
    groups = [r.group for r in rows]
    if any(g is not None for g in groups):
        if any(g is None for g in groups):
            raise InputError("group must be set on every row or on none")
        return Sample(parents, children, np.array(groups, dtype=object))
    return Sample(parents, children)


def _grid_from_spec(spec, default, tau: float) -> np.ndarray:
    # Default grids adapt to the offset; explicit grids are validated
    # as given.
    if spec is None:
        return default(tau)
    return make_grid(spec.start, spec.stop, spec.step)


def _resolve_order(m, n: int):
    if m is None or m == "sqrt-n":
        return default_order(n)
    return int(m)


def _curve_estimator(req, reuse_fits: bool = False):
    """Bind request fields to a (sample, tau, grid) -> CurveEstimate callable.

    ``reuse_fits`` chains regression fits across repeated calls (warm
    starts inside a bootstrap loop); it changes speed, not results.
    """
    if req.estimator == "beta":
        return beta_curve
    if req.estimator == "ebc":
        return lambda s, tau, grid: bernstein_curve(
            s, tau, grid, order=_resolve_order(req.m, s.n)
        )
    spec = DRSpec(link=req.link, design=req.design)
    warm = WarmStartCache() if reuse_fits else None
    return lambda s, tau, grid: dr_curve(s, spec, tau, grid, warm=warm)


def create_app() -> FastAPI:
    app = FastAPI(title="rankmobility", version=__version__)

    @app.exception_handler(MobilityError)
    async def _mobility_error(request: Request, exc: MobilityError):
        status = 500 if isinstance(exc, EstimationError) else 400
        return JSONResponse(status_code=status, content={"detail": str(exc)})

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.post("/estimate", response_model=EstimateResponse)
    def estimate(req: EstimateRequest) -> EstimateResponse:
        sample = _sample_from_rows(req.data)
        grid = _grid_from_spec(req.grid, default_grid, req.tau)
        curve = _curve_estimator(req)(sample, req.tau, grid)
        flags = curve.flags if curve.flags else ("",) * curve.n_points
        points = [
            CurvePoint(s=float(s), value=float(v), flag=f)
            for s, v, f in zip(curve.grid, curve.values, flags)
        ]
        return EstimateResponse(
            points=points,
            estimator=curve.estimator,
            tau=curve.tau,
            n=curve.n,
            warnings=list(curve.warnings),
        )

    @app.post("/bands", response_model=BandsResponse)
    def bands(req: BandsRequest) -> BandsResponse:
        sample = _sample_from_rows(req.data)
        grid = _grid_from_spec(req.grid, band_grid, req.tau)
        if (req.group_a is None) != (req.group_b is None):
            raise InputError("pass both group_a and group_b or neither")
        if req.group_a is not None:
            spec = DRSpec(link=req.link, design=req.design)
            band = difference_band(
                sample,
                spec,
                req.group_a,
                req.group_b,
                req.tau,
                grid,
                n_boot=req.n_boot,
                alpha=req.alpha,
                rng=req.seed,
            )
            dom = dominance_report(band)
            summary = DominanceSummary(
                intervals=[(float(a), float(b)) for a, b in dom.intervals],
                nonempty=dom.any_dominance,
                violation=dom.violation,
            )
        else:
            band = bootstrap_band(
                sample,
                _curve_estimator(req, reuse_fits=True),
                req.tau,
                grid,
                n_boot=req.n_boot,
                alpha=req.alpha,
                rng=req.seed,
            )
            summary = None
        points = [
            BandPoint(
                s=float(band.grid[i]),
                center=float(band.center[i]),
                pointwise_lo=float(band.pointwise_lo[i]),
                pointwise_hi=float(band.pointwise_hi[i]),
                uniform_lo=float(band.uniform_lo[i]),
                uniform_hi=float(band.uniform_hi[i]),
                sigma=float(band.sigma[i]),
            )
            for i in range(band.grid.size)
        ]
        return BandsResponse(
            points=points,
            estimator=band.estimator,
            tau=band.tau,
            alpha=band.alpha,
            n_boot=band.n_boot,
            critical_value=band.critical_value,
            redraws=band.redraws,
            dominance=summary,
        )

    @app.post("/simulate", response_model=SimulateResponse)
    def simulate(req: SimulateRequest) -> SimulateResponse:
        if req.family == "independence":
            if req.theta is not None or req.tau_k is not None:
                raise DomainError("independence copula takes no parameter")
            model = make_copula("independence")
        else:
            model = make_copula(req.family, theta=req.theta, kendall_tau=req.tau_k)
        config = ExperimentConfig(
            model=model,
            n=req.n,
            reps=req.reps,
            tau=req.tau,
            estimators=tuple(req.estimators),
            seed=req.seed,
        )
        keep = 0 if req.overlay_reps is None else req.overlay_reps
        result = run_experiment(config, keep_rep_curves=keep)
        overlay = None
        if req.overlay_reps is not None:
            overlay = [OverlayRow(**row) for row in overlay_rows(result)]
        theta = getattr(model, "theta", None)
        return SimulateResponse(
            family=result.family,
            theta=None if theta is None else float(theta),
            kendall_tau=float(model.kendall_tau()),
            n=result.n,
            reps=result.reps,
            tau=result.tau,
            seed_used=result.seed_used,
            metrics=[
                MetricRow(
                    estimator=m.estimator,
                    risb_x100=m.risb_x100,
                    rimse_x100=m.rimse_x100,
                    failures=m.failures,
                )
                for m in result.metrics
            ],
            overlay=overlay,
        )

    return app
