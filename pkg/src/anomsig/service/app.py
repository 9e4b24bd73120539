"""HTTP service exposing training, single tests, and the studies.

Stateless: weights ride along in each request, every response carries the
full artifact payload (rows plus rendered CSV text), and nothing is kept
between calls. Domain errors map to 422, malformed weights to 400.
"""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI, HTTPException

from .. import __version__
from ..covariance import CovarianceModel
from ..diffusion.plan import ReconstructionPlan
from ..errors import AnomsigError, WeightsFormatError
from ..inference.pipeline import run_single_test
from ..unet.config import Weights
from ..unet.training import TrainConfig
from ..experiments.harness import (
    StudyConfig,
    StudyResult,
    run_oracle_check,
    run_power,
    run_robustness,
    run_type1,
    train_denoiser,
)
from .schemas import (
    HealthResponse,
    OracleCheckResponse,
    StudyParams,
    StudyRequest,
    StudyResponse,
    TestOneRequest,
    TrainRequest,
    TrainResponse,
)


def _study_config(params: StudyParams, study: str) -> StudyConfig:
    return StudyConfig.from_dict({**params.model_dump(), "study": study})


def _load_weights(doc: dict) -> Weights:
    try:
        return Weights.from_json_dict(doc)
    except (WeightsFormatError, KeyError, TypeError, ValueError) as exc:
        raise HTTPException(status_code=400, detail=f"bad weights: {exc}")


def _study_response(result: StudyResult) -> StudyResponse:
    return StudyResponse(
        config=result.config_json_dict(),
        summary_rows=result.summary_rows,
        trial_rows=result.trial_rows,
        summary_csv=result.summary_csv_text(),
        trials_csv=result.trials_csv_text(),
        requested=result.requested,
        completed=result.completed,
        excluded_empty_region=result.excluded_empty,
        excluded_error=result.excluded_error,
        error_messages=result.error_messages,
    )


def create_app() -> FastAPI:
    app = FastAPI(title="anomsig", version=__version__)

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/train", response_model=TrainResponse)
    def train_endpoint(req: TrainRequest) -> TrainResponse:
        cfg = _study_config(req.params, "train")
        tc = TrainConfig(
            steps=req.train_steps,
            batch_size=req.batch_size,
            learning_rate=req.learning_rate,
            momentum=req.momentum,
            seed=req.params.seed,
        )
        try:
            result = train_denoiser(cfg, tc, images=req.train_images)
        except AnomsigError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return TrainResponse(
            weights=result.weights.to_json_dict(),
            initial_loss=result.initial_loss,
            final_loss=result.final_loss,
            history=result.history,
        )

    @app.post("/test-one")
    def test_one(req: TestOneRequest) -> dict:
        cfg = _study_config(req.params, "test-one")
        weights = _load_weights(req.weights)
        x = np.asarray(req.x, dtype=np.float64)
        x_ref = np.asarray(req.x_ref, dtype=np.float64)
        if x.shape != (cfg.n,) or x_ref.shape != (cfg.n,):
            raise HTTPException(
                status_code=422,
                detail=f"images must have length n={cfg.n}",
            )
        try:
            plan = ReconstructionPlan.create(
                cfg.n, cfg.schedule(), cfg.tprime, cfg.steps, cfg.eta,
                req.plan_seed,
            )
            outcome = run_single_test(
                x,
                x_ref,
                CovarianceModel(cfg.cov, cfg.n, cfg.rho),
                weights.compiled(),
                plan,
                cfg.filter_spec(),
                cfg.lam,
                cfg.search_config(),
                permutations=cfg.permutations,
                permutation_seed=req.permutation_seed,
            )
        except AnomsigError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return outcome.to_json_dict()

    def _run_study(req: StudyRequest, study: str, runner) -> StudyResponse:
        cfg = _study_config(req.params, study)
        weights = _load_weights(req.weights)
        try:
            return _study_response(runner(cfg, weights))
        except AnomsigError as exc:
            raise HTTPException(status_code=422, detail=str(exc))

    @app.post("/type1", response_model=StudyResponse)
    def type1(req: StudyRequest) -> StudyResponse:
        return _run_study(req, "type1", run_type1)

    @app.post("/power", response_model=StudyResponse)
    def power(req: StudyRequest) -> StudyResponse:
        return _run_study(req, "power", run_power)

    @app.post("/robustness", response_model=StudyResponse)
    def robustness(req: StudyRequest) -> StudyResponse:
        return _run_study(req, "robustness", run_robustness)

    @app.post("/oracle-check", response_model=OracleCheckResponse)
    def oracle_check(req: StudyRequest) -> OracleCheckResponse:
        cfg = _study_config(req.params, "oracle-check")
        weights = _load_weights(req.weights)
        try:
            result = run_oracle_check(cfg, weights)
        except AnomsigError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return OracleCheckResponse(
            config=result.config_json_dict(),
            rows=result.rows,
            csv_text=result.csv_text(),
            total_grid=result.total_grid,
            total_disagree=result.total_disagree,
            agree_fraction=result.agree_fraction,
            all_within_2gamma=result.all_within_2gamma,
            all_z_obs_in=result.all_z_obs_in,
            max_eval_diff=result.max_eval_diff,
        )

    return app
