from fastapi import APIRouter, status

from udn import schemas
from udn.api.deps import WorkersDependency, experiment_runner

router = APIRouter(prefix="/experiments", tags=["Experiments"])


@router.post(
    "/stability-region",
    response_model=schemas.ExperimentResponse,
    summary="Critical arrival rates along an access-probability grid",
    responses={
        **schemas.stability_region_response,
        **schemas.bad_request,
        **schemas.invalid_configuration,
    },
    operation_id="stability_region",
)
def stability_region(
    request: schemas.StabilityRegionRequest, workers: WorkersDependency = None
):
    """
    Computes the sufficient, Type I and Type II critical arrival rates for
    every access probability of `p_grid`. Rows are the same as the
    `stability-region` CSV.
    """
    rows = experiment_runner.stability_region(
        config=request.config, p_grid=request.p_grid, workers=workers
    )
    return {
        "message": "Stability region computed",
        "status_code": status.HTTP_200_OK,
        "data": rows,
    }


@router.post(
    "/local-delay",
    response_model=schemas.ExperimentResponse,
    summary="Backlogged local-delay statistics along a sweep",
    responses={
        **schemas.local_delay_response,
        **schemas.bad_request,
        **schemas.invalid_configuration,
    },
    operation_id="local_delay",
)
def local_delay(
    request: schemas.LocalDelayRequest, workers: WorkersDependency = None
):
    """
    Runs Backlogged ensembles at every sweep value and reports the pooled
    mean and variance of the local delay, the censored fraction and the
    divergence flag.
    """
    rows = experiment_runner.local_delay(
        config=request.config, sweep=request.sweep, workers=workers
    )
    return {
        "message": "Local delay computed",
        "status_code": status.HTTP_200_OK,
        "data": rows,
    }


@router.post(
    "/delay-cdf",
    response_model=schemas.ExperimentResponse,
    summary="Mean-delay cdf bounds and approximation",
    responses={
        **schemas.delay_cdf_response,
        **schemas.bad_request,
        **schemas.invalid_configuration,
    },
    operation_id="delay_cdf",
)
def delay_cdf(
    request: schemas.DelayCdfRequest, workers: WorkersDependency = None
):
    """
    Runs coupled Dominant, Original and FavorableDrop ensembles and returns
    their mean-delay cdfs next to the fixed-point approximation.
    """
    rows = experiment_runner.delay_cdf(
        config=request.config, grid=request.grid, workers=workers
    )
    return {
        "message": "Delay cdf computed",
        "status_code": status.HTTP_200_OK,
        "data": rows,
    }
