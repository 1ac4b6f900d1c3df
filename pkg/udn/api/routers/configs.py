from fastapi import APIRouter, status

from udn import schemas
from udn.api.deps import RegimeDependency, experiment_runner

router = APIRouter(prefix="/configs", tags=["Configurations"])


@router.post(
    "/validate",
    response_model=schemas.ConfigResponse,
    summary="Validate a configuration",
    responses={
        **schemas.config_validated_response,
        **schemas.invalid_configuration,
    },
    operation_id="validate_config",
)
def validate_config(config: schemas.SimConfig):
    """
    Checks every invariant of a configuration and returns it with defaults
    filled in. Every violated field is reported at once.
    """
    return {
        "message": "Configuration is valid",
        "status_code": status.HTTP_200_OK,
        "data": experiment_runner.validate(config=config),
    }


@router.get(
    "/condition-type",
    response_model=schemas.ConditionTypeResponse,
    summary="Advise a necessary-condition type for a limiting regime",
    responses={**schemas.condition_type_response, **schemas.bad_request},
    operation_id="get_condition_type",
)
def get_condition_type(regime: str = RegimeDependency):
    """
    Returns whether Type I or Type II necessary conditions are the better
    choice in a limiting regime, such as "Access probability approaches
    zero". The regime may also be given by its member name.
    """
    return {
        "message": "Condition type advised",
        "status_code": status.HTTP_200_OK,
        "data": experiment_runner.condition_type(regime=regime),
    }
