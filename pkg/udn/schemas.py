from enum import Enum
from typing import Any, Dict, Optional, Union

from fastapi import status
from pydantic import (
    AliasChoices,
    BaseModel,
    ConfigDict,
    Field,
    ValidationInfo,
    field_validator,
    model_validator,
)


class SystemVariant(str, Enum):
    """The system a simulation run executes."""

    ORIGINAL = "original"
    DOMINANT = "dominant"
    FAVORABLE_DROP = "favorable_drop"
    SIMPLIFIED_NEAREST = "simplified_nearest"
    BACKLOGGED = "backlogged"


class FadingModel(str, Enum):
    """Per-slot power gain model."""

    RAYLEIGH = "rayleigh"
    NONE = "none"


class ConditionKind(str, Enum):
    """Which decoupled system a stability condition is derived from."""

    SUFFICIENT = "sufficient"
    NECESSARY_TYPE_I = "type_i"
    NECESSARY_TYPE_II = "type_ii"
    EMPIRICAL = "empirical"


class ConditionType(str, Enum):
    """The two families of necessary conditions."""

    TYPE_I = "Type I"
    TYPE_II = "Type II"


class Regime(str, Enum):
    """Special cases in which one necessary-condition type is preferable."""

    EPSILON_TO_ZERO = "Parameter ε for ε-stability approaches zero"
    ACCESS_PROB_TO_ZERO = "Access probability approaches zero"
    DENSITY_TO_ZERO = "Density of transmitters approaches zero"
    THETA_TO_ZERO_AND_ACCESS_TO_ONE = (
        "SINR threshold θ approaches zero and access probability approaches one"
    )
    LONG_LINK_VS_DENSITY = (
        "Square of the desired link distance is much larger than reciprocal "
        "of the density of transmitters"
    )


class SuccessEstimator(str, Enum):
    """How per-link success probabilities are estimated."""

    MONTE_CARLO = "monte_carlo"
    RAYLEIGH_EXACT = "rayleigh_exact"


class SimConfig(BaseModel):
    """
    Full parameterization of one experiment.

    All invariants are checked on construction, and every violated field is
    reported in a single validation error. Instances are immutable; use
    `with_updates` to derive a modified, re-validated copy.

    - **intensity**: Transmitter density λ in links per m² (key `lambda` is
      accepted as an alias).
    - **window_side**: Side L of the square torus in meters.
    - **link_distance**: Transmitter-receiver distance r in meters.
    - **access_prob**: ALOHA access probability p.
    - **arrival_rate**: Bernoulli arrival probability ξ per slot.
    - **sinr_threshold**: Success threshold θ.
    - **path_loss_exponent**: α, strictly above 2.
    - **noise_power**: Relative noise power (0 means interference-limited).
    - **horizon**: Number of slots T.
    - **seed**: 64-bit seed of every stochastic output.
    - **variant**: The system to simulate.
    - **epsilon**: Tolerated fraction of unstable queues.
    - **fading**: `rayleigh` or `none` (all gains fixed to 1).
    - **queue_sample_stride**: Stride of the recorded queue-length samples.
    - **realizations**: Number of deployments in an ensemble.
    """

    model_config = ConfigDict(
        extra="forbid",
        frozen=True,
        populate_by_name=True,
        use_enum_values=False,
        json_schema_extra={
            "examples": [
                {
                    "intensity": 0.05,
                    "window_side": 100,
                    "link_distance": 1,
                    "access_prob": 0.5,
                    "arrival_rate": 0.1,
                    "sinr_threshold": 1,
                    "path_loss_exponent": 4,
                    "horizon": 10000,
                    "seed": 42,
                }
            ]
        },
    )

    intensity: float = Field(
        0.05, ge=0, validation_alias=AliasChoices("intensity", "lambda")
    )
    window_side: float = Field(100.0, gt=0)
    link_distance: float = Field(1.0, gt=0)
    access_prob: float = Field(0.5, ge=0, le=1)
    arrival_rate: float = Field(0.1, ge=0, le=1)
    sinr_threshold: float = Field(1.0, gt=0)
    path_loss_exponent: float = 4.0
    noise_power: float = Field(0.0, ge=0)
    horizon: int = Field(10_000, ge=1)
    seed: int = Field(0, ge=0, lt=2**64)
    variant: SystemVariant = SystemVariant.ORIGINAL
    epsilon: float = Field(0.1, ge=0, le=1)
    fading: FadingModel = FadingModel.RAYLEIGH
    queue_sample_stride: int = Field(10, ge=1)
    realizations: int = Field(20, ge=1)

    @field_validator("link_distance")
    @classmethod
    def link_must_fit_the_torus(cls, value: float, info: ValidationInfo):
        """
        Validates that the link is shorter than half the window side.

        Raises:
            ValueError: If the receiver could wrap around the torus.
        """
        window_side = info.data.get("window_side")
        if window_side is not None and value >= window_side / 2:
            raise ValueError(
                "link_distance must be smaller than window_side/2"
            )
        return value

    @field_validator("path_loss_exponent")
    @classmethod
    def path_loss_must_exceed_two(cls, value: float):
        """
        Validates that α > 2.

        Examples:
            >>> SimConfig.path_loss_must_exceed_two(4.0)
            4.0
            >>> SimConfig.path_loss_must_exceed_two(2.0)
            Traceback (most recent call last):
            ...
            ValueError: path_loss_exponent must exceed 2: with alpha <= 2 the mean aggregate interference of an infinite Poisson field diverges
        """
        if not value > 2:
            raise ValueError(
                "path_loss_exponent must exceed 2: with alpha <= 2 the mean "
                "aggregate interference of an infinite Poisson field diverges"
            )
        return value

    def with_updates(self, **changes: Any) -> "SimConfig":
        """Returns a re-validated copy with the given fields replaced."""
        return type(self).model_validate({**self.model_dump(), **changes})


class StabilityReport(BaseModel):
    """
    Per-link service rates and the ε-stability verdict under one condition.

    - **service_rates**: μ̂_i per link (packets/slot); empty for empirical
      reports.
    - **stable**: Per-link stable flags.
    - **unstable_fraction**: Fraction of links flagged unstable.
    - **epsilon**: Tolerated unstable fraction.
    - **verdict**: True iff the network is ε-stable.
    - **condition_kind**: The system the rates come from.
    """

    service_rates: list[float] = Field(default_factory=list)
    stable: list[bool]
    unstable_fraction: float = Field(..., ge=0, le=1)
    epsilon: float = Field(..., ge=0, le=1)
    verdict: bool
    condition_kind: ConditionKind

    @model_validator(mode="after")
    def verdict_matches_fraction(self):
        if self.verdict != (self.unstable_fraction <= self.epsilon):
            raise ValueError("verdict must equal unstable_fraction <= epsilon")
        return self


class FixedPointResult(BaseModel):
    """
    Outcome of the busy-probability fixed-point iteration.

    - **rho**: Busy probability.
    - **iterations**: Number of evaluations of the map.
    - **residual**: |ρ − f(ρ)| at the returned ρ.
    - **converged**: Whether the residual reached the tolerance.
    - **damping**: Damping factor in use when the iteration stopped.
    - **iterates**: Every ρ visited, starting with the initial value.
    """

    rho: float = Field(..., ge=0, le=1)
    iterations: int
    residual: float
    converged: bool
    damping: float
    iterates: list[float] = Field(default_factory=list)


class SweepSpec(BaseModel):
    """
    A named parameter sweep START:STOP:STEP (STOP inclusive).

    - **name**: A `SimConfig` field to sweep.
    - **values**: The grid values.
    """

    model_config = ConfigDict(extra="forbid")

    name: str
    values: list[float]

    @field_validator("name")
    @classmethod
    def name_must_be_a_config_field(cls, value: str):
        """
        Validates that the swept name is a `SimConfig` field.

        Examples:
            >>> SweepSpec.name_must_be_a_config_field("sinr_threshold")
            'sinr_threshold'
            >>> SweepSpec.name_must_be_a_config_field("colour")
            Traceback (most recent call last):
            ...
            ValueError: cannot sweep unknown field 'colour'
        """
        if value not in SimConfig.model_fields:
            raise ValueError(f"cannot sweep unknown field {value!r}")
        return value


class StabilityRegionRequest(BaseModel):
    """Request body for the stability-region experiment."""

    config: SimConfig
    p_grid: list[float] = Field(
        default_factory=lambda: [round(0.1 * k, 10) for k in range(1, 11)]
    )

    @field_validator("p_grid")
    @classmethod
    def grid_must_be_probabilities(cls, value: list[float]):
        if any(not 0 <= p <= 1 for p in value):
            raise ValueError("every access probability must lie in [0, 1]")
        return value


class LocalDelayRequest(BaseModel):
    """Request body for the local-delay sweep."""

    config: SimConfig
    sweep: SweepSpec


class DelayCdfRequest(BaseModel):
    """Request body for the mean-delay cdf experiment."""

    config: SimConfig
    grid: Optional[list[float]] = None


class ExperimentResponse(BaseModel):
    """
    A class representing the response structure for experiment operations.

    - **message**: A string message describing the response.
    - **status_code**: An integer representing the status code.
    - **data**: The emitted table, one mapping per CSV row.
    """

    message: str
    status_code: int
    data: list[Dict[str, Union[float, int, str, bool, None]]]


class ConfigResponse(BaseModel):
    """Response returned after a configuration has been validated."""

    message: str
    status_code: int
    data: SimConfig


class ConditionTypeResponse(BaseModel):
    """Response carrying the advised necessary-condition type."""

    message: str
    status_code: int
    data: ConditionType


class StatusResponse(BaseModel):
    """
    A class representing the response structure for status information.

    - **status**: A string indicating the status information (default "OK").
    """

    status: str = "OK"


def create_response_example(
    *,
    status_code: int,
    description: str,
    message: str,
    data: Union[dict, list],
) -> Dict[str, Any]:
    """Return a dictionary representing an experiment response schema."""
    return {
        status_code: {
            "description": description,
            "content": {
                "application/json": {
                    "example": {
                        "message": message,
                        "status_code": status_code,
                        "data": data,
                    }
                }
            },
        }
    }


stability_region_response = create_response_example(
    status_code=status.HTTP_200_OK,
    description="Critical arrival rates computed",
    message="Stability region computed",
    data=[
        {"p": 0.5, "kind": "sufficient", "epsilon": 0.1, "xi_star": 0.21},
        {"p": 0.5, "kind": "type_i", "epsilon": 0.1, "xi_star": 0.33},
        {"p": 0.5, "kind": "type_ii", "epsilon": 0.1, "xi_star": 0.29},
    ],
)

local_delay_response = create_response_example(
    status_code=status.HTTP_200_OK,
    description="Local-delay sweep computed",
    message="Local delay computed",
    data=[
        {
            "sweep_param": 1.0,
            "mean": 2.4,
            "variance": 3.1,
            "censored_fraction": 0.0,
            "diverging_flag": 0,
        }
    ],
)

delay_cdf_response = create_response_example(
    status_code=status.HTTP_200_OK,
    description="Mean-delay cdf bounds computed",
    message="Delay cdf computed",
    data=[
        {
            "grid_t": 3.0,
            "cdf_lower": 0.41,
            "cdf_empirical": 0.55,
            "cdf_upper": 0.62,
            "cdf_approx": 0.57,
            "censored_fraction": 0.01,
        }
    ],
)

invalid_configuration = {
    status.HTTP_422_UNPROCESSABLE_ENTITY: {
        "description": "Validation Error",
        "content": {
            "application/json": {
                "example": {
                    "detail": [
                        {
                            "type": "value_error",
                            "loc": ["body", "config", "path_loss_exponent"],
                            "msg": "Value error, path_loss_exponent must "
                            "exceed 2",
                            "input": 2,
                        }
                    ]
                }
            }
        },
    }
}

config_validated_response = create_response_example(
    status_code=status.HTTP_200_OK,
    description="Configuration is valid",
    message="Configuration is valid",
    data=SimConfig().model_dump(mode="json"),
)

condition_type_response = create_response_example(
    status_code=status.HTTP_200_OK,
    description="Advised necessary-condition type",
    message="Condition type advised",
    data=ConditionType.TYPE_I.value,
)

bad_request = {
    status.HTTP_400_BAD_REQUEST: {
        "description": "The experiment cannot run on the given input",
        "content": {
            "application/json": {
                "example": {"detail": "the ensemble has no links"}
            }
        },
    }
}
