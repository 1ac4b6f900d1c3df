from typing import Annotated, Optional

import pandas as pd
from fastapi import HTTPException, Query, status

from udn import experiments
from udn.core import apply_overrides
from udn.exceptions import (
    ConfigError,
    EmptyRealizationError,
    EngineFault,
    HorizonTooShortError,
    UnknownRegimeError,
)
from udn.schemas import ConditionType, Regime, SimConfig, SweepSpec
from udn.stability import recommend_condition_type

WorkersDependency = Annotated[
    Optional[int],
    Query(ge=1, description="Process pool size; defaults to UDN_WORKERS"),
]
RegimeDependency = Query(..., description="A limiting regime, by row text")


class ExperimentRunner:
    """Runs experiments on behalf of the API and maps failures to HTTP."""

    def __init__(self):
        self.engine_error = HTTPException(
            status_code=status.HTTP_500_INTERNAL_SERVER_ERROR,
            detail={
                "message": "An error while performing this action",
                "next_steps": "If the error persists, please report the "
                "configuration that triggered it.",
            },
        )

    def _records(self, frame: pd.DataFrame) -> list[dict]:
        # NaN is not valid JSON
        frame = frame.astype(object).where(frame.notna(), None)
        return frame.to_dict(orient="records")

    def _call(self, fn, *args, **kwargs) -> pd.DataFrame:
        """
        Calls an experiment builder.

        Raises:
            HTTPException: 422 for configuration errors, 400 for inputs an
            experiment cannot run on, 500 for internal faults.
        """
        try:
            return fn(*args, **kwargs)
        except ConfigError as error:
            raise HTTPException(
                status_code=status.HTTP_422_UNPROCESSABLE_ENTITY,
                detail=[
                    {"field": e.field, "message": e.message}
                    for e in error.errors
                ],
            ) from error
        except (EmptyRealizationError, HorizonTooShortError) as error:
            raise HTTPException(
                status_code=status.HTTP_400_BAD_REQUEST, detail=str(error)
            ) from error
        except EngineFault as error:
            raise self.engine_error from error

    def stability_region(
        self,
        *,
        config: SimConfig,
        p_grid: list[float],
        workers: Optional[int] = None,
    ) -> list[dict]:
        frame = self._call(
            experiments.stability_region_table,
            config,
            p_grid,
            workers=workers,
        )
        return self._records(frame)

    def local_delay(
        self,
        *,
        config: SimConfig,
        sweep: SweepSpec,
        workers: Optional[int] = None,
    ) -> list[dict]:
        frame = self._call(
            experiments.local_delay_table, config, sweep, workers=workers
        )
        return self._records(frame)

    def delay_cdf(
        self,
        *,
        config: SimConfig,
        grid: Optional[list[float]] = None,
        workers: Optional[int] = None,
    ) -> list[dict]:
        frame = self._call(
            experiments.delay_cdf_table, config, grid, workers=workers
        )
        return self._records(frame)

    def validate(self, *, config: SimConfig, **changes) -> SimConfig:
        return self._call(apply_overrides, config, **changes)

    def condition_type(self, *, regime: str) -> ConditionType:
        try:
            return recommend_condition_type(regime)
        except UnknownRegimeError as error:
            raise HTTPException(
                status_code=status.HTTP_400_BAD_REQUEST,
                detail={
                    "message": f"unknown regime {regime!r}",
                    "known_regimes": [r.value for r in Regime],
                },
            ) from error


experiment_runner = ExperimentRunner()
