from typing import Literal

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """
    A class to manage runtime settings for the ultradense-network laboratory.

    Explanation:
    These settings control how experiments are executed (worker pool size,
    ensemble defaults, estimator choice) and the heuristic thresholds used by
    the finite-horizon diagnostics. They are loaded from environment variables
    prefixed with `UDN_` or from a `.env` file. The physical parameters of an
    experiment are not settings; they live in a `SimConfig` file.

    Args:
    - **workers**: Default size of the process pool (`UDN_WORKERS`).
    - **realizations**: Default number of sampled deployments per ensemble.
    - **horizon**: Default number of slots per simulation run.
    - **queue_sample_stride**: Stride (slots) of the queue-length samples.
    - **mc_samples**: Monte-Carlo samples per link success estimate.
    - **success_estimator**: Estimator used for per-link success
    probabilities in ensemble work (`monte_carlo` or `rayleigh_exact`).
    - **unstable_slope_factor**: A queue is flagged unstable when its growth
    slope exceeds this fraction of the arrival rate.
    - **unstable_min_queue**: ... and its final length exceeds this value.
    - **min_stability_horizon**: Shortest horizon accepted by the empirical
    stability test.
    - **divergence_growth**: Relative growth of the pooled local delay, on
    horizon doubling, that flags divergence.
    - **fixed_point_tolerance**, **fixed_point_max_iter**,
    **fixed_point_damping**: Busy-probability solver controls.
    - **bisection_tolerance**: Absolute tolerance of the critical-rate
    bisection.
    - **cdf_grid_max**, **cdf_grid_points**: Default mean-delay cdf grid.
    - **log_level**: Level of the `udn` loggers.
    - **dev**: A flag indicating development mode (exposes the API docs).
    """

    workers: int = 1
    realizations: int = 20
    horizon: int = 10_000
    queue_sample_stride: int = 10
    mc_samples: int = 2000
    success_estimator: Literal["monte_carlo", "rayleigh_exact"] = (
        "rayleigh_exact"
    )
    unstable_slope_factor: float = 0.1
    unstable_min_queue: int = 50
    min_stability_horizon: int = 10_000
    divergence_growth: float = 0.2
    fixed_point_tolerance: float = 1e-6
    fixed_point_max_iter: int = 200
    fixed_point_damping: float = 0.5
    bisection_tolerance: float = 1e-4
    cdf_grid_max: float = 50.0
    cdf_grid_points: int = 200
    log_level: str = "INFO"
    dev: bool = False
    prod_url: str | None = "http://localhost:8000"

    model_config = SettingsConfigDict(
        env_prefix="UDN_", env_file=".env", extra="ignore"
    )


settings = Settings()
