"""
Ensemble experiments behind the CLI commands and the HTTP API.

Each builder samples its realizations from the configured seed, fans the
per-realization work out over a process pool and reduces the results in task
order, so the tables it returns do not depend on the worker count.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence, TypeVar

import numpy as np
import pandas as pd

from udn.config import settings
from udn.core import ValidatedConfig, apply_overrides, derive_stream
from udn.delay_analysis import (
    approx_delay_cdf,
    default_grid,
    fixed_point_busy,
    local_delay_summary,
    mean_delay_cdf,
)
from udn.geometry import sample_bipolar
from udn.models import NetworkRealization, RunStats
from udn.queuesim import run
from udn.schemas import ConditionKind, SweepSpec, SystemVariant
from udn.stability import critical_arrival_rate

logger = logging.getLogger(__name__)

Task = TypeVar("Task")
Result = TypeVar("Result")

STABILITY_COLUMNS = ["p", "kind", "epsilon", "xi_star"]
LOCAL_DELAY_COLUMNS = [
    "sweep_param",
    "mean",
    "variance",
    "censored_fraction",
    "diverging_flag",
]
CDF_COLUMNS = [
    "grid_t",
    "cdf_lower",
    "cdf_empirical",
    "cdf_upper",
    "cdf_approx",
    "censored_fraction",
]
CONDITION_KINDS = (
    ConditionKind.SUFFICIENT,
    ConditionKind.NECESSARY_TYPE_I,
    ConditionKind.NECESSARY_TYPE_II,
)


def map_tasks(
    fn: Callable[[Task], Result],
    tasks: Iterable[Task],
    workers: Optional[int] = None,
) -> list[Result]:
    """
    Applies `fn` to every task, in a process pool when `workers` > 1.

    Results come back in task order. `fn` must be a module-level function.
    """
    tasks = list(tasks)
    workers = settings.workers if workers is None else workers
    if workers <= 1 or len(tasks) <= 1:
        return [fn(task) for task in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        return list(pool.map(fn, tasks))


def sample_ensemble(
    config: ValidatedConfig, count: Optional[int] = None
) -> list[NetworkRealization]:
    """Samples `count` deployments (default `config.realizations`)."""
    count = config.realizations if count is None else count
    ensemble = [
        sample_bipolar(
            config, derive_stream(config.seed, "geometry", index), index
        )
        for index in range(count)
    ]
    logger.info(
        "sampled %d realizations with %d links in total",
        count,
        sum(realization.n_links for realization in ensemble),
    )
    return ensemble


def _run_task(
    task: tuple[ValidatedConfig, NetworkRealization, SystemVariant],
) -> RunStats:
    config, realization, variant = task
    return run(config, realization, variant)


def run_ensemble(
    config: ValidatedConfig,
    ensemble: Sequence[NetworkRealization],
    variant: SystemVariant,
    workers: Optional[int] = None,
) -> list[RunStats]:
    """Simulates every realization under one variant."""
    return map_tasks(
        _run_task,
        [(config, realization, variant) for realization in ensemble],
        workers,
    )


def dump_ensemble(
    directory: Path,
    ensemble: Sequence[NetworkRealization],
    runs: Sequence[RunStats] = (),
) -> None:
    """Writes the geometry CSV of every realization and the stats of runs."""
    directory.mkdir(parents=True, exist_ok=True)
    for realization in ensemble:
        realization.save(
            directory / f"realization_{realization.realization_id}.csv"
        )
    for stats in runs:
        name = f"stats_{stats.variant.value}_{stats.realization_id}.csv"
        stats.save(directory / name)


def _critical_task(
    task: tuple[
        ValidatedConfig, list[NetworkRealization], ConditionKind, float
    ],
) -> float:
    config, ensemble, kind, epsilon = task
    return critical_arrival_rate(ensemble, config, kind, epsilon)


def stability_region_table(
    config: ValidatedConfig,
    p_grid: Sequence[float],
    *,
    epsilons: Optional[Sequence[float]] = None,
    kinds: Sequence[ConditionKind] = CONDITION_KINDS,
    workers: Optional[int] = None,
    dump_dir: Optional[Path] = None,
) -> pd.DataFrame:
    """
    Critical arrival rates per access probability and condition kind.

    Args:
        config (ValidatedConfig): Base configuration; `access_prob` is
        replaced by every grid value.
        p_grid (Sequence[float]): Access probabilities.
        epsilons (Sequence[float], optional): Defaults to `[config.epsilon]`.
        kinds (Sequence[ConditionKind]): Condition kinds to evaluate.
        workers (int, optional): Pool size.
        dump_dir (Path, optional): Where to write the geometry CSVs.

    Returns:
        pd.DataFrame: Columns p, kind, epsilon, xi_star.
    """
    epsilons = [config.epsilon] if epsilons is None else list(epsilons)
    ensemble = sample_ensemble(config)
    if dump_dir is not None:
        dump_ensemble(dump_dir, ensemble)
    rows = [
        (p, kind, epsilon)
        for p in p_grid
        for epsilon in epsilons
        for kind in kinds
    ]
    tasks = [
        (apply_overrides(config, access_prob=p), ensemble, kind, epsilon)
        for p, kind, epsilon in rows
    ]
    rates = map_tasks(_critical_task, tasks, workers)
    return pd.DataFrame(
        [
            (p, kind.value, epsilon, xi_star)
            for (p, kind, epsilon), xi_star in zip(rows, rates)
        ],
        columns=STABILITY_COLUMNS,
    )


def local_delay_table(
    config: ValidatedConfig,
    sweep: SweepSpec,
    *,
    workers: Optional[int] = None,
    dump_dir: Optional[Path] = None,
) -> pd.DataFrame:
    """
    Pooled local-delay statistics of Backlogged runs along a sweep.

    Realizations keep their ids across sweep points, so every point reads
    the same random numbers.

    Returns:
        pd.DataFrame: Columns sweep_param, mean, variance,
        censored_fraction, diverging_flag; header only for an empty sweep.
    """
    points = [
        apply_overrides(
            config, **{sweep.name: value}, variant=SystemVariant.BACKLOGGED
        )
        for value in sweep.values
    ]
    ensembles = [sample_ensemble(point) for point in points]
    tasks = [
        (point, realization, SystemVariant.BACKLOGGED)
        for point, ensemble in zip(points, ensembles)
        for realization in ensemble
    ]
    results = iter(map_tasks(_run_task, tasks, workers))

    rows = []
    for index, (value, ensemble) in enumerate(zip(sweep.values, ensembles)):
        runs = [next(results) for _ in ensemble]
        if dump_dir is not None:
            dump_ensemble(dump_dir / f"point_{index}", ensemble, runs)
        summary = local_delay_summary(runs)
        rows.append(
            (
                value,
                summary.mean,
                summary.variance,
                summary.censored_fraction,
                int(summary.diverging),
            )
        )
    return pd.DataFrame(rows, columns=LOCAL_DELAY_COLUMNS)


def delay_cdf_table(
    config: ValidatedConfig,
    grid: Optional[Sequence[float]] = None,
    *,
    workers: Optional[int] = None,
    dump_dir: Optional[Path] = None,
) -> pd.DataFrame:
    """
    Mean-delay cdfs of the bounding systems, the original system and the
    fixed-point approximation, on one grid.

    The three variants run on coupled streams. The censored fraction column
    is the Original system's.

    Returns:
        pd.DataFrame: Columns grid_t, cdf_lower, cdf_empirical, cdf_upper,
        cdf_approx, censored_fraction.
    """
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    ensemble = sample_ensemble(config)
    variants = (
        SystemVariant.DOMINANT,
        SystemVariant.ORIGINAL,
        SystemVariant.FAVORABLE_DROP,
    )
    tasks = [
        (config, realization, variant)
        for variant in variants
        for realization in ensemble
    ]
    results = map_tasks(_run_task, tasks, workers)
    size = len(ensemble)
    lower, empirical, upper = (
        results[index * size : (index + 1) * size]
        for index in range(len(variants))
    )
    if dump_dir is not None:
        dump_ensemble(dump_dir, ensemble, [*lower, *empirical, *upper])

    fixed_point = fixed_point_busy(config, ensemble)
    logger.info(
        "busy probability %.4f after %d iterations (converged: %s)",
        fixed_point.rho,
        fixed_point.iterations,
        fixed_point.converged,
    )
    empirical_cdf = mean_delay_cdf(empirical, grid)
    return pd.DataFrame(
        {
            "grid_t": grid,
            "cdf_lower": mean_delay_cdf(lower, grid).cdf,
            "cdf_empirical": empirical_cdf.cdf,
            "cdf_upper": mean_delay_cdf(upper, grid).cdf,
            "cdf_approx": approx_delay_cdf(
                config, ensemble, fixed_point.rho, grid
            ).cdf,
            "censored_fraction": np.full(
                len(grid), empirical_cdf.censored_fraction
            ),
        },
        columns=CDF_COLUMNS,
    )


def window_convergence(
    config: ValidatedConfig,
    sides: tuple[float, float] = (100.0, 200.0),
    grid: Optional[Sequence[float]] = None,
    *,
    workers: Optional[int] = None,
) -> float:
    """
    Sup-norm distance between the Original mean-delay cdfs on two windows.

    A small distance means the torus is large enough for the cdf not to
    depend on its size.
    """
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    cdfs = []
    for side in sides:
        sized = apply_overrides(config, window_side=side)
        runs = run_ensemble(
            sized, sample_ensemble(sized), SystemVariant.ORIGINAL, workers
        )
        cdfs.append(mean_delay_cdf(runs, grid).cdf)
    return float(np.max(np.abs(cdfs[0] - cdfs[1]))) if len(grid) else 0.0
