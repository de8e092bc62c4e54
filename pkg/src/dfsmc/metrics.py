"""Direction error metrics.

Estimated and true directions are paired by sorted order. Inputs are in
radians, results in degrees.
"""

from collections.abc import Sequence

import numpy as np
import numpy.typing as npt


def _paired_squared_errors(
    estimated: npt.ArrayLike, truth: npt.ArrayLike
) -> npt.NDArray[np.float64]:
    estimated = np.sort(np.asarray(estimated, dtype=np.float64).reshape(-1))
    truth = np.sort(np.asarray(truth, dtype=np.float64).reshape(-1))

    if estimated.shape != truth.shape:
        raise ValueError(
            f"Cannot pair {estimated.size} estimated directions with "
            f"{truth.size} true directions."
        )

    return np.degrees(estimated - truth) ** 2


def error_e1(estimated: npt.ArrayLike, truth: npt.ArrayLike) -> float:
    """Root mean square direction error of a single trial, in degrees.

    Raises:
        ValueError: If the two direction sets differ in length.
    """
    return float(np.sqrt(np.mean(_paired_squared_errors(estimated, truth))))


def error_e2(
    estimates: Sequence[npt.ArrayLike], truths: Sequence[npt.ArrayLike]
) -> float:
    """Root mean square direction error pooled over trials, in degrees.

    Raises:
        ValueError: If there are no trials, the trial counts differ, or a
            trial's direction sets differ in length.
    """
    if len(estimates) != len(truths):
        raise ValueError(
            f"Got {len(estimates)} estimates for {len(truths)} trials."
        )

    if not estimates:
        raise ValueError("At least one trial is required.")

    squared = np.concatenate([
        _paired_squared_errors(estimated, truth)
        for estimated, truth in zip(estimates, truths, strict=True)
    ])

    return float(np.sqrt(np.mean(squared)))
