"""Spatial spectra and peak picking."""

from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from .dictionary import Grid


@dataclass(frozen=True, eq=False)
class SpectrumResult:
    """Output of an estimator: per-grid power, off-grid offsets and picks.

    All angles are in radians.
    """

    power: npt.NDArray[np.float64]
    offsets: npt.NDArray[np.float64]
    picked_directions: npt.NDArray[np.float64]

    @property
    def picked_degrees(self) -> npt.NDArray[np.float64]:
        """Picked directions in degrees."""
        return np.degrees(self.picked_directions)


def local_maxima(power: npt.NDArray[np.float64]) -> npt.NDArray[np.bool_]:
    """Flag entries strictly greater than their neighbors.

    Boundary entries are compared with their only neighbor, and a single
    entry counts as a maximum.
    """
    padded = np.pad(power, 1, constant_values=-np.inf)

    return (power > padded[:-2]) & (power > padded[2:])


def pick_peaks(
    power: npt.ArrayLike,
    offsets: npt.ArrayLike,
    grid: Grid,
    num_sources: int,
) -> npt.NDArray[np.float64]:
    """Select the directions of the K strongest spectral peaks.

    Local maxima are ranked by power with ties going to the lower grid
    index. If there are fewer than K local maxima the remaining picks are
    the largest non-peak entries, ranked the same way.

    Args:
        power: Spectrum, one value per grid point.
        offsets: Off-grid offsets in radians, one per grid point.
        grid: The grid the spectrum lives on.
        num_sources: Number of directions K to return.

    Returns:
        K directions zeta_u + nu_u in radians, sorted ascending.

    Raises:
        ValueError: If the inputs do not match the grid or K is out of range.
    """
    power = np.asarray(power, dtype=np.float64)
    offsets = np.asarray(offsets, dtype=np.float64)

    if power.shape != (grid.size,) or offsets.shape != (grid.size,):
        raise ValueError(
            f"Spectrum and offsets must have length {grid.size}, "
            f"got {power.shape} and {offsets.shape}."
        )

    if not 1 <= num_sources <= grid.size:
        raise ValueError(
            f"Number of sources must lie in [1, {grid.size}], got {num_sources}."
        )

    indices = np.arange(grid.size)
    peaks = local_maxima(power)

    # lexsort sorts by the last key first: peaks, then power, then index
    ranking = np.lexsort((indices, -power, ~peaks))
    chosen = ranking[:num_sources]

    return np.sort(grid.points[chosen] + offsets[chosen])
