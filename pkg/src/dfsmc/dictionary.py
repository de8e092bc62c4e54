"""Direction grid and the block-structured off-grid dictionary.

The dictionary is kept as U blocks of N x N. The flat N x UN form and the
Kronecker products that appear in the model are never materialized: every
product against them factors through the blocks.
"""

import math
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from .array_model import (
    ArrayGeometry,
    CouplingVector,
    rearrange_response,
    steering_matrix,
)

OffGridVector = npt.NDArray[np.float64]

GRID_TOLERANCE = 1e-9


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniformly spaced candidate directions, in radians."""

    points: npt.NDArray[np.float64]
    step: float

    def __post_init__(self) -> None:  # noqa: D105
        points = np.array(self.points, dtype=np.float64).reshape(-1)
        points.setflags(write=False)
        object.__setattr__(self, "points", points)

        if points.size == 0:
            raise ValueError("A grid needs at least one point.")

        if not math.isfinite(self.step) or self.step <= 0:
            raise ValueError(f"Grid step must be positive, got {self.step}.")

        if np.any(np.diff(points) <= 0):
            raise ValueError("Grid points must be strictly increasing.")

    @property
    def size(self) -> int:
        """Number of grid points U."""
        return self.points.size

    @property
    def degrees(self) -> npt.NDArray[np.float64]:
        """Grid points in degrees."""
        return np.degrees(self.points)

    def clamp(self, offsets: npt.ArrayLike) -> OffGridVector:
        """Project off-grid offsets onto [-step/2, step/2]."""
        return np.clip(
            np.asarray(offsets, dtype=np.float64), -self.step / 2, self.step / 2
        )


def build_grid(range_lo: float, range_hi: float, step: float) -> Grid:
    """Build the inclusive lattice range_lo, range_lo + step, ... <= range_hi.

    Args:
        range_lo: Lower end of the direction range, radians.
        range_hi: Upper end of the direction range, radians.
        step: Grid spacing, radians.

    Returns:
        The grid with floor((hi - lo) / step) + 1 points.

    Raises:
        ValueError: If the range is reversed, the step is not positive, or
            the step exceeds a nonempty range.
    """
    if not all(math.isfinite(value) for value in (range_lo, range_hi, step)):
        raise ValueError("Grid range and step must be finite.")

    if step <= 0:
        raise ValueError(f"Grid step must be positive, got {step}.")

    if range_hi < range_lo:
        raise ValueError(f"Grid range is reversed: [{range_lo}, {range_hi}].")

    span = range_hi - range_lo
    if 0 < span < step * (1 - GRID_TOLERANCE):
        raise ValueError(f"Grid step {step} is larger than the range {span}.")

    count = math.floor(span / step + GRID_TOLERANCE) + 1

    return Grid(points=range_lo + step * np.arange(count), step=step)


def build_grid_degrees(range_lo: float, range_hi: float, step: float) -> Grid:
    """Same as `build_grid` with all arguments in degrees."""
    return build_grid(math.radians(range_lo), math.radians(range_hi), math.radians(step))


@dataclass(frozen=True, eq=False)
class DictionaryBlocks:
    """Per-grid blocks D_u = Q(zeta_u) and their derivatives Xi_u = dQ/dtheta."""

    grid: Grid
    geometry: ArrayGeometry
    d_blocks: npt.NDArray[np.complex128]
    xi_blocks: npt.NDArray[np.complex128]

    def __post_init__(self) -> None:  # noqa: D105
        shape = (self.grid.size, self.geometry.num_antennas, self.geometry.num_antennas)

        for name in ("d_blocks", "xi_blocks"):
            blocks = np.array(getattr(self, name), dtype=np.complex128)

            if blocks.shape != shape:
                raise ValueError(
                    f"Expected {name} of shape {shape}, got {blocks.shape}."
                )

            blocks.setflags(write=False)
            object.__setattr__(self, name, blocks)

    @property
    def num_grid(self) -> int:
        """Number of grid points U."""
        return self.grid.size

    @property
    def num_antennas(self) -> int:
        """Number of antennas N."""
        return self.geometry.num_antennas


def build_dictionary(grid: Grid, geometry: ArrayGeometry) -> DictionaryBlocks:
    """Build D and its analytic direction derivative Xi on a grid.

    The derivative replaces every a_n(zeta) in the pattern of Q by
    j * 2*pi*n*d * cos(zeta) * a_n(zeta).

    Args:
        grid: Candidate directions.
        geometry: The array.

    Returns:
        The dictionary blocks.
    """
    responses = steering_matrix(grid.points, geometry).T
    derivatives = (
        1j * np.outer(np.cos(grid.points), geometry.phase_rates) * responses
    )

    return DictionaryBlocks(
        grid=grid,
        geometry=geometry,
        d_blocks=rearrange_response(responses),
        xi_blocks=rearrange_response(derivatives),
    )


def _check_length(dictionary: DictionaryBlocks, vector: npt.NDArray, name: str) -> None:
    if vector.shape != (dictionary.num_grid,):
        raise ValueError(
            f"{name} must have length {dictionary.num_grid}, got shape {vector.shape}."
        )


def psi_blocks(
    dictionary: DictionaryBlocks, nu: OffGridVector
) -> npt.NDArray[np.complex128]:
    """First-order off-grid blocks Psi_u(nu) = D_u + nu_u * Xi_u.

    Args:
        dictionary: The dictionary.
        nu: Off-grid offsets, radians, one per grid point.

    Returns:
        Array of shape (U, N, N).

    Raises:
        ValueError: If nu has the wrong length.
    """
    nu = np.asarray(nu, dtype=np.float64)
    _check_length(dictionary, nu, "Off-grid vector")

    return dictionary.d_blocks + nu[:, None, None] * dictionary.xi_blocks


def t_matrix(
    dictionary: DictionaryBlocks, nu: OffGridVector, coupling: CouplingVector
) -> npt.NDArray[np.complex128]:
    """Effective N x U dictionary with column u equal to Psi_u(nu) @ c.

    Equals Psi(nu) (I_U kron c), so that T @ x == Psi(nu) (x kron c).
    """
    return (psi_blocks(dictionary, nu) @ np.asarray(coupling, dtype=np.complex128)).T


def p_matrix(
    dictionary: DictionaryBlocks,
    nu: OffGridVector,
    mu_m: npt.NDArray[np.complex128],
) -> npt.NDArray[np.complex128]:
    """Coupling-side operator sum_u mu_u * Psi_u(nu).

    Equals Psi(nu) (mu_m kron I_N), so that P @ c == T(nu, c) @ mu_m.

    Raises:
        ValueError: If mu_m has the wrong length.
    """
    mu_m = np.asarray(mu_m, dtype=np.complex128)
    _check_length(dictionary, mu_m, "Signal vector")

    return np.tensordot(mu_m, psi_blocks(dictionary, nu), axes=1)
