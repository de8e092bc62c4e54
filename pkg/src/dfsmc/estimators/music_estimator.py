"""MUSIC baseline on the sample covariance."""

from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
from scipy.linalg import LinAlgError, eigh
from typing_extensions import override

from dfsmc.array_model import ArrayGeometry, SnapshotMatrix, steering_matrix
from dfsmc.dictionary import Grid
from dfsmc.engine import SolverError
from dfsmc.estimator import DoaEstimator, Estimate, EstimatorSetup
from dfsmc.spectrum import SpectrumResult, pick_peaks


@dataclass(frozen=True, eq=False)
class CovarianceEstimate:
    """Hermitian N x N covariance matrix."""

    matrix: npt.NDArray[np.complex128]


@dataclass(frozen=True, eq=False)
class MusicResult:
    """Pseudospectrum, picked directions and ascending covariance eigenvalues."""

    spectrum: npt.NDArray[np.float64]
    picked: npt.NDArray[np.float64]
    eigenvalues: npt.NDArray[np.float64]


def sample_covariance(snapshots: SnapshotMatrix) -> CovarianceEstimate:
    """Sample covariance Y Y^H / M, symmetrized to be exactly Hermitian.

    Raises:
        ValueError: If there are no snapshots.
    """
    snapshots = np.asarray(snapshots, dtype=np.complex128)

    if snapshots.ndim != 2 or snapshots.shape[1] < 1:  # noqa: PLR2004
        raise ValueError(f"Expected an N x M matrix with M >= 1, got {snapshots.shape}.")

    matrix = snapshots @ snapshots.conj().T / snapshots.shape[1]

    return CovarianceEstimate(matrix=(matrix + matrix.conj().T) / 2)


def music_spectrum(
    covariance: CovarianceEstimate,
    grid: Grid,
    geometry: ArrayGeometry,
    num_sources: int,
) -> MusicResult:
    """MUSIC pseudospectrum 1 / |E_n^H a(zeta_u)|^2 on the grid.

    The noise subspace E_n is spanned by the eigenvectors of the N - K
    smallest eigenvalues. The grid search uses the ideal steering vectors,
    so the estimator is unaware of coupling.

    Args:
        covariance: Covariance estimate.
        grid: Search grid.
        geometry: The array.
        num_sources: Number of sources K, below N.

    Returns:
        The pseudospectrum, the K picked directions in radians and the
        eigenvalues of the covariance.

    Raises:
        ValueError: If K is not within [1, N).
        SolverError: If the eigendecomposition does not converge.
    """
    num_antennas = geometry.num_antennas

    if not 1 <= num_sources < num_antennas:
        raise ValueError(
            f"MUSIC needs 1 <= K < N={num_antennas}, got K={num_sources}."
        )

    try:
        eigenvalues, eigenvectors = eigh(covariance.matrix)
    except LinAlgError as exc:
        raise SolverError("Covariance eigendecomposition did not converge.") from exc

    noise_subspace = eigenvectors[:, : num_antennas - num_sources]
    leakage = np.sum(
        np.abs(noise_subspace.conj().T @ steering_matrix(grid.points, geometry)) ** 2,
        axis=0,
    )
    power = 1 / np.maximum(leakage, np.finfo(np.float64).tiny)

    return MusicResult(
        spectrum=power,
        picked=pick_peaks(power, np.zeros(grid.size), grid, num_sources),
        eigenvalues=eigenvalues,
    )


class MusicEstimator(DoaEstimator):
    """Subspace baseline searching the dictionary grid."""

    @override
    def __init__(self, setup: EstimatorSetup) -> None:
        self._setup = setup

    @override
    def estimate(
        self,
        snapshots: SnapshotMatrix,
        num_sources: int,
        *,
        truth: npt.ArrayLike | None = None,
    ) -> Estimate:
        result = music_spectrum(
            sample_covariance(snapshots),
            self._setup.grid,
            self._setup.geometry,
            num_sources,
        )

        return Estimate(
            spectrum=SpectrumResult(
                power=result.spectrum,
                offsets=np.zeros(self._setup.grid.size),
                picked_directions=result.picked,
            )
        )
