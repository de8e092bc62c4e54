"""Forward model of a uniform linear array with mutual coupling."""

import cmath
import logging
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import numpy.typing as npt
from scipy.linalg import toeplitz

logger = logging.getLogger(__name__)

CouplingVector = npt.NDArray[np.complex128]
SnapshotMatrix = npt.NDArray[np.complex128]

DEFAULT_SPACING = 0.5
DEFAULT_SIGNAL_MEAN = cmath.rect(math.sqrt(2), math.pi / 2)
DEFAULT_SIGNAL_VARIANCE = 1.0
DEFAULT_COUPLING_TAPS = 5
COUPLING_MAGNITUDE_JITTER = 0.05

COUPLING_STREAM = 1
SIGNAL_STREAM = 2
NOISE_STREAM = 3
TRUTH_STREAM = 4

MAX_SEED = 2**64


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform linear array.

    Only the ratio of element spacing to wavelength enters the model, so
    `spacing` is expressed in wavelengths.
    """

    num_antennas: int
    spacing: float = DEFAULT_SPACING

    def __post_init__(self) -> None:  # noqa: D105
        if self.num_antennas < 2:  # noqa: PLR2004
            raise ValueError(
                f"An array needs at least 2 antennas, got {self.num_antennas}."
            )

        if not math.isfinite(self.spacing) or self.spacing <= 0:
            raise ValueError(f"Antenna spacing must be positive, got {self.spacing}.")

    @property
    def phase_rates(self) -> npt.NDArray[np.float64]:
        """Per-antenna phase slope 2*pi*n*d/lambda with respect to sin(theta)."""
        return 2 * np.pi * self.spacing * np.arange(self.num_antennas)


@dataclass(frozen=True, eq=False)
class SourceSet:
    """Far-field narrowband sources sharing one complex Gaussian signal law."""

    directions: npt.NDArray[np.float64]
    signal_mean: complex = DEFAULT_SIGNAL_MEAN
    signal_variance: float = DEFAULT_SIGNAL_VARIANCE

    def __post_init__(self) -> None:  # noqa: D105
        directions = np.array(self.directions, dtype=np.float64).reshape(-1)
        directions.setflags(write=False)
        object.__setattr__(self, "directions", directions)

        if directions.size == 0:
            raise ValueError("At least one source direction is required.")

        if not np.all(np.isfinite(directions)) or np.any(
            np.abs(directions) >= np.pi / 2
        ):
            raise ValueError("Source directions must lie strictly inside (-pi/2, pi/2).")

        if np.any(np.diff(directions) <= 0):
            raise ValueError("Source directions must be strictly increasing.")

        if not math.isfinite(self.signal_variance) or self.signal_variance <= 0:
            raise ValueError(
                f"Signal variance must be positive, got {self.signal_variance}."
            )

    @property
    def num_sources(self) -> int:
        """Number of sources K."""
        return self.directions.size

    @property
    def power(self) -> float:
        """Per-source power E{|s|^2}."""
        return abs(self.signal_mean) ** 2 + self.signal_variance


@dataclass(frozen=True)
class Scenario:
    """Everything needed to simulate one snapshot matrix."""

    geometry: ArrayGeometry
    sources: SourceSet
    snapshots: int = 100
    snr_db: float = 20.0
    coupling_alpha_db: float = -8.0
    coupling_taps: int = DEFAULT_COUPLING_TAPS
    seed: int = 0

    def __post_init__(self) -> None:  # noqa: D105
        if self.snapshots < 1:
            raise ValueError(f"Snapshot count must be positive, got {self.snapshots}.")

        if not 1 <= self.coupling_taps <= self.geometry.num_antennas:
            raise ValueError(
                f"Coupling taps must lie in [1, {self.geometry.num_antennas}], "
                f"got {self.coupling_taps}."
            )

        if math.isnan(self.snr_db):
            raise ValueError("SNR must not be NaN.")

        if not math.isfinite(self.coupling_alpha_db):
            raise ValueError(
                f"Coupling strength must be finite, got {self.coupling_alpha_db}."
            )

        if not 0 <= self.seed < MAX_SEED:
            raise ValueError(f"Seed must be a 64-bit unsigned integer, got {self.seed}.")

    @property
    def noise_variance(self) -> float:
        """Noise variance implied by the per-source SNR definition."""
        return self.sources.power * 10 ** (-self.snr_db / 10)


class TrialStreams(NamedTuple):
    """Independent random streams for the stochastic parts of one trial."""

    coupling: np.random.Generator
    signal: np.random.Generator
    noise: np.random.Generator
    truth: np.random.Generator


def trial_streams(seed: int) -> TrialStreams:
    """Derive the per-component random streams of a trial.

    Each stream is seeded from the pair (component label, trial seed), so a
    component can be regenerated without drawing the others.

    Args:
        seed: The trial seed, a 64-bit unsigned integer.

    Returns:
        The coupling, signal, noise and truth streams.

    Raises:
        ValueError: If the seed is out of range.
    """
    if not 0 <= seed < MAX_SEED:
        raise ValueError(f"Seed must be a 64-bit unsigned integer, got {seed}.")

    return TrialStreams(
        *(
            np.random.default_rng([label, seed])
            for label in (COUPLING_STREAM, SIGNAL_STREAM, NOISE_STREAM, TRUTH_STREAM)
        )
    )


def steering_vector(
    theta: float, geometry: ArrayGeometry
) -> npt.NDArray[np.complex128]:
    """Ideal array response a(theta) to a unit plane wave.

    Args:
        theta: Direction in radians, |theta| <= pi/2.
        geometry: The array.

    Returns:
        Length-N vector with entry n equal to exp(j*2*pi*n*d*sin(theta)).

    Raises:
        ValueError: If theta is not finite or outside [-pi/2, pi/2].
    """
    if not math.isfinite(theta):
        raise ValueError(f"Direction must be finite, got {theta}.")

    if abs(theta) > np.pi / 2:
        raise ValueError(f"Direction must lie in [-pi/2, pi/2], got {theta}.")

    return np.exp(1j * geometry.phase_rates * math.sin(theta))


def steering_matrix(
    thetas: npt.ArrayLike, geometry: ArrayGeometry
) -> npt.NDArray[np.complex128]:
    """Stack steering vectors column-wise into an N x K matrix."""
    thetas = np.asarray(thetas, dtype=np.float64).reshape(-1)

    if not np.all(np.isfinite(thetas)):
        raise ValueError("Directions must be finite.")

    return np.exp(1j * np.outer(geometry.phase_rates, np.sin(thetas)))


def coupling_matrix(coupling: CouplingVector) -> npt.NDArray[np.complex128]:
    """Symmetric (not Hermitian) Toeplitz coupling matrix C[i, j] = c_|i-j|."""
    coupling = np.asarray(coupling, dtype=np.complex128)

    return toeplitz(coupling, coupling)


def rearrange_response(
    response: npt.NDArray[np.complex128],
) -> npt.NDArray[np.complex128]:
    """Rearrange array responses into Q so that Toeplitz{c} @ a == Q @ c.

    Q is the sum of a Hankel part, whose entry (i, n) is a[i + n] while
    i + n < N, and a lower triangular part, whose entry (i, n) is a[i - n]
    for 1 <= n <= i. The same pattern applied to da/dtheta yields dQ/dtheta.

    Args:
        response: Array of shape (..., N) holding one response per leading
            index.

    Returns:
        Array of shape (..., N, N).
    """
    num_antennas = response.shape[-1]
    rows = np.arange(num_antennas)[:, None]
    cols = np.arange(num_antennas)[None, :]

    upper = rows + cols
    lower = rows - cols

    hankel = np.where(
        upper < num_antennas, response[..., np.minimum(upper, num_antennas - 1)], 0
    )
    triangular = np.where(
        (cols >= 1) & (lower >= 0), response[..., np.maximum(lower, 0)], 0
    )

    return hankel + triangular


def q_matrix(theta: float, geometry: ArrayGeometry) -> npt.NDArray[np.complex128]:
    """Matrix Q(theta) of the rearrangement Toeplitz{c} @ a(theta) == Q(theta) @ c.

    Args:
        theta: Direction in radians.
        geometry: The array.

    Returns:
        The N x N matrix Q(theta).

    Raises:
        ValueError: If theta is not finite or outside [-pi/2, pi/2].
    """
    return rearrange_response(steering_vector(theta, geometry))


def generate_coupling_vector(
    alpha_db: float,
    taps: int,
    num_antennas: int,
    rng: np.random.Generator,
    *,
    shared_phase: bool = False,
) -> CouplingVector:
    """Draw a random coupling vector with a decaying magnitude profile.

    c_0 is fixed to 1. For 1 <= n < taps the magnitude is
    (1 + xi) * 10**(alpha_db * (1 + 0.5 n) / 20) with xi uniform in
    [-0.05, 0.05] and the phase is uniform in [0, 2*pi), both drawn per lag
    unless shared_phase is set, in which case one jitter and one phase apply
    to every lag. Remaining coefficients are zero.

    Args:
        alpha_db: Coupling strength between adjacent antennas, in dB.
        taps: Number of nonzero coefficients, c_0 included.
        num_antennas: Length of the vector.
        rng: Random stream to draw from.
        shared_phase: Draw a single jitter and phase for all lags.

    Returns:
        The coupling vector.

    Raises:
        ValueError: If taps is not within [1, num_antennas].
    """
    if not 1 <= taps <= num_antennas:
        raise ValueError(f"Coupling taps must lie in [1, {num_antennas}], got {taps}.")

    coupling = np.zeros(num_antennas, dtype=np.complex128)
    coupling[0] = 1.0

    lags = np.arange(1, taps)
    draws = 1 if shared_phase else lags.size
    jitter = rng.uniform(-COUPLING_MAGNITUDE_JITTER, COUPLING_MAGNITUDE_JITTER, size=draws)
    phases = rng.uniform(0, 2 * np.pi, size=draws)

    coupling[1:taps] = (
        (1 + jitter) * np.exp(1j * phases) * 10 ** (alpha_db * (1 + 0.5 * lags) / 20)
    )

    return coupling


def complex_gaussian(
    rng: np.random.Generator,
    mean: complex,
    variance: float,
    shape: tuple[int, ...],
) -> npt.NDArray[np.complex128]:
    """Draw circular complex Gaussian samples with the given total variance."""
    scale = math.sqrt(variance / 2)

    return mean + scale * (
        rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    )


def simulate_snapshots(
    scenario: Scenario,
    coupling: CouplingVector,
    *,
    signal_rng: np.random.Generator,
    noise_rng: np.random.Generator,
) -> tuple[SnapshotMatrix, float]:
    """Simulate Y = C A S + noise.

    Args:
        scenario: The scenario to simulate.
        coupling: Coupling vector of length N.
        signal_rng: Stream for the source signals S.
        noise_rng: Stream for the additive noise.

    Returns:
        The N x M snapshot matrix and the noise variance used.

    Raises:
        ValueError: If K >= N or the coupling vector has the wrong length.
    """
    geometry = scenario.geometry
    sources = scenario.sources

    if sources.num_sources >= geometry.num_antennas:
        raise ValueError(
            f"Need fewer sources than antennas, got K={sources.num_sources} and "
            f"N={geometry.num_antennas}."
        )

    coupling = np.asarray(coupling, dtype=np.complex128)
    if coupling.shape != (geometry.num_antennas,):
        raise ValueError(
            f"Coupling vector must have length {geometry.num_antennas}, "
            f"got shape {coupling.shape}."
        )

    signals = complex_gaussian(
        signal_rng,
        sources.signal_mean,
        sources.signal_variance,
        (sources.num_sources, scenario.snapshots),
    )
    snapshots = coupling_matrix(coupling) @ (
        steering_matrix(sources.directions, geometry) @ signals
    )

    noise_variance = scenario.noise_variance
    if noise_variance > 0:
        snapshots += complex_gaussian(noise_rng, 0, noise_variance, snapshots.shape)

    logger.debug(
        "Simulated %d x %d snapshots with noise variance %.3e",
        *snapshots.shape,
        noise_variance,
    )

    return snapshots, noise_variance
