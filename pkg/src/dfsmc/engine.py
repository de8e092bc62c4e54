"""Expectation-maximization engine for off-grid direction finding with coupling.

One run alternates the posterior of the sparse signal matrix with updates of
the noise precision, the per-grid signal precisions, the coupling
precisions, the coupling vector and the off-grid offsets, following a fixed
three-phase schedule.
"""

import csv
import logging
import math
import warnings
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
import numpy.typing as npt
from scipy.linalg import (
    LinAlgError,
    LinAlgWarning,
    cho_factor,
    cho_solve,
    get_lapack_funcs,
    lu_factor,
    lu_solve,
)
from typing_extensions import Self

from .array_model import CouplingVector, SnapshotMatrix
from .dictionary import DictionaryBlocks, OffGridVector, psi_blocks
from .metrics import error_e1
from .spectrum import SpectrumResult, pick_peaks

logger = logging.getLogger(__name__)

CONDITION_LIMIT = 1e14
RIDGE_SCALE = 1e-10
INITIAL_SNR_DB = 20.0
EARLY_STOP_TOLERANCE = 1e-8
EARLY_STOP_WINDOW = 10

TRACE_HEADER = ("iteration", "phase", "alpha_n", "spectrum_change", "e1_deg")


class SolverError(RuntimeError):
    def __init__(self, message: str, iteration: int | None = None) -> None:
        """A linear system of the EM iteration could not be solved.

        Args:
            message: What failed.
            iteration: The 1-based EM iteration, when known.
        """
        if iteration is not None:
            message = f"{message} (iteration {iteration})"

        super().__init__(message)
        self.iteration = iteration


class Mode(str, Enum):
    """Which parameter groups an EM run estimates."""

    FULL = "full"
    ON_GRID = "on_grid"
    OFF_GRID_NO_COUPLING = "off_grid_no_coupling"

    @property
    def updates_offgrid(self) -> bool:
        """Whether the off-grid offsets are estimated."""
        return self is not Mode.ON_GRID

    @property
    def updates_coupling(self) -> bool:
        """Whether the coupling vector and its precisions are estimated."""
        return self is Mode.FULL


@dataclass(frozen=True)
class Hyperparams:
    """Gamma shape/rate pairs for the noise, signal and coupling precisions."""

    a: float = 1 + 1e-3
    b: float = 1e-3
    c_hp: float = 1 + 1e-3
    d_hp: float = 1e-3
    e_hp: float = 1 + 1e-3
    f_hp: float = 1e-3

    def __post_init__(self) -> None:  # noqa: D105
        for name, value in vars(self).items():
            if not math.isfinite(value) or value <= 0:
                raise ValueError(f"Hyperparameter {name} must be positive, got {value}.")


@dataclass(frozen=True)
class Schedule:
    """Iteration schedule.

    `n1` iterations run in total. From iteration `n2` on, coupling and
    off-grid phases alternate, each flipping when its counter reaches `n3`.
    """

    n1: int = 1000
    n2: int = 300
    n3: int = 50
    early_stop: bool = False

    def __post_init__(self) -> None:  # noqa: D105
        if self.n1 < 1 or self.n2 < 1:
            raise ValueError(f"Iteration counts must be positive, got {self.n1}, {self.n2}.")

        if self.n2 >= self.n1:
            raise ValueError(f"Warm-up length {self.n2} must be below {self.n1}.")

        if self.n3 < 2:  # noqa: PLR2004
            raise ValueError(f"Phase length must be at least 2, got {self.n3}.")


@dataclass(eq=False)
class PosteriorState:
    """Complete mutable state of one EM run."""

    mu: npt.NDArray[np.complex128]
    sigma_x: npt.NDArray[np.complex128]
    alpha_n: float
    iota: npt.NDArray[np.float64]
    vartheta: npt.NDArray[np.float64]
    c: CouplingVector
    nu: OffGridVector

    @classmethod
    def initial(cls, snapshots: SnapshotMatrix, dictionary: DictionaryBlocks) -> Self:
        """Warm start: c = vartheta = e_0, nu = 0, iota = 1, assumed 20 dB SNR.

        Raises:
            ValueError: If the snapshots are identically zero.
        """
        num_antennas, num_snapshots = snapshots.shape
        energy = float(np.sum(np.abs(snapshots) ** 2))

        if energy == 0:
            raise ValueError("Snapshot matrix is identically zero.")

        unit = np.zeros(num_antennas)
        unit[0] = 1.0

        alpha_n = num_antennas * num_snapshots / (10 ** (-INITIAL_SNR_DB / 10) * energy)
        logger.debug("Initial noise precision %.6e", alpha_n)

        return cls(
            mu=np.zeros((dictionary.num_grid, num_snapshots), dtype=np.complex128),
            sigma_x=np.eye(dictionary.num_grid, dtype=np.complex128),
            alpha_n=alpha_n,
            iota=np.ones(dictionary.num_grid),
            vartheta=unit.copy(),
            c=unit.astype(np.complex128),
            nu=np.zeros(dictionary.num_grid),
        )


@dataclass(frozen=True, eq=False)
class LikelihoodTerms:
    """Expected residual terms shared by the noise, coupling and off-grid updates."""

    g1: float
    g2: npt.NDArray[np.float64]
    g3: float


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    phase: str
    alpha_n: float
    spectrum_change: float
    e1_deg: float | None = None


def _effective_dictionary(
    psi: npt.NDArray[np.complex128], coupling: CouplingVector
) -> npt.NDArray[np.complex128]:
    return (psi @ coupling).T


def e_step(
    snapshots: SnapshotMatrix,
    dictionary: DictionaryBlocks,
    state: PosteriorState,
    *,
    psi: npt.NDArray[np.complex128] | None = None,
) -> tuple[npt.NDArray[np.complex128], npt.NDArray[np.complex128]]:
    """Posterior mean and covariance of the sparse signal matrix.

    Sigma_X = (alpha_n T^H T + diag(iota))^-1 and mu_m = alpha_n Sigma_X T^H y_m.
    The system is solved by a Cholesky factorization after symmetric
    diagonal scaling.

    Args:
        snapshots: N x M snapshot matrix.
        dictionary: The dictionary.
        state: Current state; alpha_n, iota, c and nu are read.
        psi: Precomputed Psi(nu) blocks for the current offsets.

    Returns:
        The U x M posterior means and the U x U posterior covariance.

    Raises:
        SolverError: If the posterior precision is not numerically positive
            definite.
    """
    if psi is None:
        psi = psi_blocks(dictionary, state.nu)

    effective = _effective_dictionary(psi, state.c)
    precision = state.alpha_n * (effective.conj().T @ effective) + np.diag(state.iota)
    precision = (precision + precision.conj().T) / 2

    diagonal = precision.diagonal().real
    if not np.all(np.isfinite(precision)) or np.any(diagonal <= 0):
        raise SolverError("Posterior precision is not positive definite.")

    scale = 1 / np.sqrt(diagonal)

    try:
        factor = cho_factor(
            precision * np.outer(scale, scale), lower=True, check_finite=False
        )
    except LinAlgError as exc:
        raise SolverError("Posterior precision is numerically singular.") from exc

    sigma_x = scale[:, None] * cho_solve(factor, np.diag(scale).astype(np.complex128))
    sigma_x = (sigma_x + sigma_x.conj().T) / 2

    rhs = state.alpha_n * (effective.conj().T @ snapshots)
    mu = scale[:, None] * cho_solve(factor, scale[:, None] * rhs)

    if not (np.all(np.isfinite(sigma_x)) and np.all(np.isfinite(mu))):
        raise SolverError("Posterior moments overflowed.")

    return mu, sigma_x


def compute_likelihood_terms(
    snapshots: SnapshotMatrix,
    dictionary: DictionaryBlocks,
    state: PosteriorState,
    *,
    psi: npt.NDArray[np.complex128] | None = None,
) -> LikelihoodTerms:
    """Evaluate G1 = Tr{T^H T Sigma_X}, G2_m = |y_m - T mu_m|^2 and G3 = sum vartheta |c|^2."""
    if psi is None:
        psi = psi_blocks(dictionary, state.nu)

    effective = _effective_dictionary(psi, state.c)
    gram = effective.conj().T @ effective

    g1 = max(float(np.sum(gram * state.sigma_x.T).real), 0.0)
    g2 = np.sum(np.abs(snapshots - effective @ state.mu) ** 2, axis=0)
    g3 = float(np.sum(state.vartheta * np.abs(state.c) ** 2))

    return LikelihoodTerms(g1=g1, g2=g2, g3=g3)


def update_noise_precision(
    terms: LikelihoodTerms,
    *,
    num_snapshots: int,
    num_antennas: int,
    hyper: Hyperparams,
    previous_alpha: float,
) -> float:
    """Noise precision update.

    Uses the iterative form (MN - 1 - alpha * sum G2) / (M G1 + b) and falls
    back to the closed form (MN + a - 1) / (M G1 + sum G2 + b) whenever the
    iterative value is not positive.
    """
    size = num_snapshots * num_antennas
    residual = float(np.sum(terms.g2))
    spread = num_snapshots * terms.g1

    iterative = (size - 1 - previous_alpha * residual) / (spread + hyper.b)
    if math.isfinite(iterative) and iterative > 0:
        return iterative

    return (size + hyper.a - 1) / (spread + residual + hyper.b)


def update_signal_precision(
    state: PosteriorState, hyper: Hyperparams, num_snapshots: int
) -> npt.NDArray[np.float64]:
    """Per-grid signal precision update.

    The iterative form (M - 1 - iota_u sum_m |mu_um|^2) / (d + M Sigma_uu)
    is used where positive, the closed form
    (M + c - 1) / (d + M Sigma_uu + sum_m |mu_um|^2) elsewhere.
    """
    energy = np.sum(np.abs(state.mu) ** 2, axis=1)
    spread = num_snapshots * state.sigma_x.diagonal().real

    with np.errstate(divide="ignore", invalid="ignore"):
        iterative = (num_snapshots - 1 - state.iota * energy) / (hyper.d_hp + spread)

    closed = (num_snapshots + hyper.c_hp - 1) / (hyper.d_hp + spread + energy)

    return np.where(np.isfinite(iterative) & (iterative > 0), iterative, closed)


def update_coupling_precision(
    state: PosteriorState, hyper: Hyperparams
) -> npt.NDArray[np.float64]:
    """Coupling precisions vartheta_n = 1 / (f + |c_n|^2)."""
    return 1 / (hyper.f_hp + np.abs(state.c) ** 2)


def _factor_with_condition(
    matrix: npt.NDArray,
) -> tuple[tuple[npt.NDArray, npt.NDArray], float]:
    # lu_factor only warns on an exactly singular pivot; gecon reports it as 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LinAlgWarning)
        factor = lu_factor(matrix, check_finite=False)

    (gecon,) = get_lapack_funcs(("gecon",), (factor[0],))
    rcond, _ = gecon(factor[0], float(np.linalg.norm(matrix, 1)))

    return factor, float(rcond)


def _solve_regularized(
    matrix: npt.NDArray, rhs: npt.NDArray, system: str, level: int
) -> npt.NDArray:
    if not np.all(np.isfinite(matrix)):
        raise SolverError(f"{system} has non-finite entries.")

    factor, rcond = _factor_with_condition(matrix)

    if not rcond * CONDITION_LIMIT > 1:
        condition = 1 / rcond if rcond > 0 else math.inf
        trace = abs(np.trace(matrix).real)
        ridge = RIDGE_SCALE * trace / matrix.shape[0] if trace > 0 else RIDGE_SCALE
        logger.log(
            level,
            "%s is ill-conditioned (condition estimate %.3e), adding ridge %.3e",
            system,
            condition,
            ridge,
        )
        factor, _ = _factor_with_condition(matrix + ridge * np.eye(matrix.shape[0]))

    solution = lu_solve(factor, rhs, check_finite=False)

    if not np.all(np.isfinite(solution)):
        raise SolverError(f"{system} could not be solved.")

    return solution


def coupling_system(
    snapshots: SnapshotMatrix,
    dictionary: DictionaryBlocks,
    state: PosteriorState,
    *,
    psi: npt.NDArray[np.complex128] | None = None,
) -> tuple[npt.NDArray[np.complex128], npt.NDArray[np.complex128]]:
    """Normal equations H c = z of the coupling vector.

    With P_m = sum_u mu_um Psi_u and W = sum_p sum_k Psi_p^H Psi_k Sigma_kp,
    H = alpha_n sum_m P_m^H P_m + alpha_n M W^H + diag(vartheta) and
    z = alpha_n sum_m P_m^H y_m. Both sums over m collapse onto the second
    moment S = mu mu^H + M Sigma_X, giving

        H = alpha_n sum_u sum_v S_vu Psi_u^H Psi_v + diag(vartheta)
        z = alpha_n sum_u Psi_u^H (Y mu^H)[:, u]

    so the cost grows with U^2 (M + N^2) and never forms the M operators P_m.

    Returns:
        The N x N matrix H and the length-N vector z.
    """
    if psi is None:
        psi = psi_blocks(dictionary, state.nu)

    num_snapshots = snapshots.shape[1]
    second_moment = state.mu @ state.mu.conj().T + num_snapshots * state.sigma_x

    weighted = np.tensordot(second_moment, psi, axes=([0], [0]))
    gram = np.tensordot(psi.conj(), weighted, axes=([0, 1], [0, 1]))

    matrix = state.alpha_n * gram + np.diag(state.vartheta)
    matrix = (matrix + matrix.conj().T) / 2

    projected = snapshots @ state.mu.conj().T
    rhs = state.alpha_n * np.einsum("uji,ju->i", psi.conj(), projected)

    return matrix, rhs


def update_coupling_vector(
    snapshots: SnapshotMatrix,
    dictionary: DictionaryBlocks,
    state: PosteriorState,
    *,
    psi: npt.NDArray[np.complex128] | None = None,
) -> CouplingVector:
    """Solve H c = z for the coupling vector.

    The estimate is not renormalized, so c_0 may drift from 1.

    Raises:
        SolverError: If H cannot be solved even after regularization.
    """
    matrix, rhs = coupling_system(snapshots, dictionary, state, psi=psi)

    return _solve_regularized(matrix, rhs, "Coupling system", logging.WARNING)


def offgrid_system(
    snapshots: SnapshotMatrix,
    dictionary: DictionaryBlocks,
    state: PosteriorState,
) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """Normal equations G nu = z of the off-grid offsets.

    With A = D (I kron c) and B = Xi (I kron c), the objective
    M G1 + sum_m G2_m equals nu^T G nu - 2 z^T nu + const for

        G = Re{(B^H B) * conj(M Sigma_X + mu mu^H)}
        z = Re{sum_m (B^H (Y - A mu)) * conj(mu)} - M Re{diag(B^H A Sigma_X)}

    where * is the elementwise product.

    Returns:
        The U x U matrix G and the length-U vector z.
    """
    num_snapshots = snapshots.shape[1]

    on_grid = _effective_dictionary(dictionary.d_blocks, state.c)
    slope = _effective_dictionary(dictionary.xi_blocks, state.c)
    slope_h = slope.conj().T

    second_moment = num_snapshots * state.sigma_x + state.mu @ state.mu.conj().T
    matrix = np.real((slope_h @ slope) * second_moment.conj())
    matrix = (matrix + matrix.T) / 2

    residual = snapshots - on_grid @ state.mu
    rhs = np.real(np.sum((slope_h @ residual) * state.mu.conj(), axis=1))
    rhs -= num_snapshots * np.real(np.sum((slope_h @ on_grid) * state.sigma_x.T, axis=1))

    return matrix, rhs


def update_offgrid(
    snapshots: SnapshotMatrix,
    dictionary: DictionaryBlocks,
    state: PosteriorState,
) -> OffGridVector:
    """Solve G nu = z and clamp every offset to [-step/2, step/2].

    Raises:
        SolverError: If G cannot be solved even after regularization.
    """
    matrix, rhs = offgrid_system(snapshots, dictionary, state)
    offsets = _solve_regularized(matrix, rhs, "Off-grid system", logging.DEBUG)

    return dictionary.grid.clamp(offsets)


def spectrum(state: PosteriorState) -> npt.NDArray[np.float64]:
    """Spatial spectrum P_X,u = 1 / iota_u."""
    return 1 / state.iota


def run_dfsmc(  # noqa: C901, PLR0913, PLR0914
    snapshots: SnapshotMatrix,
    dictionary: DictionaryBlocks,
    hyper: Hyperparams,
    schedule: Schedule,
    mode: Mode | str = Mode.FULL,
    *,
    num_sources: int,
    truth: npt.ArrayLike | None = None,
) -> tuple[SpectrumResult, PosteriorState, list[TraceRecord]]:
    """Run the EM iteration for a fixed number of iterations.

    Every iteration computes the posterior and updates alpha_n and iota.
    From iteration `schedule.n2` on, a coupling phase (vartheta, then c)
    and an off-grid phase (nu) alternate. The phase counter starts at 1 and
    flips the phase when it reaches `schedule.n3`; the iteration that flips
    out of an off-grid phase also runs a coupling update.

    Args:
        snapshots: N x M snapshot matrix.
        dictionary: The dictionary.
        hyper: Gamma hyperparameters.
        schedule: Iteration schedule.
        mode: `full`, `on_grid` (nu, vartheta and c frozen) or
            `off_grid_no_coupling` (vartheta and c frozen).
        num_sources: Number of directions to pick.
        truth: Optional true directions in radians; when given, every trace
            record carries the error of the directions picked so far.

    Returns:
        The spectrum with picked directions, the final state and the
        per-iteration trace.

    Raises:
        ValueError: If the snapshot matrix does not match the dictionary.
        SolverError: If a linear solve fails, tagged with its iteration.
    """
    snapshots = np.asarray(snapshots, dtype=np.complex128)
    mode = Mode(mode)

    if snapshots.ndim != 2 or snapshots.shape[0] != dictionary.num_antennas:  # noqa: PLR2004
        raise ValueError(
            f"Expected {dictionary.num_antennas} x M snapshots, got {snapshots.shape}."
        )

    num_antennas, num_snapshots = snapshots.shape
    grid = dictionary.grid
    truth = None if truth is None else np.asarray(truth, dtype=np.float64)

    state = PosteriorState.initial(snapshots, dictionary)
    psi = psi_blocks(dictionary, state.nu)
    power = spectrum(state)

    offgrid_phase = False
    phase_counter = 1
    quiet = 0
    trace = []

    for iteration in range(1, schedule.n1 + 1):
        phases = []

        try:
            state.mu, state.sigma_x = e_step(snapshots, dictionary, state, psi=psi)
            terms = compute_likelihood_terms(snapshots, dictionary, state, psi=psi)
            state.alpha_n = update_noise_precision(
                terms,
                num_snapshots=num_snapshots,
                num_antennas=num_antennas,
                hyper=hyper,
                previous_alpha=state.alpha_n,
            )
            state.iota = update_signal_precision(state, hyper, num_snapshots)

            if iteration >= schedule.n2 and offgrid_phase:
                phase_counter += 1
                if phase_counter == schedule.n3:
                    phase_counter = 1
                    offgrid_phase = False
                    logger.debug("Iteration %d: switching to coupling phase", iteration)

                if mode.updates_offgrid:
                    state.nu = update_offgrid(snapshots, dictionary, state)
                    psi = psi_blocks(dictionary, state.nu)
                    phases.append("offgrid")

            if iteration >= schedule.n2 and not offgrid_phase:
                phase_counter += 1
                if phase_counter == schedule.n3:
                    phase_counter = 1
                    offgrid_phase = True
                    logger.debug("Iteration %d: switching to off-grid phase", iteration)

                if mode.updates_coupling:
                    state.vartheta = update_coupling_precision(state, hyper)
                    state.c = update_coupling_vector(
                        snapshots, dictionary, state, psi=psi
                    )
                    phases.append("coupling")
        except SolverError as exc:
            raise SolverError(str(exc), iteration=iteration) from exc

        new_power = spectrum(state)
        change = float(np.max(np.abs(new_power - power)))
        power = new_power

        e1_deg = None
        if truth is not None:
            picked = pick_peaks(power, state.nu, grid, num_sources)
            e1_deg = error_e1(picked, truth)

        trace.append(
            TraceRecord(
                iteration=iteration,
                phase="+".join(phases) or "none",
                alpha_n=state.alpha_n,
                spectrum_change=change,
                e1_deg=e1_deg,
            )
        )

        if schedule.early_stop:
            quiet = quiet + 1 if change < EARLY_STOP_TOLERANCE else 0
            if quiet >= EARLY_STOP_WINDOW:
                logger.debug("Spectrum converged after %d iterations", iteration)
                break

    result = SpectrumResult(
        power=power,
        offsets=state.nu.copy(),
        picked_directions=pick_peaks(power, state.nu, grid, num_sources),
    )

    return result, state, trace


def write_trace_csv(trace: list[TraceRecord], path: str | Path) -> None:
    """Write per-iteration trace records as CSV."""
    with Path(path).open("w", newline="", encoding="utf-8") as file:
        writer = csv.writer(file)
        writer.writerow(TRACE_HEADER)

        for record in trace:
            writer.writerow((
                record.iteration,
                record.phase,
                float(record.alpha_n),
                float(record.spectrum_change),
                "" if record.e1_deg is None else float(record.e1_deg),
            ))
