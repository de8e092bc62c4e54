import logging
import math
from collections import Counter
from pathlib import Path

import numpy as np
import pytest
from numpy.testing import assert_allclose

from dfsmc import engine
from dfsmc.array_model import (
    ArrayGeometry,
    Scenario,
    SourceSet,
    coupling_matrix,
    generate_coupling_vector,
    simulate_snapshots,
    steering_matrix,
)
from dfsmc.dictionary import (
    DictionaryBlocks,
    build_dictionary,
    build_grid_degrees,
    psi_blocks,
    t_matrix,
)
from dfsmc.engine import (
    Hyperparams,
    LikelihoodTerms,
    Mode,
    PosteriorState,
    Schedule,
    SolverError,
    compute_likelihood_terms,
    coupling_system,
    e_step,
    offgrid_system,
    run_dfsmc,
    update_coupling_precision,
    update_coupling_vector,
    update_noise_precision,
    update_offgrid,
    update_signal_precision,
    write_trace_csv,
)
from dfsmc.metrics import error_e1

GEOMETRY = ArrayGeometry(6)
GRID = build_grid_degrees(-30.0, 30.0, 5.0)
DICTIONARY = build_dictionary(GRID, GEOMETRY)
COUPLING = np.array([1, 0.3 + 0.2j, 0.1 - 0.05j, 0, 0, 0])
SHORT_SCHEDULE = Schedule(n1=12, n2=3, n3=3)


def random_state(seed: int, num_snapshots: int = 4) -> PosteriorState:
    rng = np.random.default_rng(seed)
    size = GRID.size
    factor = rng.standard_normal((size, size)) + 1j * rng.standard_normal((size, size))

    return PosteriorState(
        mu=rng.standard_normal((size, num_snapshots))
        + 1j * rng.standard_normal((size, num_snapshots)),
        sigma_x=factor @ factor.conj().T / size,
        alpha_n=2.5,
        iota=rng.uniform(0.5, 2.0, size),
        vartheta=rng.uniform(0.5, 2.0, 6),
        c=COUPLING.copy(),
        nu=GRID.clamp(rng.uniform(-0.01, 0.01, size)),
    )


def random_snapshots(seed: int, num_snapshots: int = 4) -> np.ndarray:
    rng = np.random.default_rng(seed)

    return rng.standard_normal((6, num_snapshots)) + 1j * rng.standard_normal(
        (6, num_snapshots)
    )


def scenario_snapshots(
    directions_deg: list[float], snr_db: float, *, coupled: bool, seed: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    scenario = Scenario(
        geometry=GEOMETRY,
        sources=SourceSet(directions=np.radians(directions_deg)),
        snapshots=40,
        snr_db=snr_db,
    )
    coupling = (
        generate_coupling_vector(-8.0, 3, 6, np.random.default_rng(seed))
        if coupled
        else np.eye(6)[0]
    )
    snapshots, _ = simulate_snapshots(
        scenario,
        coupling,
        signal_rng=np.random.default_rng(seed + 1),
        noise_rng=np.random.default_rng(seed + 2),
    )

    return snapshots, coupling


def test_mode_flags() -> None:
    assert Mode.FULL.updates_offgrid
    assert Mode.FULL.updates_coupling
    assert not Mode.ON_GRID.updates_offgrid
    assert not Mode.ON_GRID.updates_coupling
    assert Mode.OFF_GRID_NO_COUPLING.updates_offgrid
    assert not Mode.OFF_GRID_NO_COUPLING.updates_coupling
    assert Mode("off_grid_no_coupling") is Mode.OFF_GRID_NO_COUPLING


def test_hyperparams_and_schedule_validate() -> None:
    with pytest.raises(ValueError, match="Hyperparameter b"):
        Hyperparams(b=0)

    with pytest.raises(ValueError, match="below"):
        Schedule(n1=10, n2=10)

    with pytest.raises(ValueError, match="Phase length"):
        Schedule(n3=1)


def test_initial_state() -> None:
    snapshots = random_snapshots(0, 10)
    state = PosteriorState.initial(snapshots, DICTIONARY)

    assert state.alpha_n == pytest.approx(
        60 / (0.01 * np.sum(np.abs(snapshots) ** 2))
    )
    assert_allclose(state.c, np.eye(6)[0])
    assert_allclose(state.vartheta, np.eye(6)[0])
    assert_allclose(state.nu, 0)
    assert_allclose(state.iota, 1)
    assert state.mu.shape == (GRID.size, 10)

    with pytest.raises(ValueError, match="identically zero"):
        PosteriorState.initial(np.zeros((6, 10)), DICTIONARY)


def test_e_step_matches_direct_inverse() -> None:
    state = random_state(1)
    snapshots = random_snapshots(2)
    effective = t_matrix(DICTIONARY, state.nu, state.c)

    expected_sigma = np.linalg.inv(
        state.alpha_n * effective.conj().T @ effective + np.diag(state.iota)
    )
    mu, sigma_x = e_step(snapshots, DICTIONARY, state)

    assert_allclose(sigma_x, expected_sigma, atol=1e-10)
    assert_allclose(
        mu, state.alpha_n * expected_sigma @ effective.conj().T @ snapshots, atol=1e-10
    )


def test_e_step_rejects_indefinite_precision() -> None:
    state = random_state(1)
    state.iota = np.full(GRID.size, -1e9)

    with pytest.raises(SolverError, match="positive definite"):
        e_step(random_snapshots(2), DICTIONARY, state)


def test_likelihood_terms() -> None:
    state = random_state(3)
    snapshots = random_snapshots(4)
    effective = t_matrix(DICTIONARY, state.nu, state.c)

    terms = compute_likelihood_terms(snapshots, DICTIONARY, state)

    assert terms.g1 == pytest.approx(
        np.trace(effective.conj().T @ effective @ state.sigma_x).real
    )
    assert_allclose(
        terms.g2, np.linalg.norm(snapshots - effective @ state.mu, axis=0) ** 2
    )
    assert terms.g3 == pytest.approx(np.sum(state.vartheta * np.abs(state.c) ** 2))


def test_noise_precision_iterative_and_fallback() -> None:
    hyper = Hyperparams()
    terms = LikelihoodTerms(g1=2.0, g2=np.array([1.0, 1.0]), g3=0.0)

    iterative = update_noise_precision(
        terms, num_snapshots=2, num_antennas=10, hyper=hyper, previous_alpha=3.0
    )
    assert iterative == pytest.approx((20 - 1 - 3.0 * 2.0) / (2 * 2.0 + hyper.b))

    fallback = update_noise_precision(
        terms, num_snapshots=2, num_antennas=10, hyper=hyper, previous_alpha=100.0
    )
    assert fallback == pytest.approx((20 + hyper.a - 1) / (2 * 2.0 + 2.0 + hyper.b))


def test_signal_precision_stays_positive() -> None:
    state = random_state(5, num_snapshots=8)
    hyper = Hyperparams()

    iota = update_signal_precision(state, hyper, 8)

    energy = np.sum(np.abs(state.mu) ** 2, axis=1)
    spread = 8 * state.sigma_x.diagonal().real
    iterative = (8 - 1 - state.iota * energy) / (hyper.d_hp + spread)
    closed = (8 + hyper.c_hp - 1) / (hyper.d_hp + spread + energy)

    assert np.all(iota > 0)
    assert_allclose(iota, np.where(iterative > 0, iterative, closed))


def test_coupling_precision() -> None:
    state = random_state(6)
    hyper = Hyperparams()

    assert_allclose(
        update_coupling_precision(state, hyper),
        1 / (hyper.f_hp + np.abs(COUPLING) ** 2),
    )


def test_coupling_system_matches_explicit_sums() -> None:
    state = random_state(7)
    snapshots = random_snapshots(8)
    psi = psi_blocks(DICTIONARY, state.nu)
    num_snapshots = snapshots.shape[1]

    expected_matrix = np.diag(state.vartheta).astype(np.complex128)
    expected_rhs = np.zeros(6, dtype=np.complex128)
    for m in range(num_snapshots):
        operator = np.tensordot(state.mu[:, m], psi, axes=1)
        expected_matrix += state.alpha_n * operator.conj().T @ operator
        expected_rhs += state.alpha_n * operator.conj().T @ snapshots[:, m]

    covariance_gram = np.zeros((6, 6), dtype=np.complex128)
    for p in range(GRID.size):
        for k in range(GRID.size):
            covariance_gram += state.sigma_x[k, p] * psi[p].conj().T @ psi[k]
    expected_matrix += state.alpha_n * num_snapshots * covariance_gram.conj().T

    matrix, rhs = coupling_system(snapshots, DICTIONARY, state)

    assert_allclose(matrix, expected_matrix, atol=1e-9)
    assert_allclose(rhs, expected_rhs, atol=1e-9)


def test_coupling_update_minimizes_expected_residual() -> None:
    state = random_state(9)
    snapshots = random_snapshots(10)
    psi = psi_blocks(DICTIONARY, state.nu)

    def objective(coupling: np.ndarray) -> float:
        effective = (psi @ coupling).T
        residual = np.sum(np.abs(snapshots - effective @ state.mu) ** 2)
        spread = np.trace(effective.conj().T @ effective @ state.sigma_x).real
        penalty = np.sum(state.vartheta * np.abs(coupling) ** 2)
        return float(
            state.alpha_n * (residual + snapshots.shape[1] * spread) + penalty
        )

    estimate = update_coupling_vector(snapshots, DICTIONARY, state)
    rng = np.random.default_rng(0)

    for _ in range(20):
        step = 1e-3 * (rng.standard_normal(6) + 1j * rng.standard_normal(6))
        assert objective(estimate) <= objective(estimate + step)


def test_coupling_recovered_from_known_signals() -> None:
    rng = np.random.default_rng(11)
    indices = [2, 6, 10]
    signals = rng.standard_normal((3, 30)) + 1j * rng.standard_normal((3, 30))
    snapshots = (
        coupling_matrix(COUPLING) @ steering_matrix(GRID.points[indices], GEOMETRY)
    ) @ signals

    mu = np.zeros((GRID.size, 30), dtype=np.complex128)
    mu[indices] = signals
    state = PosteriorState(
        mu=mu,
        sigma_x=np.zeros((GRID.size, GRID.size), dtype=np.complex128),
        alpha_n=1e10,
        iota=np.ones(GRID.size),
        vartheta=np.ones(6),
        c=np.eye(6, dtype=np.complex128)[0],
        nu=np.zeros(GRID.size),
    )

    assert_allclose(
        update_coupling_vector(snapshots, DICTIONARY, state), COUPLING, atol=1e-6
    )


def test_offgrid_recovered_from_known_signals() -> None:
    geometry = ArrayGeometry(8)
    grid = build_grid_degrees(-20.0, 20.0, 1.0)
    dictionary = build_dictionary(grid, geometry)
    coupling = np.array([1, 0.3 + 0.2j, 0.1 - 0.05j, 0, 0, 0, 0, 0])
    index = 30
    offset = math.radians(0.3)

    rng = np.random.default_rng(12)
    signals = rng.standard_normal(25) + 1j * rng.standard_normal(25)
    snapshots = np.outer(
        coupling_matrix(coupling)
        @ steering_matrix([grid.points[index] + offset], geometry)[:, 0],
        signals,
    )

    mu = np.zeros((grid.size, 25), dtype=np.complex128)
    mu[index] = signals
    state = PosteriorState(
        mu=mu,
        sigma_x=np.zeros((grid.size, grid.size), dtype=np.complex128),
        alpha_n=1.0,
        iota=np.ones(grid.size),
        vartheta=np.ones(8),
        c=coupling.astype(np.complex128),
        nu=np.zeros(grid.size),
    )

    nu = update_offgrid(snapshots, dictionary, state)

    assert math.degrees(nu[index]) == pytest.approx(0.3, abs=0.05)
    assert_allclose(np.delete(nu, index), 0, atol=1e-9)
    assert np.all(np.abs(nu) <= grid.step / 2)


def test_offgrid_system_gradient() -> None:
    state = random_state(13)
    snapshots = random_snapshots(14)
    state.nu = np.zeros(GRID.size)
    num_snapshots = snapshots.shape[1]

    def objective(nu: np.ndarray) -> float:
        effective = t_matrix(DICTIONARY, nu, state.c)
        residual = np.sum(np.abs(snapshots - effective @ state.mu) ** 2)
        spread = np.trace(effective.conj().T @ effective @ state.sigma_x).real
        return float(residual + num_snapshots * spread)

    matrix, rhs = offgrid_system(snapshots, DICTIONARY, state)
    nu = np.random.default_rng(15).uniform(-0.01, 0.01, GRID.size)

    step = 1e-4
    for u in (0, 5, 12):
        bump = np.zeros(GRID.size)
        bump[u] = step
        numeric = (objective(nu + bump) - objective(nu - bump)) / (2 * step)
        analytic = 2 * (matrix @ nu - rhs)[u]
        assert numeric == pytest.approx(analytic, rel=1e-6, abs=1e-5)


def test_phase_schedule() -> None:
    snapshots, _ = scenario_snapshots([-12.0, 14.0], 20.0, coupled=True)

    def phases(mode: Mode) -> list[str]:
        _, _, trace = run_dfsmc(
            snapshots, DICTIONARY, Hyperparams(), SHORT_SCHEDULE, mode, num_sources=2
        )
        return [record.phase for record in trace]

    assert phases(Mode.FULL) == [
        "none",
        "none",
        "coupling",
        "coupling",
        "offgrid",
        "offgrid+coupling",
        "coupling",
        "offgrid",
        "offgrid+coupling",
        "coupling",
        "offgrid",
        "offgrid+coupling",
    ]
    assert phases(Mode.ON_GRID) == ["none"] * 12
    assert phases(Mode.OFF_GRID_NO_COUPLING) == [
        "none",
        "none",
        "none",
        "none",
        "offgrid",
        "offgrid",
        "none",
        "offgrid",
        "offgrid",
        "none",
        "offgrid",
        "offgrid",
    ]


def test_frozen_parameters_stay_at_initial_values() -> None:
    snapshots, _ = scenario_snapshots([-12.0, 14.0], 20.0, coupled=True)

    result, state, _ = run_dfsmc(
        snapshots, DICTIONARY, Hyperparams(), SHORT_SCHEDULE, "on_grid", num_sources=2
    )
    assert_allclose(state.nu, 0)
    assert_allclose(state.c, np.eye(6)[0])
    assert_allclose(result.offsets, 0)

    result, state, _ = run_dfsmc(
        snapshots,
        DICTIONARY,
        Hyperparams(),
        SHORT_SCHEDULE,
        Mode.OFF_GRID_NO_COUPLING,
        num_sources=2,
    )
    assert_allclose(state.c, np.eye(6)[0])
    assert np.all(np.abs(result.offsets) <= GRID.step / 2)


def test_run_dfsmc_output() -> None:
    snapshots, _ = scenario_snapshots([-12.0, 14.0], 20.0, coupled=True)

    result, state, trace = run_dfsmc(
        snapshots, DICTIONARY, Hyperparams(), SHORT_SCHEDULE, num_sources=2
    )

    assert len(trace) == SHORT_SCHEDULE.n1
    assert [record.iteration for record in trace] == list(range(1, 13))
    assert all(record.e1_deg is None for record in trace)
    assert np.all(result.power > 0)
    assert_allclose(result.power, 1 / state.iota)
    assert result.picked_directions.shape == (2,)
    assert np.all(np.diff(result.picked_directions) >= 0)
    assert np.all(np.abs(result.offsets) <= GRID.step / 2)
    assert state.alpha_n > 0


@pytest.mark.parametrize("mode", list(Mode))
def test_on_grid_recovery_at_high_snr(mode: Mode) -> None:
    geometry = ArrayGeometry(12)
    grid = build_grid_degrees(-40.0, 40.0, 1.0)
    truth = np.radians([-20.0, 0.0, 25.0])
    scenario = Scenario(
        geometry=geometry, sources=SourceSet(directions=truth), snr_db=60.0
    )
    snapshots, _ = simulate_snapshots(
        scenario,
        np.eye(12)[0],
        signal_rng=np.random.default_rng(21),
        noise_rng=np.random.default_rng(22),
    )

    result, _, _ = run_dfsmc(
        snapshots,
        build_dictionary(grid, geometry),
        Hyperparams(),
        Schedule(n1=100, n2=50, n3=10),
        mode,
        num_sources=3,
    )

    distance = np.abs(grid.points[:, None] - result.picked_directions)
    nearest = grid.points[np.argmin(distance, axis=0)]

    assert_allclose(nearest, truth, atol=1e-12)
    if mode is Mode.ON_GRID:
        assert error_e1(result.picked_directions, truth) == pytest.approx(0, abs=1e-9)


def test_trace_with_truth() -> None:
    snapshots, _ = scenario_snapshots([-12.0, 14.0], 20.0, coupled=True)
    truth = np.radians([-12.0, 14.0])

    _, _, trace = run_dfsmc(
        snapshots,
        DICTIONARY,
        Hyperparams(),
        SHORT_SCHEDULE,
        num_sources=2,
        truth=truth,
    )

    assert all(record.e1_deg is not None and record.e1_deg >= 0 for record in trace)


def test_early_stop(monkeypatch: pytest.MonkeyPatch) -> None:
    snapshots, _ = scenario_snapshots([-12.0, 14.0], 20.0, coupled=True)
    monkeypatch.setattr(engine, "EARLY_STOP_TOLERANCE", math.inf)

    _, _, trace = run_dfsmc(
        snapshots,
        DICTIONARY,
        Hyperparams(),
        Schedule(n1=100, n2=50, n3=10, early_stop=True),
        num_sources=2,
    )

    assert len(trace) == engine.EARLY_STOP_WINDOW


def test_run_dfsmc_rejects_mismatched_snapshots() -> None:
    with pytest.raises(ValueError, match="snapshots"):
        run_dfsmc(
            np.ones((5, 10)), DICTIONARY, Hyperparams(), SHORT_SCHEDULE, num_sources=2
        )


def test_solver_error_carries_iteration() -> None:
    error = SolverError("Coupling system could not be solved.", iteration=7)

    assert error.iteration == 7
    assert str(error).endswith("(iteration 7)")
    assert SolverError("plain").iteration is None


def test_write_trace_csv(tmp_path: Path) -> None:
    snapshots, _ = scenario_snapshots([-12.0, 14.0], 20.0, coupled=True)
    _, _, trace = run_dfsmc(
        snapshots,
        DICTIONARY,
        Hyperparams(),
        SHORT_SCHEDULE,
        num_sources=2,
        truth=np.radians([-12.0, 14.0]),
    )
    path = tmp_path / "trace.csv"

    write_trace_csv(trace, path)
    lines = path.read_text(encoding="utf-8").splitlines()

    assert lines[0] == "iteration,phase,alpha_n,spectrum_change,e1_deg"
    assert len(lines) == 13
    assert lines[3].startswith("3,coupling,")


def relative_residual(matrix: np.ndarray, solution: np.ndarray, rhs: np.ndarray) -> float:
    scale = np.linalg.norm(rhs)
    error = np.linalg.norm(matrix @ solution - rhs)

    return float(error / scale) if scale > 0 else float(error)


def test_every_iteration_satisfies_its_normal_equations(
    monkeypatch: pytest.MonkeyPatch,
) -> None:
    snapshots, _ = scenario_snapshots([-12.0, 14.0], 20.0, coupled=True)
    calls: Counter[str] = Counter()

    original_e_step = engine.e_step
    original_solve = engine._solve_regularized  # noqa: SLF001
    original_offgrid = engine.update_offgrid

    def checked_e_step(
        snapshots: np.ndarray,
        dictionary: DictionaryBlocks,
        state: PosteriorState,
        *,
        psi: np.ndarray | None = None,
    ) -> tuple[np.ndarray, np.ndarray]:
        mu, sigma_x = original_e_step(snapshots, dictionary, state, psi=psi)

        effective = t_matrix(dictionary, state.nu, state.c)
        precision = state.alpha_n * effective.conj().T @ effective + np.diag(state.iota)
        rhs = state.alpha_n * effective.conj().T @ snapshots
        scale = 1 / np.sqrt(precision.diagonal().real)

        # Jacobi-scaled: (S P S)(S^-1 Sigma S^-1) == I
        unit_residual = scale[:, None] * (precision @ sigma_x) / scale[None, :]
        assert np.max(np.abs(unit_residual - np.eye(len(scale)))) < 1e-8
        assert relative_residual(precision, mu, rhs) < 1e-8

        assert np.max(np.abs(sigma_x - sigma_x.conj().T)) < 1e-12
        spread = np.sqrt(sigma_x.diagonal().real)
        assert np.min(np.linalg.eigvalsh(sigma_x / np.outer(spread, spread))) > 0

        calls["posterior"] += 1
        return mu, sigma_x

    def checked_solve(
        matrix: np.ndarray, rhs: np.ndarray, system: str, level: int
    ) -> np.ndarray:
        solution = original_solve(matrix, rhs, system, level)

        trace = abs(np.trace(matrix).real)
        ridge = engine.RIDGE_SCALE * (trace / len(rhs) if trace > 0 else 1)
        identity = np.eye(len(rhs))
        assert (
            min(
                relative_residual(matrix, solution, rhs),
                relative_residual(matrix + ridge * identity, solution, rhs),
            )
            < 1e-8
        )

        calls[system] += 1
        return solution

    def checked_offgrid(
        snapshots: np.ndarray, dictionary: DictionaryBlocks, state: PosteriorState
    ) -> np.ndarray:
        nu = original_offgrid(snapshots, dictionary, state)
        assert np.all(np.abs(nu) <= dictionary.grid.step / 2)

        calls["offgrid"] += 1
        return nu

    monkeypatch.setattr(engine, "e_step", checked_e_step)
    monkeypatch.setattr(engine, "_solve_regularized", checked_solve)
    monkeypatch.setattr(engine, "update_offgrid", checked_offgrid)

    run_dfsmc(
        snapshots,
        DICTIONARY,
        Hyperparams(),
        Schedule(n1=60, n2=10, n3=5),
        num_sources=2,
    )

    assert calls["posterior"] == 60
    assert calls["Coupling system"] > 0
    assert calls["Off-grid system"] == calls["offgrid"] > 0


def test_offgrid_update_clamps_to_half_a_step() -> None:
    geometry = ArrayGeometry(8)
    grid = build_grid_degrees(-20.0, 20.0, 1.0)
    dictionary = build_dictionary(grid, geometry)
    index = 30

    rng = np.random.default_rng(16)
    signals = rng.standard_normal(25) + 1j * rng.standard_normal(25)
    snapshots = np.outer(
        steering_matrix([grid.points[index] + 0.7 * grid.step], geometry)[:, 0],
        signals,
    )

    mu = np.zeros((grid.size, 25), dtype=np.complex128)
    mu[index] = signals
    state = PosteriorState(
        mu=mu,
        sigma_x=np.zeros((grid.size, grid.size), dtype=np.complex128),
        alpha_n=1.0,
        iota=np.ones(grid.size),
        vartheta=np.ones(8),
        c=np.eye(8, dtype=np.complex128)[0],
        nu=np.zeros(grid.size),
    )

    matrix, rhs = offgrid_system(snapshots, dictionary, state)
    unclamped = rhs[index] / matrix[index, index]

    assert unclamped == pytest.approx(0.7 * grid.step, rel=0.1)
    assert update_offgrid(snapshots, dictionary, state)[index] == grid.step / 2


def test_singular_coupling_system_is_regularized(
    caplog: pytest.LogCaptureFixture,
) -> None:
    state = random_state(17)
    state.mu = np.zeros_like(state.mu)
    state.sigma_x = np.zeros_like(state.sigma_x)
    state.vartheta = np.zeros(6)

    with caplog.at_level(logging.WARNING, logger="dfsmc.engine"):
        coupling = update_coupling_vector(random_snapshots(18), DICTIONARY, state)

    assert_allclose(coupling, 0)
    assert "Coupling system is ill-conditioned" in caplog.text


def test_well_conditioned_coupling_system_is_solved_directly(
    caplog: pytest.LogCaptureFixture,
) -> None:
    state = random_state(19)
    snapshots = random_snapshots(20)
    matrix, rhs = coupling_system(snapshots, DICTIONARY, state)

    with caplog.at_level(logging.DEBUG, logger="dfsmc.engine"):
        coupling = update_coupling_vector(snapshots, DICTIONARY, state)

    assert_allclose(coupling, np.linalg.solve(matrix, rhs), rtol=1e-10)
    assert "ill-conditioned" not in caplog.text


def test_inactive_precisions_grow_without_noise() -> None:
    geometry = ArrayGeometry(12)
    grid = build_grid_degrees(-40.0, 40.0, 1.0)
    scenario = Scenario(
        geometry=geometry,
        sources=SourceSet(directions=np.radians([10.0])),
        snr_db=math.inf,
    )
    snapshots, _ = simulate_snapshots(
        scenario,
        np.eye(12)[0],
        signal_rng=np.random.default_rng(23),
        noise_rng=np.random.default_rng(24),
    )

    _, state, _ = run_dfsmc(
        snapshots,
        build_dictionary(grid, geometry),
        Hyperparams(),
        Schedule(n1=100, n2=50, n3=10),
        Mode.ON_GRID,
        num_sources=1,
    )

    active = int(np.argmin(np.abs(grid.degrees - 10.0)))
    far = np.abs(grid.degrees - 10.0) > 10.0

    assert np.min(state.iota[far]) >= 10 * state.iota[active]
