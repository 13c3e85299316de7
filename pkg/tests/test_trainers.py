"""Training loops: hand-checked scalar steps, stopping statuses, schedules.

Scalar oracle used throughout: d=1, L=2, target 2, step 0.1.  Starting from
layers (1, 1) both layer gradients equal -1, so one step lands both layers
on 1.1, and the second step lands them on 1.1 + 0.1 * 1.1 * 0.79 = 1.1869.
"""

import numpy as np
import pytest

from deeplin.errors import ConfigError
from deeplin.trainers import (
    DIVERGE_LOSS,
    StepSchedule,
    TrainerConfig,
    admissible_step,
    run_gd,
    run_penalty_gd,
    run_power_projection,
    run_step_and_project,
    step_size_power_projection,
    step_size_symmetric_target,
)


def scalar_cfg(**kw):
    base = dict(
        algorithm="gd",
        d=1,
        L=2,
        schedule=StepSchedule("constant", 0.1),
        max_iters=2,
        record_layers=True,
    )
    base.update(kw)
    return TrainerConfig(**base)


def test_gd_scalar_hand_steps():
    trace = run_gd(np.array([[2.0]]), scalar_cfg())
    assert trace.status == "budget"
    assert trace.iterations == 2
    assert trace.etas == [0.1, 0.1]
    losses = trace.losses()
    assert losses[0] == 0.5
    assert losses[1] == pytest.approx(0.5 * 0.79**2, abs=1e-15)
    l1 = trace.records[1].layers
    assert l1[0][0, 0] == 1.1 and l1[1][0, 0] == 1.1
    l2 = trace.records[2].layers
    assert l2[0][0, 0] == pytest.approx(1.1869, abs=1e-12)
    assert l2[1][0, 0] == pytest.approx(1.1869, abs=1e-12)


def test_gd_updates_are_simultaneous():
    # a sequential sweep would put layer 2 at 1.099 after one step and near
    # 1.0176 after two; the simultaneous update keeps the layers identical
    trace = run_gd(np.array([[2.0]]), scalar_cfg())
    for record in trace.records[1:]:
        assert record.layers[0][0, 0] == record.layers[1][0, 0]


def test_gd_converged_at_start():
    cfg = TrainerConfig(
        "gd", 2, 3, StepSchedule("constant", 0.1), max_iters=10, epsilon=1e-15
    )
    trace = run_gd(np.eye(2), cfg)
    assert trace.status == "converged"
    assert trace.iterations == 0
    assert trace.etas == []
    np.testing.assert_array_equal(trace.final_layers[0], np.eye(2))


def test_gd_divergence_keeps_last_finite_iterate():
    cfg = TrainerConfig(
        "gd", 1, 3, StepSchedule("constant", 1.0), max_iters=50, record_layers=True
    )
    trace = run_gd(np.array([[3.0]]), cfg)
    assert trace.status == "diverged"
    assert all(np.isfinite(m).all() for m in trace.final_layers)
    assert trace.records[-1].loss <= DIVERGE_LOSS
    assert np.isfinite(trace.losses()).all()


def test_sequence_schedule_repeats_last_step():
    cfg = TrainerConfig(
        "gd", 1, 2, StepSchedule("sequence", etas=(0.2, 0.05)), max_iters=4
    )
    trace = run_gd(np.array([[2.0]]), cfg)
    assert trace.etas == [0.2, 0.05, 0.05, 0.05]


def test_admissible_schedule_bounds_and_descends():
    rng = np.random.default_rng(41)
    q, _ = np.linalg.qr(rng.standard_normal((2, 2)))
    phi = q @ np.diag([1.5, 0.5]) @ q.T
    cfg = TrainerConfig(
        "gd", 2, 3, StepSchedule("admissible"), max_iters=200, epsilon=0.0
    )
    trace = run_gd(phi, cfg)
    cap = 1.0 / (3.0 * 3 * 2**5)
    assert all(0.0 < e <= cap for e in trace.etas)
    losses = trace.losses()
    assert np.all(np.diff(losses) <= 1e-15)


def test_admissible_step_shrinks_with_radius():
    tight = admissible_step(2, 3, 1.0, 0.0, 0.1)
    loose = admissible_step(2, 3, 1.0, 0.5, 0.1)
    assert loose < tight


def test_trace_monotone_statistics():
    cfg = scalar_cfg(max_iters=30)
    trace = run_gd(np.array([[2.0]]), cfg)
    assert np.all(np.diff(trace.radii()) >= 0.0)
    assert np.all(np.diff(trace.u_stats()) >= 0.0)
    assert trace.iterations == len(trace.records) - 1
    assert len(trace.etas) == trace.iterations


def test_step_size_helpers():
    phi = np.diag([2.0, 1.0])
    assert step_size_symmetric_target(phi, 8) == pytest.approx(1.0 / 40.0)
    expected = 1.0 / (3.0 * 4 * 2**5 * 5.0)
    assert step_size_power_projection(phi, 4) == pytest.approx(expected)


def test_config_validation_errors():
    with pytest.raises(ConfigError):
        TrainerConfig("gd", 1, 1, StepSchedule("constant", -0.1)).validate()
    with pytest.raises(ConfigError):
        TrainerConfig(
            "gd", 1, 1, StepSchedule("sequence", etas=(0.1, -0.2))
        ).validate()
    with pytest.raises(ConfigError):
        TrainerConfig("nope", 1, 1, StepSchedule("constant", 0.1)).validate()
    with pytest.raises(ConfigError):
        TrainerConfig(
            "power_projection", 2, 2, StepSchedule("constant", 0.1)
        ).validate()
    with pytest.raises(ConfigError):
        TrainerConfig(
            "penalty_gd", 2, 2, StepSchedule("constant", 0.1), kappa=1.5
        ).validate()
    with pytest.raises(ConfigError):
        TrainerConfig("gd", 1, 1, StepSchedule("warp", 0.1)).validate()
    with pytest.raises(ConfigError):
        TrainerConfig(
            "step_and_project", 2, 2, StepSchedule("default"), gamma=1.0
        ).validate()
    with pytest.raises(ConfigError):
        run_gd(np.eye(3), TrainerConfig("gd", 2, 2, StepSchedule("constant", 0.1)))
    with pytest.raises(ConfigError):
        run_power_projection(
            np.eye(1), scalar_cfg()
        )


def test_power_projection_respects_floor_and_half_losses():
    cfg = TrainerConfig(
        "power_projection", 2, 2, StepSchedule("default"),
        gamma=0.5, max_iters=40, epsilon=0.0,
    )
    trace = run_power_projection(2.0 * np.eye(2), cfg)
    assert trace.status == "budget"
    root = 0.5 ** 0.5
    assert np.all(trace.min_svs() >= root - 1e-9)
    assert trace.records[0].loss_half is None
    assert all(r.loss_half is not None for r in trace.records[1:])
    losses = trace.losses()
    assert np.all(np.diff(losses) <= 1e-15)
    # integer-step loss cannot exceed the preceding half-step loss, since
    # the projection target is feasible here
    halves = trace.loss_halves()
    assert np.all(losses[1:] <= halves[1:] + 1e-12)


def test_power_projection_fixed_point_is_immediate():
    cfg = TrainerConfig(
        "power_projection", 2, 3, StepSchedule("default"),
        gamma=0.5, max_iters=10, epsilon=0.0,
    )
    trace = run_power_projection(0.5 * np.eye(2), cfg)
    assert trace.status == "converged"
    assert trace.iterations == 0


def test_power_projection_warns_on_thin_margin():
    cfg = TrainerConfig(
        "power_projection", 2, 2, StepSchedule("constant", 0.01),
        gamma=0.5, max_iters=3,
    )
    with pytest.warns(UserWarning):
        run_power_projection(np.diag([-1.0, 1.0]), cfg)


def test_step_and_project_stays_in_ball():
    cfg = TrainerConfig(
        "step_and_project", 2, 2, StepSchedule("constant", 0.05),
        gamma=1.0, psi=0.3, max_iters=50, record_layers=True,
    )
    trace = run_step_and_project(np.diag([2.0, 0.5]), cfg)
    assert trace.status == "budget"
    assert np.all(trace.radii() <= 0.3 + 1e-12)
    for record in trace.records:
        for m in record.layers:
            dev = np.linalg.svd(m - np.eye(2), compute_uv=False)[0]
            assert dev <= 0.3 + 1e-12


def test_step_and_project_zero_radius_pins_identity():
    # radius zero sends every layer back to I, so the loss never moves
    cfg = TrainerConfig(
        "step_and_project", 2, 2, StepSchedule("constant", 0.1),
        gamma=1.0, psi=0.0, max_iters=5, record_layers=True,
    )
    trace = run_step_and_project(np.diag([2.0, 0.0]), cfg)
    assert trace.status == "budget"
    assert len(trace.records) == 6
    np.testing.assert_allclose(trace.losses(), 1.0, atol=0)
    for record in trace.records:
        for m in record.layers:
            np.testing.assert_array_equal(m, np.eye(2))


def test_penalty_gd_full_pull_zero_step():
    # kappa = 1 with a zero step size is a fixed point at the identity
    cfg = TrainerConfig(
        "penalty_gd", 2, 3, StepSchedule("constant", 0.0),
        kappa=1.0, max_iters=4, record_layers=True,
    )
    trace = run_penalty_gd(np.diag([3.0, 1.0]), cfg)
    assert trace.status == "budget"
    np.testing.assert_allclose(trace.losses(), 2.0, atol=0)
    for record in trace.records:
        for m in record.layers:
            np.testing.assert_array_equal(m, np.eye(2))


def test_even_depth_negative_eigenvalue_floor_small():
    # a -0.8 eigenvalue cannot be matched by an even-depth product, so the
    # loss never dips below 0.8^2 / 2
    phi = np.diag([-0.8, 1.0])
    gd_cfg = TrainerConfig(
        "gd", 2, 4, StepSchedule("constant", 0.1), max_iters=300
    )
    pen_cfg = TrainerConfig(
        "penalty_gd", 2, 4, StepSchedule("constant", 0.1),
        kappa=0.05, max_iters=300,
    )
    for trace in (run_gd(phi, gd_cfg), run_penalty_gd(phi, pen_cfg)):
        assert trace.losses().min() >= 0.32 - 1e-12


def test_penalty_gd_two_update_forms():
    phi = np.array([[2.0]])
    common = dict(
        d=1, L=2, schedule=StepSchedule("constant", 0.1),
        kappa=0.5, max_iters=2, record_layers=True,
    )
    canonical = run_penalty_gd(
        phi, TrainerConfig("penalty_gd", penalty_canonical=True, **common)
    )
    alternate = run_penalty_gd(
        phi, TrainerConfig("penalty_gd", penalty_canonical=False, **common)
    )
    # both forms agree at the first step from identity layers
    assert canonical.records[1].layers[0][0, 0] == pytest.approx(1.1, abs=1e-15)
    assert alternate.records[1].layers[0][0, 0] == pytest.approx(1.1, abs=1e-15)
    # and separate at the second
    assert canonical.records[2].layers[0][0, 0] == pytest.approx(1.1369, abs=1e-12)
    assert alternate.records[2].layers[0][0, 0] == pytest.approx(1.1819, abs=1e-12)


def test_penalty_gd_kappa_one_restarts_from_identity():
    # kappa = 1 in canonical form rebuilds each layer as I - eta * grad,
    # with the gradient still taken at the current iterate
    phi = np.array([[2.0]])
    cfg = TrainerConfig(
        "penalty_gd", 1, 2, StepSchedule("constant", 0.1),
        kappa=1.0, max_iters=3, record_layers=True,
    )
    trace = run_penalty_gd(phi, cfg)
    theta = 1.0
    for record in trace.records[1:]:
        expected = 1.0 - 0.1 * theta * (theta**2 - 2.0)
        theta = record.layers[0][0, 0]
        assert theta == pytest.approx(expected, abs=1e-14)


def test_spectra_recording():
    cfg = TrainerConfig(
        "gd", 2, 2, StepSchedule("constant", 0.05),
        max_iters=5, record_spectra=True,
    )
    trace = run_gd(np.diag([2.0, 0.5]), cfg)
    for record in trace.records:
        assert record.eigenvalues is not None
        assert record.eigenvalues.shape == (2,)
    # diagonal dynamics keep the spectrum real
    assert np.abs(np.imag(trace.records[-1].eigenvalues)).max() == 0.0
