"""Training loops for the deep linear model, all starting from (scaled)
identity layers and all updating every layer simultaneously from the same
pre-step iterate.

Four variants:

* ``run_gd``: plain gradient descent.
* ``run_power_projection``: gradient step, Frobenius projection of the
  end-to-end product onto the gamma-positive set, then balanced
  refactorization into layers.
* ``run_step_and_project``: gradient step followed by projecting each layer
  onto an operator-norm ball around the identity.
* ``run_penalty_gd``: gradient descent with a pull toward identity layers,
  either the shrink-toward-identity update (canonical) or plain descent on
  the penalized objective.

Traces record one row per iterate, including t = 0, and are deterministic:
the loops draw no randomness.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import matcore
from .errors import ConfigError
from .factor import balanced_factorization
from .matcore import as_mat, frob_norm, op_norm, sym
from .network import prefix_suffix_products
from .project import IdentityBall, project_gamma_positive, project_identity_ball

DIVERGE_LOSS = 1e12

_ALGORITHMS = ("gd", "power_projection", "step_and_project", "penalty_gd")


@dataclass(frozen=True)
class StepSchedule:
    """Step sizes over iterations.

    Modes: ``constant`` uses ``eta`` every step; ``sequence`` walks ``etas``
    (repeating the last entry past the end); ``admissible`` (gd only)
    re-evaluates the conservative radius-aware bound each iteration;
    ``default`` resolves to the algorithm's standard choice at run time,
    which is the admissible bound for gd and the standard constant for the
    power projection trainer.
    """

    mode: str = "constant"
    eta: float = 0.0
    etas: tuple = ()

    def validate(self, algorithm: str):
        # eta = 0 is a legal no-op step (the kappa = 1 penalty fixed point
        # needs it); only negative steps are rejected
        if self.mode == "constant":
            if not self.eta >= 0.0:
                raise ConfigError("constant schedule needs eta >= 0")
        elif self.mode == "sequence":
            if len(self.etas) == 0 or any(e < 0.0 for e in self.etas):
                raise ConfigError("sequence schedule needs nonnegative entries")
        elif self.mode == "admissible":
            if algorithm != "gd":
                raise ConfigError("admissible schedule is defined for gd only")
        elif self.mode == "default":
            if algorithm not in ("gd", "power_projection"):
                raise ConfigError(
                    f"no default step size for algorithm {algorithm!r}"
                )
        else:
            raise ConfigError(f"unknown schedule mode {self.mode!r}")

    def step(self, t: int) -> float:
        if self.mode == "constant":
            return self.eta
        if self.mode == "sequence":
            return float(self.etas[min(t, len(self.etas) - 1)])
        raise ConfigError(f"schedule mode {self.mode!r} has no direct step")


@dataclass(frozen=True)
class TrainerConfig:
    """Run parameters.  Exactly the fields demanded by the algorithm tag are
    consulted; the rest are ignored by that run."""

    algorithm: str
    d: int
    L: int
    schedule: StepSchedule
    gamma: float = 0.0
    psi: float = 0.0
    kappa: float = 0.0
    max_iters: int = 1000
    epsilon: float = 0.0
    record_spectra: bool = False
    record_layers: bool = False
    penalty_canonical: bool = True

    def validate(self):
        if self.algorithm not in _ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        if not 1 <= self.d <= matcore.MAX_DIM:
            raise ConfigError(f"d={self.d} outside [1, {matcore.MAX_DIM}]")
        if not 1 <= self.L <= matcore.MAX_LAYERS:
            raise ConfigError(f"L={self.L} outside [1, {matcore.MAX_LAYERS}]")
        if self.max_iters < 0:
            raise ConfigError("max_iters must be nonnegative")
        if self.epsilon < 0.0:
            raise ConfigError("epsilon must be nonnegative")
        self.schedule.validate(self.algorithm)
        if self.algorithm in ("power_projection", "step_and_project"):
            if not self.gamma > 0.0:
                raise ConfigError(f"{self.algorithm} needs gamma > 0")
        if self.algorithm == "step_and_project" and self.psi < 0.0:
            raise ConfigError("psi must be nonnegative")
        if self.algorithm == "penalty_gd" and not 0.0 <= self.kappa <= 1.0:
            raise ConfigError("kappa must lie in [0, 1]")


@dataclass(frozen=True)
class TraceRecord:
    t: int
    loss: float
    loss_half: float | None
    radius: float
    min_sv: float
    max_norm: float
    u_stat: float
    eigenvalues: np.ndarray | None = None
    layers: tuple | None = None


@dataclass
class TrainingTrace:
    """One record per iterate plus the step sizes actually used.

    ``etas[t]`` is the step taken from iterate t to t + 1, so there is one
    fewer entry than records unless the run diverged mid-step.  ``radius``
    and ``u_stat`` are running maxima and therefore nondecreasing.
    """

    algorithm: str
    d: int
    L: int
    records: list = field(default_factory=list)
    etas: list = field(default_factory=list)
    status: str = "budget"
    final_layers: tuple = ()
    gamma: float = 0.0

    @property
    def iterations(self) -> int:
        return len(self.records) - 1

    @property
    def final_loss(self) -> float:
        return self.records[-1].loss

    def losses(self) -> np.ndarray:
        return np.array([r.loss for r in self.records])

    def loss_halves(self) -> np.ndarray:
        return np.array(
            [np.nan if r.loss_half is None else r.loss_half for r in self.records]
        )

    def radii(self) -> np.ndarray:
        return np.array([r.radius for r in self.records])

    def min_svs(self) -> np.ndarray:
        return np.array([r.min_sv for r in self.records])

    def max_norms(self) -> np.ndarray:
        return np.array([r.max_norm for r in self.records])

    def u_stats(self) -> np.ndarray:
        return np.array([r.u_stat for r in self.records])


def step_size_symmetric_target(phi, L: int) -> float:
    """Standard constant step for symmetric positive definite targets:
    1 / (L (1 + ||phi||_2^2))."""
    return 1.0 / (L * (1.0 + op_norm(phi) ** 2))


def step_size_power_projection(phi, L: int, c: float = 3.0) -> float:
    """Standard constant step for the power projection trainer:
    1 / (c L d^5 ||phi||_F^2)."""
    phi = as_mat(phi)
    d = phi.shape[0]
    return 1.0 / (c * L * d**5 * frob_norm(phi) ** 2)


def admissible_step(d: int, L: int, phi_op_sq: float, radius: float, loss_val: float) -> float:
    """Radius-aware conservative step bound, re-evaluated per iteration.

    A trial step at the loosest bound produces a candidate next radius via
    the radius growth inequality; the returned step is the bound evaluated
    at that candidate, which overestimates the realized radius, so the
    result stays admissible.
    """
    base = 3.0 * L * d**5
    trial = 1.0 / (base * max(1.0, phi_op_sq))
    candidate = radius + trial * (1.0 + radius) ** L * np.sqrt(2.0 * loss_val)
    return 1.0 / (base * max((1.0 + candidate) ** (2 * L), phi_op_sq))


def _check_target(phi, cfg: TrainerConfig) -> np.ndarray:
    phi = as_mat(phi, name="target")
    if phi.shape != (cfg.d, cfg.d):
        raise ConfigError(
            f"target shape {phi.shape} does not match configured d={cfg.d}"
        )
    return phi


def _layer_stats(stack: np.ndarray, eye: np.ndarray):
    sv = np.linalg.svd(stack, compute_uv=False)
    dev = np.linalg.svd(stack - eye, compute_uv=False)
    return float(sv.min()), float(sv.max()), float(dev.max())


def _spectrum(prod: np.ndarray) -> np.ndarray:
    return np.sort_complex(np.linalg.eigvals(prod))


def _snapshot(layers) -> tuple:
    return tuple(m.copy() for m in layers)


class _Recorder:
    """Shared per-iterate bookkeeping for all training loops."""

    def __init__(self, phi: np.ndarray, cfg: TrainerConfig):
        self.cfg = cfg
        self.eye = np.eye(cfg.d)
        self.radius = 0.0
        self.u_stat = op_norm(phi) ** (1.0 / cfg.L)
        self.records: list = []

    def add(self, t, layers, prod, loss_val, loss_half):
        stack = np.stack(layers)
        min_sv, max_norm, dev = _layer_stats(stack, self.eye)
        self.radius = max(self.radius, dev)
        self.u_stat = max(self.u_stat, max_norm)
        self.records.append(
            TraceRecord(
                t=t,
                loss=loss_val,
                loss_half=loss_half,
                radius=self.radius,
                min_sv=min_sv,
                max_norm=max_norm,
                u_stat=self.u_stat,
                eigenvalues=_spectrum(prod) if self.cfg.record_spectra else None,
                layers=_snapshot(layers) if self.cfg.record_layers else None,
            )
        )


def _finite(layers) -> bool:
    return all(np.all(np.isfinite(m)) for m in layers)


def run_gd(phi, cfg: TrainerConfig) -> TrainingTrace:
    """Plain gradient descent from identity layers.

    Stops when the loss reaches cfg.epsilon, the iteration budget runs out,
    or an iterate goes non-finite (status ``diverged``, last finite iterate
    kept).  cfg.gamma is ignored here.
    """
    cfg.validate()
    if cfg.algorithm != "gd":
        raise ConfigError("run_gd requires algorithm tag 'gd'")
    phi = _check_target(phi, cfg)
    schedule = cfg.schedule
    adaptive = schedule.mode in ("admissible", "default")
    phi_op_sq = op_norm(phi) ** 2

    layers = [np.eye(cfg.d) for _ in range(cfg.L)]
    rec = _Recorder(phi, cfg)
    etas: list = []
    status = "budget"
    t = 0
    while True:
        if not _finite(layers):
            status = "diverged"
            break
        pre, suf = prefix_suffix_products(layers)
        prod = pre[cfg.L]
        residual = prod - phi
        loss_val = 0.5 * float(np.sum(residual * residual))
        if not np.isfinite(loss_val) or loss_val > DIVERGE_LOSS:
            status = "diverged"
            break
        rec.add(t, layers, prod, loss_val, None)
        good_layers = layers
        if loss_val <= cfg.epsilon:
            status = "converged"
            break
        if t >= cfg.max_iters:
            status = "budget"
            break
        if adaptive:
            eta = admissible_step(cfg.d, cfg.L, phi_op_sq, rec.radius, loss_val)
        else:
            eta = schedule.step(t)
        etas.append(eta)
        layers = [
            layers[k] - eta * (suf[k + 1].T @ residual @ pre[k].T)
            for k in range(cfg.L)
        ]
        t += 1
    final = _snapshot(good_layers) if rec.records else ()
    return TrainingTrace(
        "gd", cfg.d, cfg.L, rec.records, etas, status, final, cfg.gamma
    )


def run_power_projection(phi, cfg: TrainerConfig) -> TrainingTrace:
    """Gradient step, project the end-to-end product onto the gamma-positive
    set, refactor into balanced layers.

    Starts at gamma**(1/L) times identity.  Integer-step losses are taken
    from the projected product, half-step losses from the pre-projection
    product.  Warns when the target itself is not gamma-positive, since the
    contraction guarantee then has no backing.  Factorization failures
    propagate as NumericError with diagnostics.
    """
    cfg.validate()
    if cfg.algorithm != "power_projection":
        raise ConfigError("run_power_projection requires algorithm tag 'power_projection'")
    phi = _check_target(phi, cfg)
    margin = float(np.linalg.eigvalsh(sym(phi))[0])
    if margin < cfg.gamma - 1e-12:
        warnings.warn(
            f"target margin {margin:.6f} is below gamma={cfg.gamma}; the "
            "contraction guarantee does not apply",
            stacklevel=2,
        )
    if cfg.schedule.mode == "default":
        schedule = StepSchedule("constant", step_size_power_projection(phi, cfg.L))
    else:
        schedule = cfg.schedule

    root = cfg.gamma ** (1.0 / cfg.L)
    layers = [root * np.eye(cfg.d) for _ in range(cfg.L)]
    current_prod = cfg.gamma * np.eye(cfg.d)
    pending_half = None
    rec = _Recorder(phi, cfg)
    etas: list = []
    status = "budget"
    t = 0
    while True:
        residual_rec = current_prod - phi
        loss_val = 0.5 * float(np.sum(residual_rec * residual_rec))
        if not np.isfinite(loss_val) or loss_val > DIVERGE_LOSS:
            status = "diverged"
            break
        rec.add(t, layers, current_prod, loss_val, pending_half)
        good_layers = layers
        if loss_val <= cfg.epsilon:
            status = "converged"
            break
        if t >= cfg.max_iters:
            status = "budget"
            break
        eta = schedule.step(t)
        etas.append(eta)
        pre, suf = prefix_suffix_products(layers)
        residual = pre[cfg.L] - phi
        half = [
            layers[k] - eta * (suf[k + 1].T @ residual @ pre[k].T)
            for k in range(cfg.L)
        ]
        if not _finite(half):
            status = "diverged"
            break
        pre_h, _ = prefix_suffix_products(half)
        prod_half = pre_h[cfg.L]
        pending_half = 0.5 * float(np.sum((prod_half - phi) ** 2))
        projected = project_gamma_positive(prod_half, cfg.gamma)
        result = balanced_factorization(projected, cfg.L)
        # factors are in product order; layers apply in reversed order
        layers = list(reversed(result.factors))
        current_prod = projected
        t += 1
    final = _snapshot(good_layers) if rec.records else ()
    return TrainingTrace(
        "power_projection", cfg.d, cfg.L, rec.records, etas, status, final, cfg.gamma
    )


def run_step_and_project(phi, cfg: TrainerConfig) -> TrainingTrace:
    """Gradient step, then project every layer onto the operator-norm ball
    of radius cfg.psi around the identity.  Starts at gamma**(1/L) times
    identity; gamma = 1 gives the identity start."""
    cfg.validate()
    if cfg.algorithm != "step_and_project":
        raise ConfigError("run_step_and_project requires algorithm tag 'step_and_project'")
    phi = _check_target(phi, cfg)
    ball = IdentityBall(cfg.psi)
    root = cfg.gamma ** (1.0 / cfg.L)
    layers = [root * np.eye(cfg.d) for _ in range(cfg.L)]
    rec = _Recorder(phi, cfg)
    etas: list = []
    status = "budget"
    t = 0
    while True:
        if not _finite(layers):
            status = "diverged"
            break
        pre, suf = prefix_suffix_products(layers)
        prod = pre[cfg.L]
        residual = prod - phi
        loss_val = 0.5 * float(np.sum(residual * residual))
        if not np.isfinite(loss_val) or loss_val > DIVERGE_LOSS:
            status = "diverged"
            break
        rec.add(t, layers, prod, loss_val, None)
        good_layers = layers
        if loss_val <= cfg.epsilon:
            status = "converged"
            break
        if t >= cfg.max_iters:
            status = "budget"
            break
        eta = cfg.schedule.step(t)
        etas.append(eta)
        stepped = [
            layers[k] - eta * (suf[k + 1].T @ residual @ pre[k].T)
            for k in range(cfg.L)
        ]
        if not _finite(stepped):
            status = "diverged"
            break
        layers = [project_identity_ball(m, ball) for m in stepped]
        t += 1
    final = _snapshot(good_layers) if rec.records else ()
    return TrainingTrace(
        "step_and_project", cfg.d, cfg.L, rec.records, etas, status, final, cfg.gamma
    )


def run_penalty_gd(phi, cfg: TrainerConfig) -> TrainingTrace:
    """Gradient descent with a pull of strength cfg.kappa toward identity
    layers, from the identity start.

    Canonical form shrinks the iterate toward the identity before the
    gradient step: theta <- (1 - kappa) theta + kappa I - eta grad.  With
    penalty_canonical=False the loop instead descends the penalized
    objective, giving theta <- theta - eta (grad + kappa (theta - I)).
    """
    cfg.validate()
    if cfg.algorithm != "penalty_gd":
        raise ConfigError("run_penalty_gd requires algorithm tag 'penalty_gd'")
    phi = _check_target(phi, cfg)
    eye = np.eye(cfg.d)
    layers = [np.eye(cfg.d) for _ in range(cfg.L)]
    rec = _Recorder(phi, cfg)
    etas: list = []
    status = "budget"
    t = 0
    while True:
        if not _finite(layers):
            status = "diverged"
            break
        pre, suf = prefix_suffix_products(layers)
        prod = pre[cfg.L]
        residual = prod - phi
        loss_val = 0.5 * float(np.sum(residual * residual))
        if not np.isfinite(loss_val) or loss_val > DIVERGE_LOSS:
            status = "diverged"
            break
        rec.add(t, layers, prod, loss_val, None)
        good_layers = layers
        if loss_val <= cfg.epsilon:
            status = "converged"
            break
        if t >= cfg.max_iters:
            status = "budget"
            break
        eta = cfg.schedule.step(t)
        etas.append(eta)
        grads = [suf[k + 1].T @ residual @ pre[k].T for k in range(cfg.L)]
        if cfg.penalty_canonical:
            layers = [
                (1.0 - cfg.kappa) * layers[k] + cfg.kappa * eye - eta * grads[k]
                for k in range(cfg.L)
            ]
        else:
            layers = [
                layers[k] - eta * (grads[k] + cfg.kappa * (layers[k] - eye))
                for k in range(cfg.L)
            ]
        t += 1
    final = _snapshot(good_layers) if rec.records else ()
    return TrainingTrace(
        "penalty_gd", cfg.d, cfg.L, rec.records, etas, status, final, cfg.gamma
    )
