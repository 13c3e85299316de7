"""Experiment orchestration: target construction, scenario configs, trace
artifacts, and the process-facing entry points behind the CLI.

Artifacts per scenario (when an output directory is set): a trace CSV with
the fixed column order ``t,loss,loss_half,radius_R,min_sv,max_norm,U_t``
plus interleaved real/imag eigenvalue columns when spectra are recorded, a
JSONL file with one check report per line, and a JSON scenario report.
Floats are written with repr-faithful %.17g formatting, so reruns of the
same build produce byte-identical CSVs.

Matrix CSV interchange (used by the ``factor`` subcommand) is row-major
with a ``d,<dim>`` header line.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, NumericError
from .matcore import as_mat, require_square, sym
from .trainers import (
    StepSchedule,
    TrainerConfig,
    TrainingTrace,
    run_gd,
    run_penalty_gd,
    run_power_projection,
    run_step_and_project,
)
from .verify import (
    CheckReport,
    check_commuting_normal,
    check_gradient_lower_bound,
    check_hessian_upper_bound,
    eigen_recurrence_check,
    fd_gradient_check,
    fd_hessian_check,
    trace_recurrence_check,
)
from .network import DeepLinearNet

SCHEMA_VERSION = 1

TARGET_KINDS = (
    "spd",
    "rotation",
    "partial_reflection",
    "neg_eig_diag",
    "near_identity",
    "explicit",
)

CHECK_NAMES = (
    "fd_gradient",
    "fd_hessian",
    "gradient_lower_bound",
    "hessian_upper_bound",
    "commuting_normal",
    "eigen_recurrence",
    "trace_recurrence",
)

RUNNERS = {
    "gd": run_gd,
    "power_projection": run_power_projection,
    "step_and_project": run_step_and_project,
    "penalty_gd": run_penalty_gd,
}


# ---------------------------------------------------------------------------
# targets


@dataclass(frozen=True)
class TargetSpec:
    """Declarative target description.  Fields beyond ``kind`` and ``d`` are
    consulted per kind; ``seed`` feeds the basis/direction generator."""

    kind: str
    d: int
    eigenvalues: tuple = ()
    angles: tuple = ()
    scale: float = 1.0
    reflection_coeffs: tuple = ()
    lam: float = 0.0
    excess_loss: float = 0.0
    entries: tuple = ()
    seed: int = 0


def random_orthogonal(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-ish orthogonal matrix from QR of a standard normal draw, with
    the sign convention fixed for determinism."""
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    signs = np.sign(np.diag(r))
    signs[signs == 0.0] = 1.0
    return q * signs


def gamma_margin(phi) -> float:
    """Smallest eigenvalue of the symmetric part."""
    phi = as_mat(phi)
    require_square(phi)
    return float(np.linalg.eigvalsh(sym(phi))[0])


def make_target(spec: TargetSpec) -> np.ndarray:
    """Materialize a target matrix from its spec.

    Unknown kinds and invalid parameters raise ConfigError.
    """
    if spec.kind not in TARGET_KINDS:
        raise ConfigError(f"unknown target kind {spec.kind!r}")
    if not 1 <= spec.d <= 16:
        raise ConfigError(f"target dimension {spec.d} outside [1, 16]")
    d = spec.d
    rng = np.random.default_rng(spec.seed)

    if spec.kind == "spd":
        eigs = np.asarray(spec.eigenvalues, dtype=float)
        if eigs.size != d or np.any(eigs <= 0.0):
            raise ConfigError("spd target needs d positive eigenvalues")
        q = random_orthogonal(d, rng)
        return sym((q * eigs) @ q.T)

    if spec.kind == "rotation":
        angles = np.asarray(spec.angles, dtype=float)
        if 2 * angles.size > d:
            raise ConfigError("too many rotation blocks for the dimension")
        if not spec.scale > 0.0:
            raise ConfigError("rotation scale must be positive")
        phi = np.eye(d)
        for k, theta in enumerate(angles):
            c, s = np.cos(theta), np.sin(theta)
            phi[2 * k : 2 * k + 2, 2 * k : 2 * k + 2] = spec.scale * np.array(
                [[c, -s], [s, c]]
            )
        return phi

    if spec.kind == "partial_reflection":
        if len(spec.reflection_coeffs) != 2:
            raise ConfigError("partial_reflection needs coefficients (a, b)")
        a, b = (float(v) for v in spec.reflection_coeffs)
        if not 0.0 <= abs(b) < a:
            raise ConfigError("partial_reflection needs 0 <= |b| < a")
        u = rng.standard_normal(d)
        u /= np.linalg.norm(u)
        refl = np.eye(d) - 2.0 * np.outer(u, u)
        return a * np.eye(d) + b * refl

    if spec.kind == "neg_eig_diag":
        if not spec.lam > 0.0:
            raise ConfigError("neg_eig_diag needs lam > 0")
        diag = np.ones(d)
        diag[0] = -spec.lam
        return np.diag(diag)

    if spec.kind == "near_identity":
        if not spec.excess_loss > 0.0:
            raise ConfigError("near_identity needs excess_loss > 0")
        e = rng.standard_normal((d, d))
        e /= np.linalg.norm(e)
        return np.eye(d) + np.sqrt(2.0 * spec.excess_loss) * e

    # explicit
    phi = np.asarray(spec.entries, dtype=float)
    if phi.shape != (d, d):
        raise ConfigError(f"explicit entries must form a {d}x{d} matrix")
    if not np.all(np.isfinite(phi)):
        raise ConfigError("explicit entries must be finite")
    return phi


# ---------------------------------------------------------------------------
# configs


@dataclass
class ScenarioConfig:
    scenario_id: str
    target: TargetSpec
    trainer: TrainerConfig
    checks: tuple = ()
    output_dir: str | None = None
    schema: int = SCHEMA_VERSION

    def validate(self):
        if self.schema != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema version {self.schema}")
        if not self.scenario_id:
            raise ConfigError("scenario_id must be nonempty")
        for name in self.checks:
            if name not in CHECK_NAMES:
                raise ConfigError(f"unknown check {name!r}")
        try:
            self.trainer.validate()
        except ConfigError:
            raise
        if self.trainer.d != self.target.d:
            raise ConfigError("trainer and target dimensions disagree")


def _build(cls, data: dict, context: str):
    fields = {f for f in cls.__dataclass_fields__}
    unknown = set(data) - fields
    if unknown:
        raise ConfigError(f"unknown {context} fields: {sorted(unknown)}")
    return cls(**data)


def scenario_from_dict(data: dict) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ConfigError("scenario config must be a JSON object")
    data = dict(data)
    try:
        target_data = dict(data.pop("target"))
        trainer_data = dict(data.pop("trainer"))
    except (KeyError, TypeError) as exc:
        raise ConfigError("scenario config needs 'target' and 'trainer' objects") from exc
    for key in ("eigenvalues", "angles", "reflection_coeffs", "entries"):
        if key in target_data and target_data[key] is not None:
            target_data[key] = tuple(
                tuple(row) if isinstance(row, list) else row
                for row in target_data[key]
            )
    target = _build(TargetSpec, target_data, "target")
    sched_data = dict(trainer_data.pop("schedule", {"mode": "default"}))
    if "etas" in sched_data and sched_data["etas"] is not None:
        sched_data["etas"] = tuple(sched_data["etas"])
    trainer_data["schedule"] = _build(StepSchedule, sched_data, "schedule")
    trainer = _build(TrainerConfig, trainer_data, "trainer")
    if "checks" in data and data["checks"] is not None:
        data["checks"] = tuple(data["checks"])
    cfg = _build(ScenarioConfig, {**data, "target": target, "trainer": trainer}, "scenario")
    cfg.validate()
    return cfg


def scenario_to_dict(cfg: ScenarioConfig) -> dict:
    out = asdict(cfg)
    return out


def load_scenario(path) -> ScenarioConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    return scenario_from_dict(data)


def save_scenario(cfg: ScenarioConfig, path):
    Path(path).write_text(json.dumps(scenario_to_dict(cfg), indent=2) + "\n")


# ---------------------------------------------------------------------------
# artifacts


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_trace_csv(trace: TrainingTrace, path):
    """Fixed-order trace columns; eigenvalue columns appear only when the
    trace recorded spectra."""
    path = Path(path)
    has_spectra = bool(trace.records) and trace.records[0].eigenvalues is not None
    cols = ["t", "loss", "loss_half", "radius_R", "min_sv", "max_norm", "U_t"]
    if has_spectra:
        for k in range(trace.d):
            cols += [f"eig{k}_re", f"eig{k}_im"]
    lines = [",".join(cols)]
    for r in trace.records:
        row = [
            str(r.t),
            _fmt(r.loss),
            "" if r.loss_half is None else _fmt(r.loss_half),
            _fmt(r.radius),
            _fmt(r.min_sv),
            _fmt(r.max_norm),
            _fmt(r.u_stat),
        ]
        if has_spectra:
            for val in r.eigenvalues:
                row += [_fmt(val.real), _fmt(val.imag)]
        lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n")


def write_matrix_csv(a, path):
    a = as_mat(a)
    d = require_square(a)
    lines = [f"d,{d}"]
    for row in a:
        lines.append(",".join(_fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_matrix_csv(path) -> np.ndarray:
    path = Path(path)
    try:
        lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    if not lines or not lines[0].startswith("d,"):
        raise ConfigError(f"{path} lacks the 'd,<dim>' header line")
    try:
        d = int(lines[0].split(",")[1])
        rows = [[float(v) for v in ln.split(",")] for ln in lines[1:]]
    except (IndexError, ValueError) as exc:
        raise ConfigError(f"{path} is not a valid matrix CSV: {exc}") from exc
    a = np.array(rows, dtype=float)
    if a.shape != (d, d):
        raise ConfigError(
            f"{path} header promises {d}x{d} but body has shape {a.shape}"
        )
    if not np.all(np.isfinite(a)):
        raise ConfigError(f"{path} contains non-finite entries")
    return a


# ---------------------------------------------------------------------------
# scenario running


@dataclass
class ScenarioReport:
    scenario_id: str
    status: str
    final_loss: float | None
    iterations: int | None
    checks: list = field(default_factory=list)
    wall_clock: float = 0.0
    target_margin: float | None = None
    detail: str = ""

    @property
    def checks_passed(self) -> bool:
        return all(c.status != "fail" for c in self.checks)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["checks"] = [c.to_dict() for c in self.checks]
        return out


def _run_checks(names, trace: TrainingTrace, phi: np.ndarray) -> list:
    reports = []
    final_net = DeepLinearNet(trace.final_layers) if trace.final_layers else None
    for name in names:
        try:
            if name == "fd_gradient":
                reports.append(fd_gradient_check(final_net, phi))
            elif name == "fd_hessian":
                reports.append(fd_hessian_check(final_net, phi))
            elif name == "gradient_lower_bound":
                reports.append(check_gradient_lower_bound(final_net, phi))
            elif name == "hessian_upper_bound":
                reports.append(check_hessian_upper_bound(final_net, phi))
            elif name == "commuting_normal":
                reports.append(check_commuting_normal(trace, phi))
            elif name == "eigen_recurrence":
                reports.append(eigen_recurrence_check(trace, phi))
            elif name == "trace_recurrence":
                reports.append(trace_recurrence_check(trace, phi))
        except ValueError as exc:
            reports.append(CheckReport(name, 0, 0, None, "skipped", str(exc)))
    return reports


def run_scenario(cfg: ScenarioConfig) -> ScenarioReport:
    """Build the target, run the configured trainer, evaluate the requested
    checks, and write artifacts when an output directory is configured.

    Trainer numeric failures are embedded in the report with status
    ``error`` rather than raised.
    """
    cfg.validate()
    phi = make_target(cfg.target)
    margin = gamma_margin(phi)
    outdir = None
    if cfg.output_dir is not None:
        outdir = Path(cfg.output_dir)
        outdir.mkdir(parents=True, exist_ok=True)

    start = time.perf_counter()
    try:
        trace = RUNNERS[cfg.trainer.algorithm](phi, cfg.trainer)
    except NumericError as exc:
        report = ScenarioReport(
            cfg.scenario_id, "error", None, None, [],
            time.perf_counter() - start, margin, str(exc),
        )
        if outdir is not None:
            (outdir / f"{cfg.scenario_id}_report.json").write_text(
                json.dumps(report.to_dict(), indent=2) + "\n"
            )
        return report

    status = trace.status
    min_loss = float(np.min(trace.losses())) if trace.records else None
    if (
        cfg.target.kind == "neg_eig_diag"
        and status == "budget"
        and min_loss is not None
        and min_loss >= cfg.target.lam**2 / 2.0 - 1e-12
    ):
        status = "floor-confirmed"

    checks = _run_checks(cfg.checks, trace, phi)
    report = ScenarioReport(
        cfg.scenario_id,
        status,
        trace.final_loss if trace.records else None,
        trace.iterations if trace.records else None,
        checks,
        time.perf_counter() - start,
        margin,
    )
    if outdir is not None:
        write_trace_csv(trace, outdir / f"{cfg.scenario_id}_trace.csv")
        with open(outdir / f"{cfg.scenario_id}_checks.jsonl", "w") as fh:
            for c in checks:
                fh.write(json.dumps(c.to_dict()) + "\n")
        (outdir / f"{cfg.scenario_id}_report.json").write_text(
            json.dumps(report.to_dict(), indent=2) + "\n"
        )
    return report


def _run_scenario_path(path: str) -> ScenarioReport:
    return run_scenario(load_scenario(path))


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("DEEPLIN_WORKERS", "1")))
    except ValueError:
        return 1


def sweep(directory, workers: int | None = None) -> list:
    """Run every ``*.json`` scenario in a directory, in sorted order.

    Concurrency is bounded by ``workers`` (default: the DEEPLIN_WORKERS
    environment variable, falling back to 1).
    """
    directory = Path(directory)
    paths = sorted(str(p) for p in directory.glob("*.json"))
    if not paths:
        raise ConfigError(f"no scenario configs found in {directory}")
    if workers is None:
        workers = default_workers()
    if workers <= 1:
        return [_run_scenario_path(p) for p in paths]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_scenario_path, paths))


def verify_all(criteria=None, output_dir=None) -> list:
    """Run the built-in acceptance suite; one report per criterion."""
    from . import acceptance

    return acceptance.run_suite(criteria=criteria, output_dir=output_dir)
