"""Checkers that certify gradients, curvature bounds, and trace recurrences.

Every checker returns a CheckReport.  A report passes iff it observed zero
violations; precondition failures yield a skipped report instead of a
crash.  Bound checks carry a 1e-12 absolute slack on top of the stated
tolerances.

The finite-difference checks evaluate the loss directly from flattened
parameters and never touch the analytic derivative code, so they are an
independent oracle for it.

Note on conventions: the loss is 0.5 ||product - target||_F^2 throughout
the package.  The classical gradient lower bound and the induced loss
contraction are stated in the unhalved convention; translated to the halved
loss they read ||grad||^2 >= 2 loss L (1-a)^(2L) (tight at the identity)
and loss(t+1) <= (1 - eta L (1-R)^(2L)) loss(t).  Those are the forms
checked here.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .matcore import ABS_FLOOR, frob_norm, op_norm, sym
from .network import DeepLinearNet, full_gradient, full_hessian, loss
from .trainers import TrainingTrace

SLACK = 1e-12


@dataclass
class CheckReport:
    """Outcome of one checker: instance count, violation count, and the
    worst witness (enough to replay the violated inequality)."""

    name: str
    instances: int
    violations: int
    worst: dict | None = None
    status: str = "pass"
    note: str = ""

    @property
    def passed(self) -> bool:
        return self.violations == 0 and self.status != "fail"

    def to_dict(self) -> dict:
        return asdict(self)


def _finish(name, instances, violations, worst, note="") -> CheckReport:
    status = "fail" if violations else "pass"
    return CheckReport(name, instances, violations, worst, status, note)


def _skipped(name, note) -> CheckReport:
    return CheckReport(name, 0, 0, None, "skipped", note)


def _flatten(layers) -> np.ndarray:
    return np.concatenate([m.ravel(order="F") for m in layers])


def _loss_flat(x: np.ndarray, phi: np.ndarray, d: int, L: int) -> float:
    """Loss from a flat parameter vector; shares only the product convention
    with the analytic code."""
    dd = d * d
    prod = np.eye(d)
    for k in range(L):
        prod = x[k * dd : (k + 1) * dd].reshape(d, d, order="F") @ prod
    r = prod - phi
    return 0.5 * float(np.sum(r * r))


def _check_h(h: float):
    if not 1e-8 < h < 1e-2:
        raise ValueError(f"finite-difference step {h} outside the sane range")


def fd_gradient_check(net: DeepLinearNet, phi, h: float = 1e-5, tol: float = 1e-6) -> CheckReport:
    """Central differences against the analytic gradient.

    The error is the max-entry deviation relative to the larger gradient
    scale, with an absolute floor so exact zeros compare clean.
    """
    _check_h(h)
    phi = np.asarray(phi, dtype=float)
    d, L = net.d, net.L
    n = L * d * d
    x = _flatten(net.layers)
    g_fd = np.empty(n)
    for i in range(n):
        xp = x.copy()
        xp[i] += h
        fp = _loss_flat(xp, phi, d, L)
        xp[i] -= 2.0 * h
        fm = _loss_flat(xp, phi, d, L)
        g_fd[i] = (fp - fm) / (2.0 * h)
    g_an = full_gradient(net, phi).flat
    scale = max(np.max(np.abs(g_an)), np.max(np.abs(g_fd)), ABS_FLOOR)
    err = float(np.max(np.abs(g_an - g_fd)) / scale)
    violations = int(err > tol)
    worst = None
    if violations:
        idx = int(np.argmax(np.abs(g_an - g_fd)))
        worst = {
            "relative_error": err,
            "tolerance": tol,
            "entry": idx,
            "analytic": float(g_an[idx]),
            "finite_difference": float(g_fd[idx]),
            "layers": [m.tolist() for m in net.layers],
            "target": phi.tolist(),
            "h": h,
        }
    return _finish("fd_gradient", 1, violations, worst, f"relative error {err:.3e}")


def fd_hessian_check(net: DeepLinearNet, phi, h: float = 1e-3, tol: float = 1e-4) -> CheckReport:
    """Second-order central differences against the assembled
    second-derivative matrix, compared entrywise in absolute terms."""
    _check_h(h)
    phi = np.asarray(phi, dtype=float)
    d, L = net.d, net.L
    n = L * d * d
    x = _flatten(net.layers)
    h_fd = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            xp = x.copy()
            xp[i] += h
            xp[j] += h
            fpp = _loss_flat(xp, phi, d, L)
            xp[j] -= 2.0 * h
            fpm = _loss_flat(xp, phi, d, L)
            xp[i] -= 2.0 * h
            fmm = _loss_flat(xp, phi, d, L)
            xp[j] += 2.0 * h
            fmp = _loss_flat(xp, phi, d, L)
            val = (fpp - fpm - fmp + fmm) / (4.0 * h * h)
            h_fd[i, j] = val
            h_fd[j, i] = val
    h_an = full_hessian(net, phi)
    err = float(np.max(np.abs(h_an - h_fd)))
    violations = int(err > tol)
    worst = None
    if violations:
        flat_idx = int(np.argmax(np.abs(h_an - h_fd)))
        i, j = divmod(flat_idx, n)
        worst = {
            "absolute_error": err,
            "tolerance": tol,
            "entry": [i, j],
            "analytic": float(h_an[i, j]),
            "finite_difference": float(h_fd[i, j]),
            "layers": [m.tolist() for m in net.layers],
            "target": phi.tolist(),
            "h": h,
        }
    return _finish("fd_hessian", 1, violations, worst, f"absolute error {err:.3e}")


def check_gradient_lower_bound(net: DeepLinearNet, phi) -> CheckReport:
    """Steepness bound: ||grad||^2 >= 2 loss L (1-a)^(2L), where 1 - a is
    a floor on the layer singular values (a clamped at 0, since the bound
    parameterizes a floor, not the exact minimum).  Tight at identity
    layers.  Skipped when a >= 1 (the bound is vacuous there)."""
    phi = np.asarray(phi, dtype=float)
    a = max(
        0.0,
        1.0 - min(
            float(np.linalg.svd(m, compute_uv=False)[-1]) for m in net.layers
        ),
    )
    if a >= 1.0:
        return _skipped("gradient_lower_bound", f"vacuous margin (a={a:.3f})")
    lval = loss(net, phi).loss
    lhs = full_gradient(net, phi).squared_norm
    rhs = 2.0 * lval * net.L * (1.0 - a) ** (2 * net.L)
    violations = int(lhs < rhs - SLACK)
    worst = None
    if violations:
        worst = {
            "lhs_grad_sq": lhs,
            "rhs_bound": rhs,
            "a": a,
            "loss": lval,
            "layers": [m.tolist() for m in net.layers],
            "target": phi.tolist(),
        }
    return _finish(
        "gradient_lower_bound", 1, violations, worst,
        f"lhs {lhs:.6e} vs bound {rhs:.6e}",
    )


def check_hessian_upper_bound(net: DeepLinearNet, phi) -> CheckReport:
    """Curvature bound: ||hessian||_F <= 3 L d^5 (1+z)^(2L) with
    1 + z = max layer operator norm (at least 1).  Requires
    ||phi||_2 <= (1+z)^L; otherwise skipped."""
    phi = np.asarray(phi, dtype=float)
    z = max(0.0, max(op_norm(m) for m in net.layers) - 1.0)
    if op_norm(phi) > (1.0 + z) ** net.L:
        return _skipped(
            "hessian_upper_bound",
            "target norm exceeds (1+z)^L; precondition unmet",
        )
    lhs = frob_norm(full_hessian(net, phi))
    rhs = 3.0 * net.L * net.d**5 * (1.0 + z) ** (2 * net.L)
    violations = int(lhs > rhs + SLACK)
    worst = None
    if violations:
        worst = {
            "lhs_hessian_frob": lhs,
            "rhs_bound": rhs,
            "z": z,
            "layers": [m.tolist() for m in net.layers],
            "target": phi.tolist(),
        }
    return _finish(
        "hessian_upper_bound", 1, violations, worst,
        f"lhs {lhs:.6e} vs bound {rhs:.6e}",
    )


def _product(layers) -> np.ndarray:
    prod = np.eye(layers[0].shape[0])
    for m in layers:
        prod = m @ prod
    return prod


def check_commuting_normal(trace: TrainingTrace, phi, tol: float = 1e-9) -> CheckReport:
    """For symmetric targets: every recorded end-to-end product commutes
    with the target, and on the gd/penalty paths all layers stay equal.
    Needs layer snapshots in the trace."""
    phi = np.asarray(phi, dtype=float)
    scale = max(frob_norm(phi), 1.0)
    if frob_norm(phi - phi.T) > 1e-10 * scale:
        raise ValueError("commuting-normal check requires a symmetric target")
    if not trace.records or trace.records[0].layers is None:
        return _skipped("commuting_normal", "trace has no layer snapshots")
    check_equal = trace.algorithm in ("gd", "penalty_gd")
    violations = 0
    worst = None
    worst_val = -1.0
    for record in trace.records:
        layers = record.layers
        prod = _product(layers)
        comm_scale = max(1.0, frob_norm(prod) * frob_norm(phi))
        comm = frob_norm(prod @ phi - phi @ prod) / comm_scale
        spread = 0.0
        if check_equal:
            spread = max(frob_norm(m - layers[0]) for m in layers)
        bad = comm > tol or spread > tol
        if bad:
            violations += 1
        val = max(comm, spread)
        if val > worst_val:
            worst_val = val
            worst = {
                "t": record.t,
                "commutator": comm,
                "layer_spread": spread,
                "tolerance": tol,
            }
    return _finish(
        "commuting_normal", len(trace.records), violations, worst,
        f"worst deviation {worst_val:.3e}",
    )


def simulate_scalar_recurrence(target_power: float, L: int, etas, steps: int) -> np.ndarray:
    """Iterate v <- v + eta v^(L-1) (target_power - v^L) from v = 1; returns
    the sequence of length steps + 1.  This is the exact per-eigenvalue
    evolution of simultaneous gradient descent on commuting symmetric
    iterates."""
    out = np.empty(steps + 1)
    v = 1.0
    out[0] = v
    for t in range(steps):
        eta = float(etas[min(t, len(etas) - 1)]) if len(etas) else 0.0
        v = v + eta * v ** (L - 1) * (target_power - v**L)
        out[t + 1] = v
    return out


def eigen_recurrence_check(trace: TrainingTrace, phi, tol: float = 1e-9) -> CheckReport:
    """Symmetric targets on the gd path: recorded product eigenvalues must
    match the scalar recurrence simulation, and simulated per-layer values
    must stay bracketed between 1 and the target root (when it is real)."""
    phi = np.asarray(phi, dtype=float)
    scale = max(frob_norm(phi), 1.0)
    if frob_norm(phi - phi.T) > 1e-10 * scale:
        raise ValueError("eigenvalue recurrence check requires a symmetric target")
    if not trace.records or trace.records[0].eigenvalues is None:
        raise ValueError("trace has no recorded spectra")
    L = trace.L
    mu = np.linalg.eigvalsh(sym(phi))
    sim = np.ones_like(mu)
    etas = trace.etas
    violations = 0
    worst = None
    worst_val = -1.0
    for t, record in enumerate(trace.records):
        rec_sorted = np.sort_complex(record.eigenvalues)
        sim_prod = np.sort(sim**L)
        mismatch = float(np.max(np.abs(rec_sorted - sim_prod)))
        bracket_bad = False
        for k in range(len(mu)):
            if mu[k] > 0.0:
                lam = mu[k] ** (1.0 / L)
                lo, hi = min(1.0, lam), max(1.0, lam)
                if not lo - SLACK <= sim[k] <= hi + SLACK:
                    bracket_bad = True
        if mismatch > tol or bracket_bad:
            violations += 1
        if mismatch > worst_val:
            worst_val = mismatch
            worst = {
                "t": record.t,
                "mismatch": mismatch,
                "bracket_violated": bracket_bad,
                "tolerance": tol,
            }
        if t < len(etas):
            sim = sim + etas[t] * sim ** (L - 1) * (mu - sim**L)
    return _finish(
        "eigen_recurrence", len(trace.records), violations, worst,
        f"worst mismatch {worst_val:.3e}",
    )


def _gd_recurrences(trace: TrainingTrace, phi: np.ndarray, tol: float) -> CheckReport:
    L, d = trace.L, trace.d
    phi_op_sq = op_norm(phi) ** 2
    losses = trace.losses()
    radii = trace.radii()
    steps = min(len(trace.records) - 1, len(trace.etas))
    violations = 0
    worst = None
    worst_val = -np.inf
    for t in range(steps):
        eta = trace.etas[t]
        # radius growth
        r_bound = radii[t] + eta * (1.0 + radii[t]) ** L * np.sqrt(2.0 * losses[t])
        r_excess = radii[t + 1] - r_bound - tol
        # conditional loss contraction
        admissible = eta <= 1.0 / (
            3.0 * L * d**5 * max((1.0 + radii[t + 1]) ** (2 * L), phi_op_sq)
        )
        l_excess = -np.inf
        if admissible:
            factor = 1.0 - eta * L * (1.0 - radii[t]) ** (2 * L)
            l_excess = losses[t + 1] - factor * losses[t] - tol
        bad = r_excess > 0.0 or l_excess > 0.0
        if bad:
            violations += 1
        val = max(r_excess, l_excess)
        if val > worst_val:
            worst_val = val
            worst = {
                "t": t,
                "radius_excess": float(r_excess),
                "loss_excess": float(l_excess) if np.isfinite(l_excess) else None,
                "eta": eta,
            }
    return _finish(
        "trace_recurrence", steps, violations, worst,
        "radius growth and conditional loss contraction",
    )


def _power_recurrences(trace: TrainingTrace, phi: np.ndarray, tol: float) -> CheckReport:
    L = trace.L
    gamma = trace.gamma
    losses = trace.losses()
    halves = trace.loss_halves()
    min_svs = trace.min_svs()
    u_stats = trace.u_stats()
    phi_fro = frob_norm(phi)
    sv_floor = gamma ** (1.0 / L) - 1e-9
    steps = min(len(trace.records) - 1, len(trace.etas))
    violations = 0
    worst = None
    worst_val = -np.inf
    for t in range(len(trace.records)):
        excesses = {}
        if t > 0 and t <= steps:
            eta = trace.etas[t - 1]
            factor = 1.0 - eta * L * gamma**2
            excesses["projection_vs_half"] = losses[t] - halves[t] - tol
            excesses["half_vs_contraction"] = halves[t] - factor * losses[t - 1] - tol
        excesses["min_sv_floor"] = sv_floor - min_svs[t]
        u_bound = (np.sqrt(2.0 * losses[t]) + phi_fro) ** (1.0 / L) + 1e-9
        excesses["u_bound"] = u_stats[t] - u_bound
        bad = any(v > 0.0 for v in excesses.values())
        if bad:
            violations += 1
        val = max(excesses.values())
        if val > worst_val:
            worst_val = val
            worst = {"t": t, **{k: float(v) for k, v in excesses.items()}}
    return _finish(
        "trace_recurrence", len(trace.records), violations, worst,
        "contraction chain, singular value floor, norm growth cap",
    )


def trace_recurrence_check(trace: TrainingTrace, phi, tol: float = SLACK) -> CheckReport:
    """Per-step recurrences selected by the trace's algorithm tag.

    gd: radius growth bound at every step, and whenever the step is within
    the conservative admissibility bound, the loss contraction
    loss(t+1) <= (1 - eta L (1-R(t))^(2L)) loss(t).

    power_projection: loss(t+1) <= half-step loss <= (1 - eta L gamma^2)
    loss(t), layer singular values >= gamma^(1/L) - 1e-9, and the running
    norm statistic capped by (sqrt(2 loss) + ||phi||_F)^(1/L) + 1e-9.

    Other algorithms carry no per-step guarantee and yield a skipped report.
    """
    phi = np.asarray(phi, dtype=float)
    if len(trace.records) < 1:
        return _skipped("trace_recurrence", "empty trace")
    if trace.algorithm == "gd":
        return _gd_recurrences(trace, phi, tol)
    if trace.algorithm == "power_projection":
        return _power_recurrences(trace, phi, tol)
    return _skipped(
        "trace_recurrence",
        f"no per-step recurrence for algorithm {trace.algorithm!r}",
    )
