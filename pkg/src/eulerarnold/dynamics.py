"""Time integration of the Euler-Arnold momentum equation, the Lagrangian flow,
and blowup detection.

The momentum ``omega = Lambda u`` is the evolved variable for every
equation; the velocity is recovered with :func:`invert_inertia` at each
Runge-Kutta stage so kernel modes stay exactly zero.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .analysis import compute_F, compute_G
from .errors import DegenerateSlope, InconclusiveResolution, NonFiniteState
from .spectral import (
    FourierField,
    InertiaOperator,
    apply_inertia,
    differentiate,
    energy,
    evaluate_at,
    evaluate_with_derivative,
    grid,
    hilbert_transform,
    invert_inertia,
    multiply,
    operator,
    project_representative,
    tail_fraction,
)

log = logging.getLogger(__name__)

TRAJECTORY_COLUMNS = ("t", "energy", "min_u_theta", "max_abs_u", "tail_fraction", "min_eta_theta")


@dataclass(frozen=True)
class SimulationConfig:
    kind: str = "wunsch"
    N: int = 256
    dt: float = 1e-4
    t_fin: float = 0.5
    M: int | None = None
    slope_threshold: float = 1e-3
    tail_threshold: float = 0.01
    cadence: float = 0.005
    snapshot_times: tuple = ()
    continue_past_blowup: bool = False
    refine_levels: int = 3

    def __post_init__(self):
        operator(self.kind)
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_fin > 0:
            raise ValueError("t_fin must be positive")
        if self.N < 4:
            raise ValueError("band limit N must be at least 4")
        for name in ("slope_threshold", "tail_threshold"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must lie in (0, 1)")
        if not self.cadence > 0:
            raise ValueError("cadence must be positive")
        if self.M is not None and self.M < 8:
            raise ValueError("Lagrangian grid needs at least 8 points")

    @property
    def op(self):
        return operator(self.kind)

    @property
    def lagrangian_points(self):
        return self.M if self.M is not None else 2 * self.N


@dataclass(frozen=True)
class SolutionState:
    t: float
    omega: FourierField
    u: FourierField
    op: InertiaOperator

    @classmethod
    def from_velocity(cls, op, u0, t=0.0):
        u = project_representative(op, u0)
        return cls(t, apply_inertia(op, u), u, op)

    @classmethod
    def from_momentum(cls, op, omega, t=0.0):
        omega = project_representative(op, omega)
        return cls(t, omega, invert_inertia(op, omega), op)


@dataclass(frozen=True)
class LagrangianState:
    """Flow samples on a uniform grid; ``eta`` is the lift (``eta(theta + 2 pi) = eta + 2 pi``)."""

    theta: np.ndarray
    eta: np.ndarray
    eta_theta: np.ndarray

    @classmethod
    def identity(cls, M):
        th = grid(M)
        return cls(th, th.copy(), np.ones(M))

    @property
    def M(self):
        return self.theta.shape[0]

    def min_slope(self):
        return float(np.min(self.eta_theta))


@dataclass
class BlowupVerdict:
    blowup: bool
    bracket: tuple | None = None
    trigger: str | None = None
    refined: bool = False

    def to_dict(self):
        return {
            "blowup": self.blowup,
            "bracket": list(self.bracket) if self.bracket else None,
            "trigger": self.trigger,
            "refined": self.refined,
        }


@dataclass
class TrajectoryRecord:
    kind: str
    times: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)
    states: list = field(default_factory=list)
    snapshots: dict = field(default_factory=dict)
    verdict: BlowupVerdict | None = None
    terminated: str | None = None

    def column(self, name):
        return [d[name] for d in self.diagnostics]

    def append(self, state, lag, diag):
        if self.times and not state.t > self.times[-1]:
            raise ValueError("trajectory times must increase")
        self.times.append(state.t)
        self.diagnostics.append(diag)
        self.states.append((state, lag))

    def to_csv(self, path=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRAJECTORY_COLUMNS)
        for d in self.diagnostics:
            w.writerow([repr(float(d[c])) for c in TRAJECTORY_COLUMNS])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


# --- right-hand sides ---------------------------------------------------


def eulerian_rhs(op, state):
    """``d omega / dt = -(u omega' + 2 u' omega)`` projected off the kernel modes."""
    u, w = state.u, state.omega
    N = w.N
    rate = multiply(u, differentiate(w, 1), N) + 2.0 * multiply(differentiate(u, 1), w, N)
    return project_representative(op, -rate)


def clm_rhs(state):
    """Periodic Constantin-Lax-Majda rate ``(H omega) omega``."""
    w = state.omega
    return multiply(hilbert_transform(w), w, w.N)


def momentum_rhs(op):
    """The ``(t, omega) -> d omega/dt`` callable for an operator."""
    if op.kind == "clm":
        return lambda t, w: clm_rhs(SolutionState(t, w, w, op))

    def rhs(t, w):
        return eulerian_rhs(op, SolutionState(t, w, invert_inertia(op, w), op))

    return rhs


def _finite(field_or_array, what):
    arr = field_or_array.coeffs if isinstance(field_or_array, FourierField) else field_or_array
    if not np.all(np.isfinite(arr)):
        raise NonFiniteState(f"non-finite values in {what}")


def step_rk4(rhs, state, dt):
    """Classical four-stage Runge-Kutta step for the momentum."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    t, w = state.t, state.omega
    k1 = rhs(t, w)
    k2 = rhs(t + 0.5 * dt, w + (0.5 * dt) * k1)
    k3 = rhs(t + 0.5 * dt, w + (0.5 * dt) * k2)
    k4 = rhs(t + dt, w + dt * k3)
    w_new = w + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    _finite(w_new, "momentum")
    return SolutionState.from_momentum(state.op, w_new, t + dt)


def _flow_rate(u, eta, eta_theta):
    v, dv = evaluate_with_derivative(u, eta)
    return v, dv * eta_theta


def step_coupled(rhs, state, lag, dt):
    """One RK4 step of momentum and flow together, so every stage of the flow
    sees the velocity of the matching Eulerian stage."""
    op = state.op
    t, w = state.t, state.omega
    eta, eta_th = lag.eta, lag.eta_theta

    def velocity(wf):
        if op.kind == "clm":  # no transport term: the flow stays at the identity
            return FourierField.zeros(1)
        return state.u if rhs is None else invert_inertia(op, wf)

    def stage(tt, wf, e, et):
        kw = rhs(tt, wf) if rhs is not None else None
        ke, kt = _flow_rate(velocity(wf), e, et)
        return kw, ke, kt

    def shifted(wf, kw, h):
        return wf if kw is None else wf + h * kw

    k1 = stage(t, w, eta, eta_th)
    k2 = stage(t + 0.5 * dt, shifted(w, k1[0], 0.5 * dt), eta + 0.5 * dt * k1[1], eta_th + 0.5 * dt * k1[2])
    k3 = stage(t + 0.5 * dt, shifted(w, k2[0], 0.5 * dt), eta + 0.5 * dt * k2[1], eta_th + 0.5 * dt * k2[2])
    k4 = stage(t + dt, shifted(w, k3[0], dt), eta + dt * k3[1], eta_th + dt * k3[2])

    eta_new = eta + (dt / 6.0) * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    eta_th_new = eta_th + (dt / 6.0) * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
    _finite(eta_new, "flow")
    _finite(eta_th_new, "flow derivative")
    if rhs is None:
        new_state = replace(state, t=t + dt)
    else:
        w_new = w + (dt / 6.0) * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
        _finite(w_new, "momentum")
        new_state = SolutionState.from_momentum(op, w_new, t + dt)
    return new_state, LagrangianState(lag.theta, eta_new, eta_th_new)


def advance_flow(state, lag, dt, rhs=None):
    """RK4 update of ``(eta, eta_theta)`` under ``eta_t = u(eta)``.

    Without ``rhs`` the velocity is held at ``state.u``; with it, the momentum
    is stepped alongside and each flow stage uses the matching velocity.
    """
    return step_coupled(rhs, state, lag, dt)[1]


# --- Lagrangian diagnostics ---------------------------------------------


def conservation_residual(state, lag, omega0):
    """``max_j |eta_theta^2 * omega(t, eta) - omega0(theta_j)|`` (Wunsch only)."""
    if state.op.kind != "wunsch":
        raise ValueError("the conservation law holds for the Wunsch equation")
    lhs = lag.eta_theta**2 * evaluate_at(state.omega, lag.eta)
    return float(np.max(np.abs(lhs - evaluate_at(omega0, lag.theta))))


def wunsch_lagrangian_accel(omega0_at_theta, eta_theta, F_at_eta):
    """``eta_tt_theta = omega0^2 / eta_theta^3 - F(eta) eta_theta``."""
    et = np.asarray(eta_theta, dtype=np.float64)
    if np.any(et <= 0.0):
        raise DegenerateSlope("eta_theta must stay positive")
    out = np.asarray(omega0_at_theta) ** 2 / et**3 - np.asarray(F_at_eta) * et
    return float(out) if out.ndim == 0 else out


def ewp_slope_rate(state, lag):
    """``-F + G`` along the flow: the rate of ``u_theta(t, eta(t, theta))`` for EWP."""
    if state.op.kind != "ewp":
        raise ValueError("slope rate formula is specific to EWP")
    u = state.u
    if u.max_abs_coeff() == 0.0:
        return np.zeros(lag.M)
    return evaluate_at(compute_G(u) - compute_F(u), lag.eta)


def ewp_gauge_correction(state, lag):
    """Modes ``+-1`` of ``H(u H u'')`` along the flow.

    The velocity is only defined modulo ``{1, sin, cos}``. ``-F + G`` keeps
    these modes of ``u_t theta`` while the evolved representative has them
    pinned at zero, so along the simulated flow the slope changes at
    ``ewp_slope_rate - ewp_gauge_correction``.
    """
    if state.op.kind != "ewp":
        raise ValueError("gauge correction is specific to EWP")
    u = state.u
    if u.max_abs_coeff() == 0.0:
        return np.zeros(lag.M)
    p = hilbert_transform(multiply(u, hilbert_transform(differentiate(u, 2)), 1))
    c1 = np.zeros(2, dtype=np.complex128)
    c1[1] = p.mode(1)
    return evaluate_at(FourierField.from_positive(c1), lag.eta)


def lagrangian_second_order(u0, N, dt, t_end, M=None):
    """Integrate ``(eta, eta_theta, eta_t_theta)`` with the Wunsch Lagrangian
    acceleration, ``F`` recomputed from the co-evolving Eulerian velocity.

    Returns ``(state, eta, eta_theta)`` at ``t_end``; serves as a cross-check
    of :func:`advance_flow`.
    """
    op = operator("wunsch")
    state = SolutionState.from_velocity(op, u0.with_band_limit(N))
    M = M or 2 * N
    theta = grid(M)
    omega0 = evaluate_at(state.omega, theta)
    rhs = momentum_rhs(op)
    eta = theta.copy()
    et = np.ones(M)
    v = evaluate_with_derivative(state.u, theta)[1]

    def rates(wf, e, s, vv):
        u = invert_inertia(op, wf)
        ue = evaluate_at(u, e)
        Fe = evaluate_at(compute_F(u), e)
        return rhs(0.0, wf), ue, vv, wunsch_lagrangian_accel(omega0, s, Fe)

    steps = int(round(t_end / dt))
    w = state.omega
    for _ in range(steps):
        k1 = rates(w, eta, et, v)
        k2 = rates(w + 0.5 * dt * k1[0], eta + 0.5 * dt * k1[1], et + 0.5 * dt * k1[2], v + 0.5 * dt * k1[3])
        k3 = rates(w + 0.5 * dt * k2[0], eta + 0.5 * dt * k2[1], et + 0.5 * dt * k2[2], v + 0.5 * dt * k2[3])
        k4 = rates(w + dt * k3[0], eta + dt * k3[1], et + dt * k3[2], v + dt * k3[3])
        w = w + (dt / 6.0) * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
        eta = eta + (dt / 6.0) * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        et = et + (dt / 6.0) * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
        v = v + (dt / 6.0) * (k1[3] + 2 * k2[3] + 2 * k3[3] + k4[3])
    return SolutionState.from_momentum(op, w, steps * dt), eta, et


# --- diagnostics and blowup detection -----------------------------------


def diagnostics(state, lag):
    u = state.u
    M = 4 * u.N
    ux = differentiate(u, 1).synthesize(M)
    return {
        "t": state.t,
        "energy": energy(state.op, u),
        "min_u_theta": float(np.min(ux)),
        "max_abs_u_theta": float(np.max(np.abs(ux))),
        "max_abs_u": float(np.max(np.abs(u.synthesize(M)))),
        "tail_fraction": tail_fraction(state.op, u),
        "min_eta_theta": lag.min_slope(),
    }


def _unhealthy(diag, config):
    if diag["min_eta_theta"] < config.slope_threshold:
        return "slope"
    if diag["tail_fraction"] > config.tail_threshold:
        return "tail"
    return None


def _trend_established(diags):
    """Steepening already visible: flow slope down 10% and falling, or |u_theta| doubled."""
    if len(diags) < 2:
        return False
    first, prev, last = diags[0], diags[-2], diags[-1]
    slope_falls = last["min_eta_theta"] < 0.9 and last["min_eta_theta"] < prev["min_eta_theta"]
    grows = first["max_abs_u_theta"] > 0 and last["max_abs_u_theta"] >= 2.0 * first["max_abs_u_theta"]
    return slope_falls or grows


def detect_blowup(record, config):
    """Scan a trajectory for the first unhealthy sample.

    Returns a verdict bracketing the breaking time between the last healthy
    and first unhealthy samples. Raises InconclusiveResolution if spectral
    tail energy trips before any steepening trend is visible.
    """
    if not record.diagnostics:
        raise ValueError("empty trajectory")
    for i, d in enumerate(record.diagnostics):
        trigger = _unhealthy(d, config)
        if trigger is None:
            continue
        if trigger == "tail" and not _trend_established(record.diagnostics[: i + 1]):
            raise InconclusiveResolution(
                f"tail fraction {d['tail_fraction']:.3g} at t={d['t']:.4g} before any steepening"
            )
        if i == 0:
            return BlowupVerdict(True, (record.times[0], record.times[0]), trigger)
        return BlowupVerdict(True, (record.times[i - 1], record.times[i]), trigger)
    return BlowupVerdict(False)


def _stepper(config):
    return momentum_rhs(config.op)


def simulate(config, u0):
    """Integrate from ``u0`` (for CLM: the initial momentum) to ``t_fin``.

    Samples diagnostics at the configured cadence, at snapshot times, and at
    the first step that trips a blowup threshold. Unless
    ``continue_past_blowup`` is set the run stops at detection.
    """
    op = config.op
    u0 = u0.with_band_limit(config.N)
    if op.kind == "clm":
        state = SolutionState.from_momentum(op, u0)
    else:
        state = SolutionState.from_velocity(op, u0)
    lag = LagrangianState.identity(config.lagrangian_points)
    rhs = _stepper(config)
    record = TrajectoryRecord(op.kind)
    record.append(state, lag, diagnostics(state, lag))

    nsteps = int(round(config.t_fin / config.dt))
    every = max(1, int(round(config.cadence / config.dt)))
    snap_steps = {int(round(ts / config.dt)): ts for ts in config.snapshot_times}
    if 0 in snap_steps:
        record.snapshots[snap_steps[0]] = (state, lag)

    for k in range(1, nsteps + 1):
        try:
            state, lag = step_coupled(rhs, state, lag, config.dt)
        except NonFiniteState as exc:
            if record.verdict is not None and record.verdict.blowup:
                record.terminated = f"non-finite state at t={state.t + config.dt:.6g} after blowup"
                break
            raise exc
        state = replace(state, t=k * config.dt)
        quick = _quick_health(state, lag, config)
        if k in snap_steps:
            record.snapshots[snap_steps[k]] = (state, lag)
        if k % every == 0 or k in snap_steps or k == nsteps or (quick and record.verdict is None):
            record.append(state, lag, diagnostics(state, lag))
        if quick and record.verdict is None:
            record.verdict = detect_blowup(record, config)
            log.info("blowup detected in %s", record.verdict.bracket)
            if not config.continue_past_blowup:
                break
    if record.verdict is None:
        record.verdict = detect_blowup(record, config)
    return record


def _quick_health(state, lag, config):
    if np.min(lag.eta_theta) < config.slope_threshold:
        return True
    return tail_fraction(state.op, state.u) > config.tail_threshold


def refine_blowup(record, config, levels=None):
    """Narrow the blowup bracket by re-running inside it with ``dt / 2, dt / 4, ...``.

    Each level restarts from the last healthy state and checks every step.
    """
    verdict = record.verdict
    if verdict is None or not verdict.blowup:
        return verdict
    levels = config.refine_levels if levels is None else levels
    t_lo, t_hi = verdict.bracket
    idx = max(i for i, t in enumerate(record.times) if t <= t_lo)
    state, lag = record.states[idx]
    rhs = _stepper(config)
    dt = config.dt
    trigger = verdict.trigger
    for _ in range(levels):
        dt *= 0.5
        cur_s, cur_l = state, lag
        t0 = cur_s.t
        k = 0
        found = False
        while cur_s.t < t_hi + dt:
            nxt_s, nxt_l = step_coupled(rhs, cur_s, cur_l, dt)
            k += 1
            nxt_s = replace(nxt_s, t=t0 + k * dt)
            if _quick_health(nxt_s, nxt_l, config):
                trigger = _unhealthy(diagnostics(nxt_s, nxt_l), config) or trigger
                t_lo, t_hi = cur_s.t, nxt_s.t
                found = True
                break
            cur_s, cur_l = nxt_s, nxt_l
        if not found:
            break
        state, lag = cur_s, cur_l
    return BlowupVerdict(True, (t_lo, t_hi), trigger, refined=True)


def snapshot_grid_csv(state, lag, path=None):
    """Grid export ``theta,u,eta,eta_theta`` on the Lagrangian grid."""
    u = evaluate_at(state.u, lag.theta)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["theta", "u", "eta", "eta_theta"])
    for row in zip(lag.theta, u, lag.eta, lag.eta_theta):
        w.writerow([repr(float(x)) for x in row])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def read_snapshot_grid(path):
    rows = list(csv.DictReader(io.StringIO(Path(path).read_text())))
    cols = {k: np.array([float(r[k]) for r in rows]) for k in ("theta", "u", "eta", "eta_theta")}
    return LagrangianState(cols["theta"], cols["eta"], cols["eta_theta"]), cols["u"]


def self_convergence_order(errors_coarse, errors_fine):
    return math.log2(errors_coarse / errors_fine)
