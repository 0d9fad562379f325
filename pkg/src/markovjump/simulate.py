"""Event-driven simulators and predictable-characteristic integration.

Three processes are simulated, all exactly in distribution (no time
discretization of the jump dynamics):

* the coupled pre-limit pair (xi_eps(t), x(t/eps)): competing
  exponential clocks for switching (rate q(x)/eps), small drift jumps of
  size eps*d(xi; x) (rate rho(x)/eps) and big jumps whose u-dependent
  intensity Gamma(xi, R^d; x) is realized by thinning against the exact
  per-state bound sup_u Gamma(u, R^d; x);

* the limit process: deterministic flow  dxi/dt = flow_drift(xi)
  integrated with classical fixed-step fourth-order Runge-Kutta between
  jumps, jump epochs again by thinning;

* the compound Poisson special case: Poisson(rate * T) many i.i.d.
  jumps.

Rejected thinning candidates are phantom events: they advance the clock
(they are part of the exponential-race construction) but are not
recorded; acceptance counts are kept on the trajectory so loose bounds
are visible.

Predictable characteristics B(t) = int b(xi(s); x_s) ds (and likewise C
with the second moment c and Gamma_g with the g-moments) are integrated
exactly for pure-jump trajectories, where integrands are constant
between events, and by trapezoid on the recorded flow samples for limit
trajectories (O(h^2) quadrature error at flow-sample spacing h).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EventBudgetError, ModelError
from .jumps import GProbe, JumpModel, MixtureLaw, default_probes, _as_point
from .switching import SwitchSpec

# Event kinds (stable codes; CSV uses the names).
EVENT_INIT = 0
EVENT_SWITCH = 1
EVENT_SMALL = 2
EVENT_BIG = 3
EVENT_FLOW = 4

EVENT_NAMES = {
    EVENT_INIT: "init",
    EVENT_SWITCH: "switch",
    EVENT_SMALL: "small-jump",
    EVENT_BIG: "big-jump",
    EVENT_FLOW: "flow-sample",
}

DEFAULT_MAX_EVENTS = 10**8


@dataclass(eq=False)
class Trajectory:
    """Right-continuous event record of one simulated path.

    ``xi[i]`` and ``states[i]`` are the values immediately *after* the
    event at ``times[i]``; the first record is the initial condition at
    time 0.  ``eps == 0`` marks limit trajectories (piecewise flow
    between records); ``eps > 0`` marks pure-jump pre-limit paths
    (piecewise constant between records).
    """

    times: np.ndarray       # (k,)
    kinds: np.ndarray       # (k,) int8
    xi: np.ndarray          # (k, dim)
    states: np.ndarray      # (k,) int32
    horizon: float
    eps: float
    xi0: np.ndarray         # (dim,)
    x0: int
    big_jump_proposals: int = 0
    big_jump_accepts: int = 0

    @property
    def dim(self) -> int:
        return self.xi.shape[1]

    def value_at(self, t) -> np.ndarray:
        """xi(t) for scalar or array t in [0, horizon]; right-continuous.

        Limit trajectories interpolate linearly between records (flow
        samples are dense, so this is accurate to the sampling step).
        """
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(t < 0) or np.any(t > self.horizon + 1e-12):
            raise ModelError("query time outside [0, horizon]")
        idx = np.searchsorted(self.times, t, side="right") - 1
        idx = np.clip(idx, 0, len(self.times) - 1)
        vals = self.xi[idx].copy()
        if self.eps == 0.0:
            nxt = np.minimum(idx + 1, len(self.times) - 1)
            t0, t1 = self.times[idx], self.times[nxt]
            gap = t1 - t0
            interp = gap > 0
            w = np.zeros_like(t)
            w[interp] = (t[interp] - t0[interp]) / gap[interp]
            vals = vals + w[:, None] * (self.xi[nxt] - vals)
        return vals

    def terminal(self) -> np.ndarray:
        return self.xi[-1].copy()

    def sup_norm(self) -> float:
        """sup over the path of |xi(t)| (exact for pure-jump paths)."""
        return float(np.max(np.linalg.norm(self.xi, axis=1)))

    def to_rows(self, state_labels=None):
        """(t, kind, xi..., state) rows for CSV/JSON export."""
        rows = []
        for i in range(len(self.times)):
            s = int(self.states[i])
            label = state_labels[s] if state_labels is not None else s
            rows.append(
                (float(self.times[i]), EVENT_NAMES[int(self.kinds[i])],
                 *map(float, self.xi[i]), label)
            )
        return rows


class _Recorder:
    """Append-only event buffer turned into a Trajectory at the end."""

    def __init__(self, xi0: np.ndarray, x0: int, horizon: float, eps: float):
        self.times = [0.0]
        self.kinds = [EVENT_INIT]
        self.xi = [np.asarray(xi0, dtype=float).copy()]
        self.states = [int(x0)]
        self.horizon = horizon
        self.eps = eps
        self.proposals = 0
        self.accepts = 0

    def add(self, t: float, kind: int, xi: np.ndarray, x: int):
        self.times.append(t)
        self.kinds.append(kind)
        self.xi.append(xi.copy())
        self.states.append(int(x))

    def build(self) -> Trajectory:
        return Trajectory(
            times=np.asarray(self.times),
            kinds=np.asarray(self.kinds, dtype=np.int8),
            xi=np.asarray(self.xi),
            states=np.asarray(self.states, dtype=np.int32),
            horizon=self.horizon,
            eps=self.eps,
            xi0=self.xi[0].copy(),
            x0=int(self.states[0]),
            big_jump_proposals=self.proposals,
            big_jump_accepts=self.accepts,
        )


def simulate_prelimit(
    spec: SwitchSpec,
    model: JumpModel,
    eps: float,
    horizon: float,
    xi0,
    x0: int,
    rng: np.random.Generator,
    max_events: int = DEFAULT_MAX_EVENTS,
) -> Trajectory:
    """One exact path of the coupled pre-limit process on [0, horizon].

    Raises :class:`EventBudgetError` past ``max_events`` events
    (including rejected thinning candidates); that usually means eps is
    too small or the horizon too long for a single path.
    """
    if not 0.0 < eps <= 1.0:
        raise ModelError(f"eps must lie in (0, 1], got {eps}")
    if horizon <= 0:
        raise ModelError(f"horizon must be positive, got {horizon}")
    if model.n_states != spec.n_states:
        raise ModelError(
            f"model has {model.n_states} states, switching spec has {spec.n_states}"
        )
    xi = _as_point(xi0, model.dim).copy()
    x = int(x0)
    if not 0 <= x < spec.n_states:
        raise ModelError(f"initial state index {x} out of range")

    rec = _Recorder(xi, x, horizon, eps)
    # Per-state constants of the exponential race.
    switch_rate = spec.q / eps
    small_rate = model.rho / eps
    big_bound = np.array([model.big_rate_bound(s) for s in range(spec.n_states)])
    p_cum = spec._P_cum

    t = 0.0
    n_events = 0
    while True:
        total = switch_rate[x] + small_rate[x] + big_bound[x]
        if total <= 0.0:
            break
        t += rng.exponential(1.0 / total)
        if t >= horizon:
            break
        n_events += 1
        if n_events > max_events:
            raise EventBudgetError(
                f"exceeded {max_events} events at t={t:.6g}; "
                "use a larger eps or a smaller horizon"
            )
        r = rng.random() * total
        if r < switch_rate[x]:
            x = int(np.searchsorted(p_cum[x], rng.random(), side="right"))
            x = min(x, spec.n_states - 1)
            rec.add(t, EVENT_SWITCH, xi, x)
        elif r < switch_rate[x] + small_rate[x]:
            xi = xi + eps * model.displacement(xi, x)
            rec.add(t, EVENT_SMALL, xi, x)
        else:
            # Candidate big jump; thin against the per-state bound.
            rec.proposals += 1
            rates = model.big_rates(xi, x)
            total_rate = float(rates.sum())
            if rng.random() * big_bound[x] <= total_rate:
                comp_idx = int(
                    np.searchsorted(np.cumsum(rates), rng.random() * total_rate)
                )
                comp_idx = min(comp_idx, len(rates) - 1)
                v = model.components[x][comp_idx].sample(rng)
                xi = xi + v
                rec.accepts += 1
                rec.add(t, EVENT_BIG, xi, x)
    return rec.build()


# ---------------------------------------------------------------------------
# Limit process (flow + jumps)
# ---------------------------------------------------------------------------

def _rk4_segment(f, xi: np.ndarray, t0: float, t1: float, h: float, rec: _Recorder | None, x: int):
    """Integrate dxi/dt = f(xi) over [t0, t1] with fixed step h.

    Records a flow sample at every step boundary including t1.  The last
    step is shortened to land exactly on t1.
    """
    t = t0
    while t < t1 - 1e-15:
        dt = min(h, t1 - t)
        k1 = f(xi)
        k2 = f(xi + 0.5 * dt * k1)
        k3 = f(xi + 0.5 * dt * k2)
        k4 = f(xi + dt * k3)
        xi = xi + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t += dt
        if rec is not None:
            rec.add(min(t, t1), EVENT_FLOW, xi, x)
    return xi


def _rk4_segment_scalar(f, xi: float, t0: float, t1: float, h: float, rec, x: int):
    # Scalar fast path for dim == 1; identical scheme on Python floats.
    t = t0
    while t < t1 - 1e-15:
        dt = min(h, t1 - t)
        k1 = f(xi)
        k2 = f(xi + 0.5 * dt * k1)
        k3 = f(xi + 0.5 * dt * k2)
        k4 = f(xi + dt * k3)
        xi = xi + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t += dt
        if rec is not None:
            rec.add(min(t, t1), EVENT_FLOW, np.array([xi]), x)
    return xi


def validate_flow_step(limit, horizon: float, xi0, h: float, tol: float = 1e-6) -> float:
    """Jump-free probe: reject h if halving it moves xi(T) by more than tol.

    Returns the observed |difference|.
    """
    xi0 = _as_point(xi0, limit.dim)
    f = limit.flow_drift
    a = _rk4_segment(f, xi0.copy(), 0.0, horizon, h, None, 0)
    b = _rk4_segment(f, xi0.copy(), 0.0, horizon, h / 2.0, None, 0)
    diff = float(np.max(np.abs(a - b)))
    if diff > tol:
        raise ModelError(
            f"flow step h={h} too coarse: halving changes xi(T) by {diff:.3e} > {tol:.0e}"
        )
    return diff


def simulate_limit(
    limit,
    horizon: float,
    xi0,
    rng: np.random.Generator,
    h: float | None = None,
    check_step: bool = True,
    max_events: int = DEFAULT_MAX_EVENTS,
) -> Trajectory:
    """One path of the averaged limit process (flow plus thinned jumps).

    ``limit`` is an :class:`~markovjump.averaging.LimitModel`.  The flow
    sampling step ``h`` defaults to ``1e-3 * horizon``; step adequacy is
    probed once per call unless ``check_step`` is False (ensemble
    runners probe once and reuse).
    """
    if horizon <= 0:
        raise ModelError(f"horizon must be positive, got {horizon}")
    if h is None:
        h = 1e-3 * horizon
    if h <= 0:
        raise ModelError(f"flow step must be positive, got {h}")
    if check_step:
        validate_flow_step(limit, horizon, xi0, h)

    xi = _as_point(xi0, limit.dim).copy()
    rec = _Recorder(xi, 0, horizon, 0.0)
    bound = limit.rate_bound
    scalar = limit.dim == 1 and limit.flow_drift_scalar is not None
    f_scalar = limit.flow_drift_scalar

    t = 0.0
    n_events = 0
    while True:
        if bound <= 0.0:
            next_t = horizon
        else:
            next_t = t + rng.exponential(1.0 / bound)
        seg_end = min(next_t, horizon)
        if seg_end > t:
            if scalar:
                xi_s = _rk4_segment_scalar(f_scalar, float(xi[0]), t, seg_end, h, rec, 0)
                xi = np.array([xi_s])
            else:
                xi = _rk4_segment(limit.flow_drift, xi, t, seg_end, h, rec, 0)
        t = seg_end
        if next_t >= horizon:
            break
        n_events += 1
        if n_events > max_events:
            raise EventBudgetError(f"exceeded {max_events} jump candidates")
        rec.proposals += 1
        rates = limit.big_rates(xi)
        total_rate = float(rates.sum())
        if rng.random() * bound <= total_rate:
            comp_idx = int(np.searchsorted(np.cumsum(rates), rng.random() * total_rate))
            comp_idx = min(comp_idx, len(rates) - 1)
            v = limit.components[comp_idx].sample(rng)
            xi = xi + v
            rec.accepts += 1
            rec.add(t, EVENT_BIG, xi, 0)
    return rec.build()


def simulate_compound_poisson(
    rate: float,
    law: MixtureLaw | None,
    horizon: float,
    xi0,
    rng: np.random.Generator,
) -> Trajectory:
    """Compound Poisson path: Poisson(rate * T) i.i.d. jumps from ``law``."""
    if rate < 0:
        raise ModelError(f"rate must be nonnegative, got {rate}")
    if horizon <= 0:
        raise ModelError(f"horizon must be positive, got {horizon}")
    if rate > 0 and law is None:
        raise ModelError("a jump law is required when the rate is positive")
    dim = law.dim if law is not None else np.atleast_1d(xi0).shape[0]
    xi = _as_point(xi0, dim).copy()
    rec = _Recorder(xi, 0, horizon, 0.0)
    if rate > 0:
        n = int(rng.poisson(rate * horizon))
        times = np.sort(rng.uniform(0.0, horizon, size=n))
        for tk in times:
            xi = xi + law.sample(rng)
            rec.add(float(tk), EVENT_BIG, xi, 0)
    return rec.build()


# ---------------------------------------------------------------------------
# Predictable characteristics
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class CharacteristicPaths:
    """B, C and Gamma_g integral paths sampled on a time grid.

    B(0) = 0; C and every Gamma_g are nondecreasing because their
    integrands (second moments, nonnegative probes) are nonnegative.
    """

    times: np.ndarray           # (m,)
    B: np.ndarray               # (m, dim)
    C: np.ndarray               # (m, dim, dim)
    G: np.ndarray               # (m, n_probes)
    probe_names: tuple[str, ...]

    def to_rows(self):
        dim = self.B.shape[1]
        rows = []
        for i in range(len(self.times)):
            row = [float(self.times[i])]
            row += [float(v) for v in self.B[i]]
            row += [float(self.C[i, k, k]) for k in range(dim)]
            row += [float(v) for v in self.G[i]]
            rows.append(tuple(row))
        return rows

    def header(self) -> list[str]:
        dim = self.B.shape[1]
        if dim == 1:
            cols = ["t", "B", "C"]
        else:
            cols = ["t"] + [f"B_{k}" for k in range(dim)] + [f"C_{k}{k}" for k in range(dim)]
        return cols + [f"Gamma_{name}" for name in self.probe_names]


def _integrand_values(traj: Trajectory, model: JumpModel, probes: list[GProbe]):
    """b, c and g-moment values at every event record, grouped by state."""
    k = len(traj.times)
    dim = model.dim
    b_vals = np.zeros((k, dim))
    c_vals = np.zeros((k, dim, dim))
    g_vals = np.zeros((k, len(probes)))
    for x in range(model.n_states):
        mask = traj.states == x
        if not np.any(mask):
            continue
        pts = traj.xi[mask]
        b_vals[mask] = model.b_array(pts, x)
        c_vals[mask] = model.c_array(pts, x)
        for j, g in enumerate(probes):
            g_vals[mask, j] = model.g_moment_array(pts, x, g)
    return b_vals, c_vals, g_vals


def _cumulative(traj: Trajectory, vals: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Knot times and cumulative integral of the recorded integrand.

    Pure-jump paths (eps > 0): integrand constant on [t_i, t_{i+1}),
    left-endpoint rule is exact.  Limit paths: trapezoid on the dense
    flow samples.  A terminal knot at the horizon is appended when the
    last record falls short of it.
    """
    t = traj.times
    dt = np.diff(t)
    if traj.eps > 0:
        inc = vals[:-1] * dt.reshape((-1,) + (1,) * (vals.ndim - 1))
    else:
        inc = 0.5 * (vals[:-1] + vals[1:]) * dt.reshape((-1,) + (1,) * (vals.ndim - 1))
    cum = np.concatenate([np.zeros((1,) + vals.shape[1:]), np.cumsum(inc, axis=0)])
    knots = t
    if t[-1] < traj.horizon - 1e-15:
        tail = vals[-1] * (traj.horizon - t[-1])
        cum = np.concatenate([cum, (cum[-1] + tail)[None]])
        knots = np.append(t, traj.horizon)
    return knots, cum


def _interp_columns(grid: np.ndarray, knots: np.ndarray, cum: np.ndarray) -> np.ndarray:
    flat = cum.reshape(len(knots), -1)
    out = np.empty((len(grid), flat.shape[1]))
    for j in range(flat.shape[1]):
        out[:, j] = np.interp(grid, knots, flat[:, j])
    return out.reshape((len(grid),) + cum.shape[1:])


def predictable_characteristics(
    traj: Trajectory,
    model: JumpModel,
    grid,
    probes: list[GProbe] | None = None,
) -> CharacteristicPaths:
    """Characteristic paths of a trajectory evaluated on a time grid.

    For pre-limit trajectories pass the state-dependent model; for limit
    trajectories pass the averaged single-state model (their state index
    is 0 throughout).
    """
    probes = default_probes() if probes is None else probes
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    if np.any(grid < 0) or np.any(grid > traj.horizon + 1e-12):
        raise ModelError("characteristic grid must lie within [0, horizon]")
    if model.n_states <= int(traj.states.max()):
        raise ModelError("trajectory states exceed the model's state count")

    b_vals, c_vals, g_vals = _integrand_values(traj, model, probes)
    knots, cum_b = _cumulative(traj, b_vals)
    _, cum_c = _cumulative(traj, c_vals)
    _, cum_g = _cumulative(traj, g_vals)
    return CharacteristicPaths(
        times=grid,
        B=_interp_columns(grid, knots, cum_b),
        C=_interp_columns(grid, knots, cum_c),
        G=_interp_columns(grid, knots, cum_g),
        probe_names=tuple(g.name for g in probes),
    )


def characteristic_terminals(
    traj: Trajectory, model: JumpModel, probes: list[GProbe] | None = None
) -> dict:
    """Terminal values B(T), C(T), Gamma_g(T) of one trajectory."""
    paths = predictable_characteristics(traj, model, [traj.horizon], probes)
    return {"B": paths.B[0], "C": paths.C[0], "G": paths.G[0]}
