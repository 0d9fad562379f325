"""Finite-state continuous-time Markov switching chains.

The switching environment is a CTMC on a finite state set given by a
per-state jump intensity ``q(x)`` and the transition kernel ``P(x, .)``
of its embedded chain.  Its generator is

    Q = diag(q) (P - I),

acting on column vectors; the stationary law ``pi`` solves ``pi Q = 0``.
Everything here is exact linear algebra: the state space is deliberately
restricted to finite sets so that the stationary law and the Poisson
equation can be solved directly instead of approximated.

Sign convention for :func:`solve_poisson`: the solver returns ``h`` with
``Q h = f`` and ``pi(h) = 0``.  Callers building a first-order corrector
for an averaged generator form ``f = (averaged - pointwise) * probe``,
so that ``Q h`` reproduces exactly the fluctuation being corrected.

Path sampling runs the chain at the accelerated clock ``t / eps``
(holding rate ``q(x)/eps``), which is how the switching environment
enters the coupled simulation.  ``P(x, x) > 0`` is allowed: self-jumps
are real events of the embedded chain and are recorded as such.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import ComputationError, ModelError, ReducibleChainError

_ROW_SUM_TOL = 1e-9          # reject P beyond this
_STATIONARY_TOL = 1e-10      # residual ||pi Q||_inf contract
_POISSON_TOL = 1e-9          # residual ||Q h - f||_inf contract
_CENTERING_TOL = 1e-10       # required |pi(f)| on input


@dataclass(frozen=True, eq=False)
class SwitchSpec:
    """Finite switching chain: state labels, jump intensities, embedded kernel.

    Attributes:
        states: labels (any strings/ints), length n >= 1.
        q: per-state jump intensity, shape (n,), all >= 0 (units 1/time).
        P: row-stochastic embedded-chain kernel, shape (n, n).
    """

    states: tuple
    q: np.ndarray
    P: np.ndarray
    # Row cumulative sums of P, precomputed for sampling.
    _P_cum: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        states = tuple(self.states)
        q = np.asarray(self.q, dtype=float)
        P = np.asarray(self.P, dtype=float)
        n = len(states)
        if n < 1:
            raise ModelError("switching chain needs at least one state")
        if len(set(states)) != n:
            raise ModelError("switching state labels must be unique")
        if q.shape != (n,):
            raise ModelError(f"q has shape {q.shape}, expected ({n},)")
        if np.any(q < 0):
            bad = int(np.argmin(q))
            raise ModelError(f"q[{bad}] = {q[bad]} is negative")
        if P.shape != (n, n):
            raise ModelError(f"P has shape {P.shape}, expected ({n}, {n})")
        if np.any(P < -1e-12) or np.any(P > 1 + 1e-12):
            raise ModelError("P entries must lie in [0, 1]")
        row_sums = P.sum(axis=1)
        bad_rows = np.nonzero(np.abs(row_sums - 1.0) > _ROW_SUM_TOL)[0]
        if bad_rows.size:
            r = int(bad_rows[0])
            raise ModelError(
                f"P row {r} (state {states[r]!r}) sums to {row_sums[r]!r}, not 1"
            )
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "_P_cum", np.cumsum(P, axis=1))

    @property
    def n_states(self) -> int:
        return len(self.states)

    def state_index(self, label) -> int:
        try:
            return self.states.index(label)
        except ValueError:
            raise ModelError(f"unknown switching state {label!r}") from None


@dataclass(frozen=True)
class SwitchPath:
    """Piecewise-constant switching trajectory at the accelerated clock.

    ``times[0] == 0`` holds the initial state; times are strictly
    increasing; the path is right-continuous.
    """

    times: np.ndarray      # (m,), strictly increasing, times[0] == 0
    states: np.ndarray     # (m,), int indices into the spec's states
    horizon: float
    eps: float

    def state_at(self, t: float) -> int:
        idx = int(np.searchsorted(self.times, t, side="right")) - 1
        return int(self.states[max(idx, 0)])

    def occupation_fractions(self, n_states: int) -> np.ndarray:
        """Fraction of [0, horizon] spent in each state."""
        bounds = np.append(self.times, self.horizon)
        durations = np.diff(bounds)
        occ = np.zeros(n_states)
        np.add.at(occ, self.states, durations)
        return occ / self.horizon


def build_generator(spec: SwitchSpec) -> np.ndarray:
    """Generator Q = diag(q) (P - I) with exactly zero row sums.

    The diagonal is set to minus the off-diagonal row sum, so the
    row-sum invariant holds to the last bit regardless of how P was
    rounded on input.
    """
    n = spec.n_states
    Q = spec.q[:, None] * spec.P
    off_diag = Q.copy()
    np.fill_diagonal(off_diag, 0.0)
    np.fill_diagonal(Q, -off_diag.sum(axis=1))
    return Q


def _strong_components(Q: np.ndarray) -> list[list[int]]:
    support = csr_matrix((np.abs(Q) > 0) & ~np.eye(Q.shape[0], dtype=bool))
    n_comp, labels = connected_components(support, directed=True, connection="strong")
    return [list(np.nonzero(labels == k)[0]) for k in range(n_comp)]


def check_irreducible(Q: np.ndarray) -> None:
    """Structural irreducibility check on the off-diagonal support graph."""
    if Q.shape[0] == 0:
        raise ModelError("empty generator")
    comps = _strong_components(Q)
    if len(comps) > 1:
        raise ReducibleChainError(
            f"switching chain is reducible; strongly connected components: {comps}",
            comps,
        )


def stationary_distribution(Q: np.ndarray) -> np.ndarray:
    """Stationary law pi with pi Q = 0, sum(pi) = 1.

    Solves the square system obtained from Q^T by replacing the last row
    with the normalization constraint; falls back to least squares on
    the full augmented system [Q^T; 1^T] pi = (0, ..., 0, 1) if that
    matrix happens to be singular.  Residual ||pi Q||_inf must come out
    below 1e-10 or the irreducibility assumption is considered violated.
    """
    Q = np.asarray(Q, dtype=float)
    n = Q.shape[0]
    if n == 0:
        raise ModelError("empty generator")
    if Q.shape != (n, n):
        raise ModelError(f"generator must be square, got {Q.shape}")
    check_irreducible(Q)

    A = Q.T.copy()
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    try:
        pi = np.linalg.solve(A, b)
    except np.linalg.LinAlgError:
        A_aug = np.vstack([Q.T, np.ones(n)])
        b_aug = np.zeros(n + 1)
        b_aug[-1] = 1.0
        pi = np.linalg.lstsq(A_aug, b_aug, rcond=None)[0]

    pi = np.where(np.abs(pi) < 1e-13, 0.0, pi)
    if np.any(pi < 0):
        raise ComputationError(
            f"stationary solve produced negative mass {pi.min():.3e}; "
            "generator is numerically degenerate"
        )
    pi = pi / pi.sum()
    residual = float(np.max(np.abs(pi @ Q)))
    if residual > _STATIONARY_TOL:
        raise ComputationError(
            f"stationary solve residual {residual:.3e} exceeds {_STATIONARY_TOL:.0e}"
        )
    return pi


def solve_poisson(Q: np.ndarray, f: np.ndarray, pi: np.ndarray) -> np.ndarray:
    """Solve Q h = f with pi(h) = 0 for pi-centered f.

    Uses the bordered square system [[Q, 1], [pi, 0]] [h; mu] = [f; 0],
    nonsingular for irreducible Q; mu comes out as pi(f) ~ 0.
    """
    Q = np.asarray(Q, dtype=float)
    f = np.asarray(f, dtype=float)
    pi = np.asarray(pi, dtype=float)
    n = Q.shape[0]
    if f.shape != (n,):
        raise ModelError(f"f has shape {f.shape}, expected ({n},)")
    centered = float(pi @ f)
    if abs(centered) > _CENTERING_TOL:
        raise ModelError(
            f"f is not pi-centered: pi(f) = {centered!r} exceeds {_CENTERING_TOL:.0e}"
        )
    check_irreducible(Q)

    M = np.zeros((n + 1, n + 1))
    M[:n, :n] = Q
    M[:n, n] = 1.0
    M[n, :n] = pi
    rhs = np.append(f, 0.0)
    sol = np.linalg.solve(M, rhs)
    h = sol[:n]

    residual = float(np.max(np.abs(Q @ h - f)))
    if residual > _POISSON_TOL:
        raise ComputationError(
            f"Poisson-equation residual {residual:.3e} exceeds {_POISSON_TOL:.0e}"
        )
    return h


def sample_switch_path(
    spec: SwitchSpec,
    eps: float,
    horizon: float,
    rng: np.random.Generator,
    x0: int = 0,
) -> SwitchPath:
    """Exact (Gillespie) path of the switching chain at clock t/eps.

    Holding times are exponential with rate q(x)/eps; the next state is
    drawn from row P(x, .).  States with q(x) = 0 are absorbing.
    """
    if eps <= 0:
        raise ModelError(f"eps must be positive, got {eps}")
    if horizon <= 0:
        raise ModelError(f"horizon must be positive, got {horizon}")
    if not 0 <= x0 < spec.n_states:
        raise ModelError(f"initial state index {x0} out of range")

    times = [0.0]
    states = [x0]
    t = 0.0
    x = x0
    while True:
        rate = spec.q[x] / eps
        if rate <= 0.0:
            break
        t += rng.exponential(1.0 / rate)
        if t >= horizon:
            break
        x = int(np.searchsorted(spec._P_cum[x], rng.random(), side="right"))
        x = min(x, spec.n_states - 1)  # guard against cum rounding at 1.0
        times.append(t)
        states.append(x)
    return SwitchPath(
        times=np.asarray(times), states=np.asarray(states, dtype=np.int32),
        horizon=horizon, eps=eps,
    )
