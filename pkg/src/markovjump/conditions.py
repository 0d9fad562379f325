"""Numeric validation of the scaling and moment conditions.

Two reports are produced for a model:

* :func:`validate_poisson_scaling` quantifies the defect terms of the
  scale-eps family on a grid of (eps, u).  The family is built so that

      mean defect      theta_b = (1/eps) m1(Gamma_eps) - b        == 0
      second defect    theta_c = (1/eps) m2(Gamma_eps) - c        == eps * rho * d d*
      g-moment defect  theta_g = (1/eps) Gamma_g_eps  - Gamma_g   == rho * g(eps d) / eps

  All three are computed twice: through the generic moment machinery on
  the assembled eps-kernel and through the closed forms above.  The two
  routes must agree to floating-point accuracy and every defect column
  must decrease monotonically to zero along a descending eps grid.

* :func:`validate_moment_bounds` checks uniform square-integrability
  (kernel tails beyond |v| > c vanish along the c grid) and linear
  growth: |b(u;x)| <= L (1+|u|), ||c(u;x)|| <= L (1+|u|^2), and the
  kernel density bounded by L f(v) (1+|u|) for the built-in envelope

      f(v) = sum over all states and components of rate_bound * density.

  Point masses carry no Lebesgue density; they are admitted (every
  moment bound used downstream holds for them) and flagged in the
  report.  The report also integrates |v|^2 f(v), the constant that
  drives the a-priori sup bounds; it is finite for every catalogue
  kernel.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ModelError
from .jumps import GProbe, JumpModel, PointMass, PrelimitKernel, default_probes, sq_tail

_MATCH_TOL = 1e-12       # closed form vs machinery
_MONOTONE_JITTER = 1e-12
_TAIL_FLOOR = 1e-6       # required tail mass at the largest c


@dataclass(eq=False)
class ScalingReport:
    """Defect table over (eps, u, x) plus per-column verdicts."""

    eps_grid: np.ndarray
    u_grid: np.ndarray                  # (m, dim)
    probe_names: tuple[str, ...]
    # sup over x, per (eps, u):
    theta_b: np.ndarray                 # (j, m)
    theta_c: np.ndarray                 # (j, m)
    theta_g: np.ndarray                 # (j, m, p)
    closed_c: np.ndarray                # (j, m)
    closed_g: np.ndarray                # (j, m, p)
    per_state_rows: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "eps": self.eps_grid.tolist(),
            "probes": list(self.probe_names),
            "max_theta_b": float(np.max(np.abs(self.theta_b))),
            "max_closed_form_gap_c": float(np.max(np.abs(self.theta_c - self.closed_c))),
            "max_closed_form_gap_g": float(np.max(np.abs(self.theta_g - self.closed_g))),
            "theta_c_by_eps": np.max(self.theta_c, axis=1).tolist(),
            "theta_g_by_eps": np.max(self.theta_g, axis=(1, 2)).tolist(),
            "failures": list(self.failures),
            "rows": self.per_state_rows,
        }


def validate_poisson_scaling(
    model: JumpModel,
    eps_grid=(0.1, 0.05, 0.02, 0.01),
    u_grid=None,
    probes: list[GProbe] | None = None,
) -> ScalingReport:
    """Defect terms of the eps-family on a descending eps grid."""
    eps_grid = np.asarray(eps_grid, dtype=float)
    if np.any(np.diff(eps_grid) >= 0):
        raise ModelError("eps grid must be strictly descending")
    if np.any(eps_grid <= 0) or np.any(eps_grid > 1):
        raise ModelError("eps values must lie in (0, 1]")
    probes = default_probes() if probes is None else probes
    if u_grid is None:
        u_grid = model.default_u_grid()
    u_grid = np.atleast_2d(np.asarray(u_grid, dtype=float))

    j, m, p, n = len(eps_grid), u_grid.shape[0], len(probes), model.n_states
    theta_b = np.zeros((j, m))
    theta_c = np.zeros((j, m))
    theta_g = np.zeros((j, m, p))
    closed_c = np.zeros((j, m))
    closed_g = np.zeros((j, m, p))
    rows = []

    for ji, eps in enumerate(eps_grid):
        kernel = PrelimitKernel(model, float(eps))
        for mi in range(m):
            u = u_grid[mi]
            tb = tc = 0.0
            tg = np.zeros(p)
            cc = 0.0
            cg = np.zeros(p)
            for x in range(n):
                b = model.b(u, x)
                c = model.c(u, x)
                d = model.displacement(u, x)
                rho = float(model.rho[x])

                num_b = float(np.max(np.abs(kernel.mean(u, x) / eps - b)))
                num_c = float(np.max(np.abs(kernel.second_moment(u, x) / eps - c)))
                clo_c = float(eps * rho * np.max(np.abs(np.outer(d, d))))
                row = {
                    "eps": float(eps), "u": u.tolist(), "x": x,
                    "theta_b": num_b, "theta_c": num_c, "theta_c_closed": clo_c,
                }
                for pi_, g in enumerate(probes):
                    num_g = kernel.g_moment(u, x, g) / eps - model.g_moment(u, x, g)
                    clo_g = rho * float(g(eps * d)) / eps
                    row[f"theta_{g.name}"] = num_g
                    row[f"theta_{g.name}_closed"] = clo_g
                    tg[pi_] = max(tg[pi_], abs(num_g))
                    cg[pi_] = max(cg[pi_], clo_g)
                rows.append(row)
                tb = max(tb, num_b)
                tc = max(tc, num_c)
                cc = max(cc, clo_c)
            theta_b[ji, mi] = tb
            theta_c[ji, mi] = tc
            theta_g[ji, mi] = tg
            closed_c[ji, mi] = cc
            closed_g[ji, mi] = cg

    failures = []
    if float(np.max(np.abs(theta_c - closed_c))) > _MATCH_TOL:
        failures.append("second-moment defect disagrees with its closed form")
    if float(np.max(np.abs(theta_g - closed_g))) > _MATCH_TOL:
        failures.append("g-moment defect disagrees with its closed form")
    # Columns run over descending eps; defects must not increase as eps drops.
    for name, col in (("theta_b", theta_b), ("theta_c", theta_c)):
        worst = np.max(col, axis=1)
        if np.any(np.diff(worst) > _MONOTONE_JITTER):
            failures.append(f"{name} is not non-increasing along the eps grid")
    for pi_, g in enumerate(probes):
        worst = np.max(theta_g[:, :, pi_], axis=1)
        if np.any(np.diff(worst) > _MONOTONE_JITTER):
            failures.append(f"theta_{g.name} is not non-increasing along the eps grid")

    return ScalingReport(
        eps_grid=eps_grid, u_grid=u_grid,
        probe_names=tuple(g.name for g in probes),
        theta_b=theta_b, theta_c=theta_c, theta_g=theta_g,
        closed_c=closed_c, closed_g=closed_g,
        per_state_rows=rows, failures=failures,
    )


@dataclass(eq=False)
class BoundsReport:
    """Square-integrability tails and linear-growth ratios."""

    c_grid: np.ndarray
    tails: np.ndarray            # (len(c_grid),) sup over (u, x)
    growth_l: float
    max_b_ratio: float           # sup |b| / (1+|u|)
    max_c_ratio: float           # sup ||c|| / (1+|u|^2)
    max_density_ratio: float     # sup density / (f(v)(1+|u|)), density part only
    envelope_weight: float       # integral of |v|^2 f(v) dv
    point_mass_states: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "c_grid": self.c_grid.tolist(),
            "tails": self.tails.tolist(),
            "growth_l": self.growth_l,
            "max_b_ratio": self.max_b_ratio,
            "max_c_ratio": self.max_c_ratio,
            "max_density_ratio": self.max_density_ratio,
            "envelope_second_moment": self.envelope_weight,
            "point_mass_states": self.point_mass_states,
            "failures": list(self.failures),
        }


def validate_moment_bounds(
    model: JumpModel,
    c_grid=(1.0, 2.0, 3.0, 4.0, 6.0),
    u_grid=None,
    n_v: int = 401,
) -> BoundsReport:
    """Tail decay along the c grid plus linear-growth and density bounds."""
    c_grid = np.asarray(c_grid, dtype=float)
    if np.any(np.diff(c_grid) <= 0):
        raise ModelError("c grid must be strictly increasing")
    if u_grid is None:
        u_grid = model.default_u_grid()
    u_grid = np.atleast_2d(np.asarray(u_grid, dtype=float))
    L = model.validate(u_grid)

    # Square-integrability: sup over (u, x) of || tail second moment ||.
    tails = np.zeros(len(c_grid))
    for ci, c in enumerate(c_grid):
        probe = sq_tail(float(c))
        worst = 0.0
        for x in range(model.n_states):
            tail_exps = np.array(
                [comp.law_g_expectation(probe) for comp in model.components[x]]
            )
            if tail_exps.size == 0:
                continue
            rate_bounds = np.array([comp.rate_bound() for comp in model.components[x]])
            worst = max(worst, float(rate_bounds @ tail_exps))
        tails[ci] = worst

    failures = []
    if np.any(np.diff(tails) > 1e-12):
        failures.append("tail second moments do not decrease along the c grid")
    if tails[-1] > _TAIL_FLOOR:
        failures.append(
            f"tail at c={c_grid[-1]:g} is {tails[-1]:.3e} > {_TAIL_FLOOR:.0e}"
        )

    # Growth ratios (validated against L inside model.validate already;
    # recompute the actual maxima for the report).
    max_b = max_c = 0.0
    norms = np.linalg.norm(u_grid, axis=1)
    for x in range(model.n_states):
        b_vals = model.b_array(u_grid, x)
        c_vals = model.c_array(u_grid, x)
        max_b = max(max_b, float(np.max(np.linalg.norm(b_vals, axis=1) / (1 + norms))))
        max_c = max(
            max_c,
            float(
                np.max(
                    [
                        np.linalg.norm(c_vals[i], 2) / (1 + norms[i] ** 2)
                        for i in range(u_grid.shape[0])
                    ]
                )
            ),
        )

    # Density bound against the built-in envelope.  The envelope itself
    # uses saturated rates, so the ratio cannot exceed 1 for density
    # components; anything above L signals a broken model.
    density_comps = [
        (x, comp)
        for x in range(model.n_states)
        for comp in model.components[x]
        if not isinstance(comp, PointMass) and comp.rate_bound() > 0
    ]
    point_states = sorted(
        {
            x
            for x in range(model.n_states)
            for comp in model.components[x]
            if isinstance(comp, PointMass) and comp.rate_bound() > 0
        }
    )
    max_density_ratio = 0.0
    envelope_weight = 0.0
    if density_comps and model.dim == 1:
        windows = [c.support_window()[0] for _, c in density_comps]
        v_grid = np.linspace(min(w[0] for w in windows), max(w[1] for w in windows), n_v)

        def envelope(v: float) -> float:
            return sum(c.rate_bound() * c.density(np.array([v])) for _, c in density_comps)

        env_vals = np.array([envelope(v) for v in v_grid])
        envelope_weight = float(np.trapezoid(env_vals * v_grid**2, v_grid))
        for x in range(model.n_states):
            comps = [c for c in model.components[x] if not isinstance(c, PointMass)]
            if not comps:
                continue
            for ui in range(u_grid.shape[0]):
                u = u_grid[ui]
                dens = np.array(
                    [
                        sum(c.rate(u) * c.density(np.array([v])) for c in comps)
                        for v in v_grid
                    ]
                )
                with np.errstate(invalid="ignore", divide="ignore"):
                    ratio = np.where(env_vals > 0, dens / (env_vals * (1 + norms[ui])), 0.0)
                max_density_ratio = max(max_density_ratio, float(np.max(ratio)))
        if max_density_ratio > L + 1e-9:
            failures.append(
                f"kernel density exceeds L * envelope * (1+|u|): ratio {max_density_ratio:.3g} > L={L:g}"
            )
    elif density_comps:
        # dim > 1: the analytic bound holds by construction (saturated
        # rates); the grid scan is only wired up for the 1-d catalogue.
        max_density_ratio = float("nan")

    return BoundsReport(
        c_grid=c_grid, tails=tails, growth_l=L,
        max_b_ratio=max_b, max_c_ratio=max_c,
        max_density_ratio=max_density_ratio,
        envelope_weight=envelope_weight,
        point_mass_states=point_states,
        failures=failures,
    )
