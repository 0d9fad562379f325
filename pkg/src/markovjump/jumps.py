"""Per-state jump kernels and their Poisson-scaling family.

A model assigns to every switching state x an intensity kernel

    Gamma(u, dv; x) = sum_i  lambda_i(u) * law_i(dv),

a finite mixture of point-mass, Gaussian and uniform components whose
rates grow linearly in |u| but saturate:

    lambda_i(u) = rate0_i * (1 + kappa_i * min(|u|, ucap_i)).

Saturation keeps every rate globally bounded, which makes thinning
bounds exact and the linear-growth conditions hold a fortiori.  On top
of the big-jump kernel, each state carries a small-jump drift: a rate
rho(x) of infinitesimal displacements d(u; x) (sum of constant and
linear-saturating terms).

The scale-eps family realized by :class:`PrelimitKernel` is

    Gamma_eps(u, dv; x) = eps * Gamma(u, dv; x) + rho(x) * delta_{eps * d(u;x)}(dv):

big jumps thinned by eps plus frequent infinitesimal jumps encoding the
drift.  Its first moment is eps * b(u; x) with

    b(u; x) = rho(x) d(u; x) + integral of v Gamma(u, dv; x)

exactly (zero defect), its second moment is eps * [c + eps * rho d d*],
and its g-moment defect is rho * g(eps d) / eps; all three defects have
closed forms, so scaling validation is exact rather than statistical.

The probe functions g ("g catalogue") are fixed: min(|v|^3, 1),
|v|^2 1{|v| > c}, and 1 - cos(|v|).  The first vanishes faster than
|v|^2 at zero; the tail probe is the square-integrability integrand;
1 - cos is O(|v|^2) only (not o(|v|^2)), which still gives a vanishing
scaling defect and is kept for its classical role as a characteristic-
function probe.  The tail probe is unbounded but every catalogue kernel
integrates it (light tails).

All classes are immutable after construction and safe to share across
workers; quadrature is reentrant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .errors import ComputationError, ModelError

_QUAD_TOL = 1e-8
# Integration window half-width for Gaussian components, in units of sd.
# Mass beyond 12 sd is ~ 1e-32; irrelevant at the 1e-8 tolerance.
_GAUSS_WINDOW_SDS = 12.0


def _as_point(u, dim: int) -> np.ndarray:
    """Normalize scalars / sequences to a (dim,) float array."""
    arr = np.atleast_1d(np.asarray(u, dtype=float))
    if arr.shape != (dim,):
        raise ModelError(f"point has shape {arr.shape}, expected ({dim},)")
    return arr


# ---------------------------------------------------------------------------
# Probe functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GProbe:
    """Named probe g(v); ``fn`` is vectorized over the last axis.

    ``radial_breaks`` lists |v| values where g is non-smooth, used to
    split quadrature intervals.
    """

    name: str
    fn: Callable[[np.ndarray], np.ndarray]
    radial_breaks: tuple[float, ...] = ()

    def __call__(self, v: np.ndarray) -> np.ndarray:
        return self.fn(np.asarray(v, dtype=float))


def _norm(v: np.ndarray) -> np.ndarray:
    return np.linalg.norm(np.atleast_1d(v), axis=-1)


CUBE_CLIP = GProbe("cube_clip", lambda v: np.minimum(_norm(v) ** 3, 1.0), (1.0,))
ONE_MINUS_COS = GProbe("one_minus_cos", lambda v: 1.0 - np.cos(_norm(v)))


def sq_tail(c: float) -> GProbe:
    """|v|^2 1{|v| > c}: the square-integrability tail integrand."""
    c = float(c)

    def fn(v: np.ndarray) -> np.ndarray:
        r = _norm(v)
        return np.where(r > c, r**2, 0.0)

    return GProbe(f"sq_tail_{c:g}", fn, (c,))


def default_probes() -> list[GProbe]:
    """The three standard probes used in scaling reports and characteristics."""
    return [CUBE_CLIP, sq_tail(1.0), ONE_MINUS_COS]


def get_probe(name: str) -> GProbe:
    """Probe by name; parametric tails parse the cutoff from the name."""
    if name == CUBE_CLIP.name:
        return CUBE_CLIP
    if name == ONE_MINUS_COS.name:
        return ONE_MINUS_COS
    if name.startswith("sq_tail_"):
        return sq_tail(float(name.removeprefix("sq_tail_")))
    raise ModelError(f"unknown probe {name!r}")


# ---------------------------------------------------------------------------
# Jump components
# ---------------------------------------------------------------------------

class JumpComponent:
    """Shared rate logic; concrete families add the jump law."""

    rate0: float
    kappa: float
    ucap: float

    def _check_rate(self):
        if self.rate0 < 0 or self.kappa < 0 or self.ucap < 0:
            raise ModelError(
                f"rate0/kappa/ucap must be nonnegative, got "
                f"({self.rate0}, {self.kappa}, {self.ucap})"
            )

    def rate(self, u: np.ndarray) -> float:
        """lambda(u) = rate0 (1 + kappa min(|u|, ucap))."""
        return self.rate0 * (1.0 + self.kappa * min(float(_norm(u)), self.ucap))

    def rate_array(self, u: np.ndarray) -> np.ndarray:
        """Vectorized rate over points of shape (m, dim)."""
        r = np.linalg.norm(np.atleast_2d(u), axis=1)
        return self.rate0 * (1.0 + self.kappa * np.minimum(r, self.ucap))

    def rate_bound(self) -> float:
        """sup_u lambda(u); exact thanks to saturation."""
        return self.rate0 * (1.0 + self.kappa * self.ucap)

    def scaled(self, factor: float) -> "JumpComponent":
        """Copy with rate0 multiplied by ``factor`` (law unchanged)."""
        return replace(self, rate0=self.rate0 * factor)

    # Law protocol: implemented by each family.
    @property
    def dim(self) -> int:
        raise NotImplementedError

    def law_mean(self) -> np.ndarray:
        raise NotImplementedError

    def law_second_moment(self) -> np.ndarray:
        """E[v v*] of the jump law, shape (dim, dim)."""
        raise NotImplementedError

    def law_g_expectation(self, g: GProbe, tol: float = _QUAD_TOL) -> float:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def density(self, v: np.ndarray):
        """Lebesgue density at v, or None for singular laws."""
        raise NotImplementedError

    def support_window(self) -> list[tuple[float, float]]:
        """Per-coordinate interval carrying all mass relevant at 1e-8."""
        raise NotImplementedError

    def to_config(self) -> dict:
        raise NotImplementedError


def _product_quadrature(
    g: GProbe,
    pdf_1d: Sequence[Callable[[np.ndarray], np.ndarray]],
    windows: Sequence[tuple[float, float]],
    tol: float,
) -> float:
    """E[g(V)] for a product law via (nested) adaptive quadrature."""
    dim = len(windows)
    breaks = g.radial_breaks
    if dim == 1:
        lo, hi = windows[0]
        pts = sorted({b for r in breaks for b in (-r, r) if lo < b < hi})

        def integrand(v):
            vv = np.array([v])
            return float(g(vv) * pdf_1d[0](vv))

        val, err = integrate.quad(
            integrand, lo, hi, points=pts or None, epsabs=tol, limit=400
        )
        if err > max(tol, 1e-10 * abs(val)):
            raise ComputationError(
                f"quadrature for {g.name} achieved only {err:.2e} (target {tol:.0e})"
            )
        return val

    def integrand(*coords):
        v = np.array(coords)
        dens = 1.0
        for k in range(dim):
            dens *= float(pdf_1d[k](np.array([coords[k]])))
        return float(g(v)) * dens

    val, err = integrate.nquad(
        integrand, list(windows), opts={"epsabs": tol, "limit": 200}
    )
    if err > max(10 * tol, 1e-9 * abs(val)):
        raise ComputationError(
            f"nquad for {g.name} achieved only {err:.2e} (target {tol:.0e})"
        )
    return val


@dataclass(frozen=True, eq=False)
class PointMass(JumpComponent):
    """Deterministic jump of size v0."""

    v0: np.ndarray
    rate0: float = 0.0
    kappa: float = 0.0
    ucap: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "v0", np.atleast_1d(np.asarray(self.v0, dtype=float)))
        self._check_rate()

    @property
    def dim(self) -> int:
        return self.v0.shape[0]

    def law_mean(self) -> np.ndarray:
        return self.v0.copy()

    def law_second_moment(self) -> np.ndarray:
        return np.outer(self.v0, self.v0)

    def law_g_expectation(self, g: GProbe, tol: float = _QUAD_TOL) -> float:
        return float(g(self.v0))

    def law_tail_second_moment(self, c: float) -> float:
        r2 = float(self.v0 @ self.v0)
        return r2 if math.sqrt(r2) > c else 0.0

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return self.v0.copy()

    def density(self, v: np.ndarray):
        return None

    def support_window(self) -> list[tuple[float, float]]:
        return [(float(v), float(v)) for v in self.v0]

    def to_config(self) -> dict:
        return {
            "family": "point", "v0": self.v0.tolist(),
            "rate": self.rate0, "kappa": self.kappa, "ucap": self.ucap,
        }


@dataclass(frozen=True, eq=False)
class Gaussian(JumpComponent):
    """Product Gaussian jump law (independent coordinates)."""

    mean: np.ndarray
    sd: np.ndarray
    rate0: float = 0.0
    kappa: float = 0.0
    ucap: float = 0.0

    def __post_init__(self):
        m = np.atleast_1d(np.asarray(self.mean, dtype=float))
        s = np.atleast_1d(np.asarray(self.sd, dtype=float))
        if s.shape != m.shape:
            raise ModelError("Gaussian mean and sd must have the same shape")
        if np.any(s <= 0):
            raise ModelError(f"Gaussian sd must be positive, got {s}")
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "sd", s)
        self._check_rate()

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def law_mean(self) -> np.ndarray:
        return self.mean.copy()

    def law_second_moment(self) -> np.ndarray:
        return np.diag(self.sd**2) + np.outer(self.mean, self.mean)

    def _pdf_1d(self, k: int) -> Callable[[np.ndarray], np.ndarray]:
        m, s = self.mean[k], self.sd[k]
        return lambda v: np.exp(-0.5 * ((v - m) / s) ** 2) / (s * math.sqrt(2 * math.pi))

    def _windows(self) -> list[tuple[float, float]]:
        w = _GAUSS_WINDOW_SDS
        return [
            (self.mean[k] - w * self.sd[k], self.mean[k] + w * self.sd[k])
            for k in range(self.dim)
        ]

    def law_g_expectation(self, g: GProbe, tol: float = _QUAD_TOL) -> float:
        return _product_quadrature(
            g, [self._pdf_1d(k) for k in range(self.dim)], self._windows(), tol
        )

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return rng.normal(self.mean, self.sd)

    def density(self, v: np.ndarray):
        v = np.atleast_1d(v)
        z = (v - self.mean) / self.sd
        return float(
            np.exp(-0.5 * np.sum(z**2))
            / np.prod(self.sd * math.sqrt(2 * math.pi))
        )

    def support_window(self) -> list[tuple[float, float]]:
        return [tuple(w) for w in self._windows()]

    def to_config(self) -> dict:
        return {
            "family": "gauss", "mean": self.mean.tolist(), "sd": self.sd.tolist(),
            "rate": self.rate0, "kappa": self.kappa, "ucap": self.ucap,
        }


@dataclass(frozen=True, eq=False)
class Uniform(JumpComponent):
    """Product uniform jump law on the box [lo, hi]."""

    lo: np.ndarray
    hi: np.ndarray
    rate0: float = 0.0
    kappa: float = 0.0
    ucap: float = 0.0

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        if lo.shape != hi.shape:
            raise ModelError("uniform lo and hi must have the same shape")
        if np.any(lo >= hi):
            raise ModelError(f"uniform requires lo < hi, got {lo} !< {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        self._check_rate()

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    def law_mean(self) -> np.ndarray:
        return (self.lo + self.hi) / 2.0

    def law_second_moment(self) -> np.ndarray:
        m = self.law_mean()
        var = (self.hi - self.lo) ** 2 / 12.0
        return np.diag(var) + np.outer(m, m)

    def law_g_expectation(self, g: GProbe, tol: float = _QUAD_TOL) -> float:
        widths = self.hi - self.lo
        pdfs = [
            (lambda v, w=widths[k]: np.full_like(v, 1.0 / w))
            for k in range(self.dim)
        ]
        windows = [(self.lo[k], self.hi[k]) for k in range(self.dim)]
        return _product_quadrature(g, pdfs, windows, tol)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.lo, self.hi)

    def density(self, v: np.ndarray):
        v = np.atleast_1d(v)
        inside = np.all((v >= self.lo) & (v <= self.hi))
        return float(inside) / float(np.prod(self.hi - self.lo))

    def support_window(self) -> list[tuple[float, float]]:
        return [(float(a), float(b)) for a, b in zip(self.lo, self.hi)]

    def to_config(self) -> dict:
        return {
            "family": "uniform", "a": self.lo.tolist(), "b": self.hi.tolist(),
            "rate": self.rate0, "kappa": self.kappa, "ucap": self.ucap,
        }


@dataclass(frozen=True, eq=False)
class MixtureLaw:
    """Normalized jump-size law of a component mixture.

    Weights are the component rates normalized to probabilities; the
    component rate fields are otherwise ignored here.
    """

    weights: np.ndarray
    components: tuple

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if w.size == 0 or np.any(w < 0) or not math.isclose(w.sum(), 1.0, abs_tol=1e-9):
            raise ModelError(f"mixture weights must be a probability vector, got {w}")
        if len(self.components) != w.size:
            raise ModelError("mixture weights and components disagree in length")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "components", tuple(self.components))
        object.__setattr__(self, "_cum", np.cumsum(w))

    @property
    def dim(self) -> int:
        return self.components[0].dim

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        idx = int(np.searchsorted(self._cum, rng.random(), side="right"))
        idx = min(idx, len(self.components) - 1)
        return self.components[idx].sample(rng)

    def mean(self) -> np.ndarray:
        return sum(w * comp.law_mean() for w, comp in zip(self.weights, self.components))

    def second_moment(self) -> np.ndarray:
        return sum(
            w * comp.law_second_moment() for w, comp in zip(self.weights, self.components)
        )


# ---------------------------------------------------------------------------
# Small-jump drift terms
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ConstDrift:
    """d(u) = value."""

    value: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "value", np.atleast_1d(np.asarray(self.value, dtype=float)))

    @property
    def dim(self) -> int:
        return self.value.shape[0]

    def displacement(self, u: np.ndarray) -> np.ndarray:
        return self.value

    def displacement_array(self, u: np.ndarray) -> np.ndarray:
        return np.broadcast_to(self.value, u.shape)

    def scaled(self, factor: float) -> "ConstDrift":
        return ConstDrift(self.value * factor)

    def to_config(self) -> dict:
        return {"kind": "const", "value": self.value.tolist()}


@dataclass(frozen=True, eq=False)
class LinSatDrift:
    """d(u) = offset + slope * clamp(u, -cap, cap), coordinate-wise."""

    offset: np.ndarray
    slope: np.ndarray
    cap: float

    def __post_init__(self):
        off = np.atleast_1d(np.asarray(self.offset, dtype=float))
        slo = np.atleast_1d(np.asarray(self.slope, dtype=float))
        if off.shape != slo.shape:
            raise ModelError("linsat offset and slope must have the same shape")
        if self.cap <= 0:
            raise ModelError(f"linsat cap must be positive, got {self.cap}")
        object.__setattr__(self, "offset", off)
        object.__setattr__(self, "slope", slo)

    @property
    def dim(self) -> int:
        return self.offset.shape[0]

    def displacement(self, u: np.ndarray) -> np.ndarray:
        return self.offset + self.slope * np.clip(u, -self.cap, self.cap)

    def displacement_array(self, u: np.ndarray) -> np.ndarray:
        return self.offset + self.slope * np.clip(u, -self.cap, self.cap)

    def scaled(self, factor: float) -> "LinSatDrift":
        return LinSatDrift(self.offset * factor, self.slope * factor, self.cap)

    def to_config(self) -> dict:
        return {
            "kind": "linsat", "offset": self.offset.tolist(),
            "slope": self.slope.tolist(), "cap": self.cap,
        }


DriftTerm = ConstDrift | LinSatDrift


# ---------------------------------------------------------------------------
# The model
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class JumpModel:
    """Per-state big-jump kernels plus small-jump drift.

    Attributes:
        dim: dimension of the jump space.
        components: per-state lists of :class:`JumpComponent`.
        rho: per-state small-jump rate, shape (n_states,), >= 0.
        drift: per-state lists of drift terms; d(u;x) is their sum.
        growth_l: declared linear-growth constant L; if None it is fitted
            during :meth:`validate`.

    Derived quantities (all per state, evaluated at a position u):
        big_mean    integral of v Gamma(u, dv; x)
        b           rho(x) d(u;x) + big_mean         (drift)
        c           integral of v v* Gamma(u, dv; x) (second moment)
        g_moment    integral of g(v) Gamma(u, dv; x)
    """

    dim: int
    components: list[list[JumpComponent]]
    rho: np.ndarray
    drift: list[list[DriftTerm]]
    growth_l: float | None = None
    _g_memo: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.rho = np.atleast_1d(np.asarray(self.rho, dtype=float))
        n = self.rho.shape[0]
        if len(self.components) != n or len(self.drift) != n:
            raise ModelError(
                f"components/drift must list {n} states, got "
                f"{len(self.components)}/{len(self.drift)}"
            )
        if np.any(self.rho < 0):
            raise ModelError("rho must be nonnegative")
        for x, comps in enumerate(self.components):
            for comp in comps:
                if comp.dim != self.dim:
                    raise ModelError(
                        f"component in state {x} has dim {comp.dim}, model dim {self.dim}"
                    )
        for x, terms in enumerate(self.drift):
            for term in terms:
                if term.dim != self.dim:
                    raise ModelError(
                        f"drift term in state {x} has dim {term.dim}, model dim {self.dim}"
                    )

    @property
    def n_states(self) -> int:
        return self.rho.shape[0]

    # -- displacement ------------------------------------------------------

    def displacement(self, u, x: int) -> np.ndarray:
        u = _as_point(u, self.dim)
        d = np.zeros(self.dim)
        for term in self.drift[x]:
            d = d + term.displacement(u)
        return d

    def displacement_array(self, u: np.ndarray, x: int) -> np.ndarray:
        """Vectorized d(u;x) over points of shape (m, dim)."""
        out = np.zeros_like(u)
        for term in self.drift[x]:
            out = out + term.displacement_array(u)
        return out

    # -- kernel moments ----------------------------------------------------

    def big_rates(self, u, x: int) -> np.ndarray:
        u = _as_point(u, self.dim)
        return np.array([comp.rate(u) for comp in self.components[x]])

    def big_rate_total(self, u, x: int) -> float:
        return float(self.big_rates(u, x).sum()) if self.components[x] else 0.0

    def big_rate_bound(self, x: int) -> float:
        """sup_u Gamma(u, R^d; x), exact by rate saturation."""
        return float(sum(comp.rate_bound() for comp in self.components[x]))

    def big_mean(self, u, x: int) -> np.ndarray:
        u = _as_point(u, self.dim)
        m = np.zeros(self.dim)
        for comp in self.components[x]:
            m = m + comp.rate(u) * comp.law_mean()
        return m

    def b(self, u, x: int) -> np.ndarray:
        u = _as_point(u, self.dim)
        return self.rho[x] * self.displacement(u, x) + self.big_mean(u, x)

    def c(self, u, x: int) -> np.ndarray:
        u = _as_point(u, self.dim)
        out = np.zeros((self.dim, self.dim))
        for comp in self.components[x]:
            out = out + comp.rate(u) * comp.law_second_moment()
        return out

    def g_expectations(self, g: GProbe) -> list[np.ndarray]:
        """Per-state arrays of component law expectations E_i[g] (memoized)."""
        cached = self._g_memo.get(g.name)
        if cached is None:
            cached = [
                np.array([comp.law_g_expectation(g) for comp in comps])
                for comps in self.components
            ]
            self._g_memo[g.name] = cached
        return cached

    def g_moment(self, u, x: int, g: GProbe) -> float:
        u = _as_point(u, self.dim)
        if not self.components[x]:
            return 0.0
        return float(self.big_rates(u, x) @ self.g_expectations(g)[x])

    # -- vectorized forms used by characteristic integration ---------------

    def b_array(self, u: np.ndarray, x: int) -> np.ndarray:
        """b(u;x) over points of shape (m, dim) -> (m, dim)."""
        out = self.rho[x] * self.displacement_array(u, x)
        for comp in self.components[x]:
            out = out + comp.rate_array(u)[:, None] * comp.law_mean()
        return out

    def c_array(self, u: np.ndarray, x: int) -> np.ndarray:
        """c(u;x) over points of shape (m, dim) -> (m, dim, dim)."""
        m = u.shape[0]
        out = np.zeros((m, self.dim, self.dim))
        for comp in self.components[x]:
            out = out + comp.rate_array(u)[:, None, None] * comp.law_second_moment()
        return out

    def g_moment_array(self, u: np.ndarray, x: int, g: GProbe) -> np.ndarray:
        out = np.zeros(u.shape[0])
        exps = self.g_expectations(g)[x]
        for comp, e in zip(self.components[x], exps):
            out = out + comp.rate_array(u) * e
        return out

    # -- validation --------------------------------------------------------

    def default_u_grid(self) -> np.ndarray:
        """Probe positions for grid checks: 13 points per axis in [-3, 3]."""
        pts = np.linspace(-3.0, 3.0, 13)
        if self.dim == 1:
            return pts[:, None]
        grid = np.zeros((13 * self.dim, self.dim))
        for k in range(self.dim):
            grid[13 * k : 13 * (k + 1), k] = pts
        return grid

    def validate(self, u_grid: np.ndarray | None = None) -> float:
        """Check growth invariants on a u grid; returns the L in force.

        With a declared ``growth_l``, |b(u;x)| <= L(1+|u|) and
        ||c(u;x)|| <= L(1+|u|^2) must hold at every grid point or a
        :class:`ModelError` names the first violating (u, x, bound).
        Without one, the minimal L on the grid (times a 5% margin) is
        fitted and stored.
        """
        grid = self.default_u_grid() if u_grid is None else np.atleast_2d(u_grid)
        needed = 0.0
        for x in range(self.n_states):
            b_vals = self.b_array(grid, x)
            c_vals = self.c_array(grid, x)
            norms = np.linalg.norm(grid, axis=1)
            b_ratio = np.linalg.norm(b_vals, axis=1) / (1.0 + norms)
            c_ratio = np.array(
                [np.linalg.norm(c_vals[i], 2) for i in range(grid.shape[0])]
            ) / (1.0 + norms**2)
            if self.growth_l is not None:
                for name, ratio in (("drift", b_ratio), ("second moment", c_ratio)):
                    bad = np.nonzero(ratio > self.growth_l + 1e-12)[0]
                    if bad.size:
                        i = int(bad[0])
                        raise ModelError(
                            f"linear-growth bound violated: {name} at u={grid[i]}, "
                            f"state {x}: ratio {ratio[i]:.6g} > L={self.growth_l}"
                        )
            needed = max(needed, float(b_ratio.max()), float(c_ratio.max()))
        if self.growth_l is None:
            self.growth_l = 1.05 * needed if needed > 0 else 1.0
        return self.growth_l

    def to_config(self) -> dict:
        return {
            "dimension": self.dim,
            "jumps": [[comp.to_config() for comp in comps] for comps in self.components],
            "drift": {
                "rho": self.rho.tolist(),
                "d": [[term.to_config() for term in terms] for terms in self.drift],
            },
            **({"L": self.growth_l} if self.growth_l is not None else {}),
        }


# ---------------------------------------------------------------------------
# Spec-level operations
# ---------------------------------------------------------------------------

def kernel_mean(model: JumpModel, u, x: int) -> tuple[np.ndarray, np.ndarray]:
    """(integral of v Gamma(u,dv;x), b(u;x)) from closed-form law means."""
    big = model.big_mean(u, x)
    return big, model.rho[x] * model.displacement(u, x) + big


def kernel_second_moment(model: JumpModel, u, x: int) -> np.ndarray:
    """c(u;x) = integral of v v* Gamma(u,dv;x), shape (dim, dim)."""
    return model.c(u, x)


def kernel_g_moment(model: JumpModel, u, x: int, g: GProbe) -> float:
    """integral of g(v) Gamma(u,dv;x) via per-component quadrature."""
    return model.g_moment(u, x, g)


@dataclass(frozen=True, eq=False)
class PrelimitKernel:
    """The scale-eps kernel eps*Gamma + rho*delta_{eps d}.

    Realizes the jump measure of the pre-limit process at scale eps;
    ``event_rate`` is the total jump intensity at the accelerated
    clock, Gamma(u, R^d; x) + rho(x)/eps, finite for every eps > 0.
    """

    model: JumpModel
    eps: float

    def __post_init__(self):
        if not 0.0 < self.eps <= 1.0:
            raise ModelError(f"eps must lie in (0, 1], got {self.eps}")

    def components_at(self, u, x: int) -> list[JumpComponent]:
        """Component view of Gamma_eps(u, .; x) at the position u.

        Big components have their rates thinned by eps; the drift enters
        as a point mass at eps*d(u;x) with rate rho(x).  The point-mass
        position is frozen at the given u (kernels are evaluated
        pointwise), which is exactly how the moment machinery uses it.
        """
        comps = [comp.scaled(self.eps) for comp in self.model.components[x]]
        if self.model.rho[x] > 0:
            d = self.model.displacement(u, x)
            comps.append(PointMass(v0=self.eps * d, rate0=float(self.model.rho[x])))
        return comps

    def mean(self, u, x: int) -> np.ndarray:
        u = _as_point(u, self.model.dim)
        m = np.zeros(self.model.dim)
        for comp in self.components_at(u, x):
            m = m + comp.rate(u) * comp.law_mean()
        return m

    def second_moment(self, u, x: int) -> np.ndarray:
        u = _as_point(u, self.model.dim)
        out = np.zeros((self.model.dim, self.model.dim))
        for comp in self.components_at(u, x):
            out = out + comp.rate(u) * comp.law_second_moment()
        return out

    def g_moment(self, u, x: int, g: GProbe) -> float:
        u = _as_point(u, self.model.dim)
        total = 0.0
        for comp in self.components_at(u, x):
            total += comp.rate(u) * comp.law_g_expectation(g)
        return total

    def event_rate(self, u, x: int) -> float:
        return self.model.big_rate_total(u, x) + float(self.model.rho[x]) / self.eps
