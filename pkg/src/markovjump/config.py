"""Model configuration files.

A model file is versioned JSON with the switching chain, the per-state
jump kernels and the small-jump drift:

    {
      "schema": "model-v1",
      "dimension": 1,
      "switching": {"states": ["a", "b"], "q": [1.0, 2.0], "P": [[0,1],[1,0]]},
      "jumps": [
        [{"family": "point", "v0": 1.0, "rate": 0.8, "kappa": 0.0, "ucap": 0.0},
         {"family": "gauss", "mean": 0.4, "sd": 0.35, "rate": 5.0}],
        [{"family": "gauss", "mean": -0.5, "sd": 0.5, "rate": 7.0}]
      ],
      "drift": {"rho": [1.0, 0.5],
                "d": [[{"kind": "const", "value": 0.5}],
                      [{"kind": "const", "value": -0.4}]]},
      "L": 4.0,                      # optional declared growth constant
      "initial": {"xi0": 0.0, "x0": 0}   # optional defaults for runs
    }

Families: "point" (v0), "gauss" (mean, sd), "uniform" (a, b); each takes
"rate" (base rate), "kappa" and "ucap" (rate growth and its saturation
cap, both default 0).  Scalar numbers are accepted wherever a length-d
vector is expected.  Drift terms: {"kind": "const", "value": v} or
{"kind": "linsat", "offset": o, "slope": s, "cap": c}; a bare object is
accepted instead of a one-element list.

Parse errors carry the offending key path.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ModelError
from .jumps import (
    ConstDrift,
    Gaussian,
    JumpModel,
    LinSatDrift,
    PointMass,
    Uniform,
)
from .switching import SwitchSpec

SCHEMA = "model-v1"


@dataclass(frozen=True)
class ModelBundle:
    """Parsed model file: switching spec, jump model, run defaults."""

    spec: SwitchSpec
    model: JumpModel
    xi0: np.ndarray
    x0: int
    raw: dict

    def config_hash(self) -> str:
        return hashlib.sha256(
            json.dumps(self.raw, sort_keys=True).encode()
        ).hexdigest()


def _require(cfg: dict, key: str, path: str):
    if key not in cfg:
        raise ModelError(f"missing key '{path}{key}'")
    return cfg[key]


def _vector(value, dim: int, path: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.shape == (1,) and dim > 1:
        arr = np.full(dim, arr[0])
    if arr.shape != (dim,):
        raise ModelError(f"'{path}' must be a scalar or length-{dim} vector")
    return arr


def _parse_component(cfg: dict, dim: int, path: str):
    family = _require(cfg, "family", path)
    rate = float(cfg.get("rate", 0.0))
    kappa = float(cfg.get("kappa", 0.0))
    ucap = float(cfg.get("ucap", 0.0))
    known = {"family", "rate", "kappa", "ucap"}
    try:
        if family == "point":
            comp = PointMass(
                v0=_vector(_require(cfg, "v0", path), dim, path + "v0"),
                rate0=rate, kappa=kappa, ucap=ucap,
            )
            known |= {"v0"}
        elif family == "gauss":
            comp = Gaussian(
                mean=_vector(_require(cfg, "mean", path), dim, path + "mean"),
                sd=_vector(_require(cfg, "sd", path), dim, path + "sd"),
                rate0=rate, kappa=kappa, ucap=ucap,
            )
            known |= {"mean", "sd"}
        elif family == "uniform":
            comp = Uniform(
                lo=_vector(_require(cfg, "a", path), dim, path + "a"),
                hi=_vector(_require(cfg, "b", path), dim, path + "b"),
                rate0=rate, kappa=kappa, ucap=ucap,
            )
            known |= {"a", "b"}
        else:
            raise ModelError(
                f"'{path}family' must be one of point/gauss/uniform, got {family!r}"
            )
    except ModelError as exc:
        raise ModelError(f"{path}: {exc}") from None
    unknown = set(cfg) - known
    if unknown:
        raise ModelError(f"unknown keys {sorted(unknown)} at '{path}'")
    return comp


def _parse_drift_term(cfg: dict, dim: int, path: str):
    kind = _require(cfg, "kind", path)
    if kind == "const":
        return ConstDrift(_vector(_require(cfg, "value", path), dim, path + "value"))
    if kind == "linsat":
        return LinSatDrift(
            offset=_vector(cfg.get("offset", 0.0), dim, path + "offset"),
            slope=_vector(_require(cfg, "slope", path), dim, path + "slope"),
            cap=float(_require(cfg, "cap", path)),
        )
    raise ModelError(f"'{path}kind' must be const or linsat, got {kind!r}")


def parse_model(raw: dict) -> ModelBundle:
    """Parse and validate a model config dict."""
    if not isinstance(raw, dict):
        raise ModelError("model config must be a JSON object")
    schema = raw.get("schema", SCHEMA)
    if schema != SCHEMA:
        raise ModelError(f"unsupported schema {schema!r}, expected {SCHEMA!r}")
    dim = int(raw.get("dimension", 1))
    if dim < 1:
        raise ModelError("'dimension' must be >= 1")

    sw = _require(raw, "switching", "")
    states = _require(sw, "states", "switching.")
    spec = SwitchSpec(
        states=tuple(states),
        q=np.asarray(_require(sw, "q", "switching."), dtype=float),
        P=np.asarray(_require(sw, "P", "switching."), dtype=float),
    )
    n = spec.n_states

    jumps_cfg = _require(raw, "jumps", "")
    if len(jumps_cfg) != n:
        raise ModelError(f"'jumps' must list {n} states, got {len(jumps_cfg)}")
    components = [
        [
            _parse_component(comp, dim, f"jumps[{x}][{i}].")
            for i, comp in enumerate(state_cfg)
        ]
        for x, state_cfg in enumerate(jumps_cfg)
    ]

    drift_cfg = raw.get("drift", {"rho": [0.0] * n, "d": [[] for _ in range(n)]})
    rho = np.asarray(_require(drift_cfg, "rho", "drift."), dtype=float)
    if rho.shape != (n,):
        raise ModelError(f"'drift.rho' must have length {n}")
    d_cfg = drift_cfg.get("d", [[] for _ in range(n)])
    if len(d_cfg) != n:
        raise ModelError(f"'drift.d' must list {n} states, got {len(d_cfg)}")
    drift = []
    for x, terms in enumerate(d_cfg):
        if isinstance(terms, dict):
            terms = [terms]
        drift.append(
            [
                _parse_drift_term(term, dim, f"drift.d[{x}][{i}].")
                for i, term in enumerate(terms)
            ]
        )

    model = JumpModel(
        dim=dim, components=components, rho=rho, drift=drift,
        growth_l=float(raw["L"]) if "L" in raw else None,
    )
    model.validate()

    init = raw.get("initial", {})
    xi0 = _vector(init.get("xi0", 0.0), dim, "initial.xi0")
    x0 = int(init.get("x0", 0))
    if not 0 <= x0 < n:
        raise ModelError(f"'initial.x0' out of range [0, {n})")
    return ModelBundle(spec=spec, model=model, xi0=xi0, x0=x0, raw=raw)


def load_model(path: str | Path) -> ModelBundle:
    """Read and parse a model file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ModelError(f"cannot read model file {path}: {exc}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(
            f"model file {path} is not valid JSON (line {exc.lineno}, column {exc.colno}): {exc.msg}"
        ) from None
    return parse_model(raw)


def dump_model(spec: SwitchSpec, model: JumpModel, initial: dict | None = None) -> dict:
    """Serialize back to the model-v1 schema."""
    cfg = model.to_config()
    cfg["schema"] = SCHEMA
    cfg["switching"] = {
        "states": list(spec.states),
        "q": spec.q.tolist(),
        "P": spec.P.tolist(),
    }
    if initial:
        cfg["initial"] = initial
    return cfg
