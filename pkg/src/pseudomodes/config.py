"""JSON configuration parsing and deterministic report writing.

Complex numbers are ``[re, im]`` pairs everywhere.  Operators may be given as
a standard name (``"pauli_z"``), a scaled or summed combination
(``{"name": "pauli_z", "scale": 0.5}``, ``{"sum": [...]}``) or an explicit
matrix whose entries are numbers or ``[re, im]`` pairs.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .bath_models import SpectralDensity, load_tabulated
from .gkls_model import GKLSModel, Mode, PseudomodeParams, SystemModel
from .operator_algebra import STANDARD_OPERATOR_NAMES, standard_operator
from .propagation import MultiTimeRequest


class ConfigError(ValueError):
    """Malformed configuration; the message names the offending key."""


def require(cfg: Mapping, key: str, where: str = "config"):
    if not isinstance(cfg, Mapping):
        raise ConfigError(f"{where} must be a JSON object")
    if key not in cfg:
        raise ConfigError(f"missing required key '{key}' in {where}")
    return cfg[key]


def load_json(path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {p} is not valid JSON: {exc}") from exc


def parse_complex(x, where: str) -> complex:
    if isinstance(x, (int, float)):
        return complex(x)
    if isinstance(x, (list, tuple)) and len(x) == 2 and all(isinstance(v, (int, float)) for v in x):
        return complex(x[0], x[1])
    raise ConfigError(f"{where}: expected a number or an [re, im] pair, got {x!r}")


def parse_operator(spec: Any, dim: int, where: str) -> np.ndarray:
    if isinstance(spec, str):
        if spec not in STANDARD_OPERATOR_NAMES:
            raise ConfigError(f"{where}: unknown operator name '{spec}' (known: {sorted(STANDARD_OPERATOR_NAMES)})")
        try:
            return standard_operator(spec, dim)
        except ValueError as exc:
            raise ConfigError(f"{where}: {exc}") from exc
    if isinstance(spec, Mapping):
        if "sum" in spec:
            terms = spec["sum"]
            if not isinstance(terms, list) or not terms:
                raise ConfigError(f"{where}.sum must be a non-empty list")
            out = sum(parse_operator(t, dim, f"{where}.sum[{i}]") for i, t in enumerate(terms))
        elif "name" in spec:
            out = parse_operator(spec["name"], dim, f"{where}.name")
        elif "matrix" in spec:
            out = parse_operator(spec["matrix"], dim, f"{where}.matrix")
        else:
            raise ConfigError(f"missing required key 'name', 'matrix' or 'sum' in {where}")
        return parse_complex(spec.get("scale", 1.0), f"{where}.scale") * out
    if isinstance(spec, list):
        rows = [[parse_complex(v, f"{where}[{i}][{j}]") for j, v in enumerate(row)]
                if isinstance(row, list) else None for i, row in enumerate(spec)]
        if any(r is None for r in rows):
            raise ConfigError(f"{where}: matrix rows must be lists")
        m = np.array(rows, dtype=complex)
        if m.shape != (dim, dim):
            raise ConfigError(f"{where}: matrix has shape {m.shape}, expected {(dim, dim)}")
        return m
    raise ConfigError(f"{where}: cannot interpret operator {spec!r}")


def parse_state(spec: Any, dim: int, where: str) -> np.ndarray:
    """Density matrix, or ``{"pure": [amplitudes]}`` normalized on read."""
    if isinstance(spec, Mapping) and "pure" in spec:
        psi = np.array([parse_complex(a, f"{where}.pure[{i}]") for i, a in enumerate(spec["pure"])])
        if psi.size != dim or not np.any(psi):
            raise ConfigError(f"{where}.pure must hold {dim} amplitudes, not all zero")
        psi = psi / np.linalg.norm(psi)
        return np.outer(psi, psi.conj())
    return parse_operator(spec, dim, where)


def parse_system(cfg: Mapping, where: str = "system") -> SystemModel:
    dim = int(require(cfg, "dim", where))
    blocks = cfg.get("hamiltonian", [])
    if not isinstance(blocks, list):
        blocks = [{"t_start": 0.0, "matrix": blocks}]
    sched = []
    for i, b in enumerate(blocks):
        w = f"{where}.hamiltonian[{i}]"
        sched.append((float(require(b, "t_start", w)), parse_operator(require(b, "matrix", w), dim, f"{w}.matrix")))
    coups = [parse_operator(a, dim, f"{where}.couplings[{i}]") for i, a in enumerate(cfg.get("couplings", []))]
    rho0 = parse_state(cfg["initial_state"], dim, f"{where}.initial_state") if "initial_state" in cfg else None
    try:
        return SystemModel(dim, tuple(sched), tuple(coups), rho0)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def parse_temperature(cfg: Mapping) -> float:
    init = cfg.get("initial_bath", {"kind": "vacuum"})
    kind = require(init, "kind", "initial_bath")
    if kind == "vacuum":
        return 0.0
    if kind == "thermal":
        return float(require(init, "temperature", "initial_bath"))
    raise ConfigError(f"initial_bath.kind must be 'vacuum' or 'thermal', got {kind!r}")


def parse_model(cfg: Mapping) -> GKLSModel:
    system = parse_system(require(cfg, "system"))
    modes_cfg = require(cfg, "modes")
    if not isinstance(modes_cfg, list):
        raise ConfigError("modes must be a list of {omega, gamma, n_max} objects")
    modes = []
    for i, mc in enumerate(modes_cfg):
        w = f"modes[{i}]"
        try:
            modes.append(Mode(float(require(mc, "omega", w)), float(require(mc, "gamma", w)),
                              int(mc.get("n_max", 4))))
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"{w}: {exc}") from exc
    couplings = {}
    for j, gs in dict(cfg.get("couplings", {})).items():
        couplings[int(j)] = [parse_complex(g, f"couplings.{j}[{k}]") for k, g in enumerate(gs)]
    mm = cfg.get("mode_mode")
    try:
        params = PseudomodeParams(tuple(modes), couplings,
                                  None if mm is None else parse_operator(mm, len(modes), "mode_mode"))
        return GKLSModel(system, params, parse_temperature(cfg))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def parse_spectral_density(cfg: Mapping, base: Path | None = None, where: str = "spectral_density") -> SpectralDensity:
    kind = require(cfg, "kind", where)
    temp = float(cfg.get("temperature", 0.0))
    try:
        if kind == "lorentzian":
            return SpectralDensity.lorentzian(*(float(require(cfg, k, where)) for k in ("amplitude", "center", "width")))
        if kind == "ohmic":
            return SpectralDensity.ohmic(float(require(cfg, "coupling", where)), float(require(cfg, "cutoff", where)),
                                         float(cfg.get("exponent", 1.0)), temp)
        if kind == "debye":
            return SpectralDensity.debye(float(require(cfg, "reorganization", where)),
                                         float(require(cfg, "cutoff", where)), temp)
        if kind == "tabulated":
            if "csv" in cfg:
                path = Path(cfg["csv"])
                return load_tabulated(path if path.is_absolute() or base is None else base / path, temp)
            return SpectralDensity.tabulated(require(cfg, "frequencies", where), require(cfg, "values", where), temp)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc
    raise ConfigError(f"{where}.kind must be lorentzian, ohmic, debye or tabulated, got {kind!r}")


def parse_request(cfg: Mapping, dim: int, where: str = "request") -> MultiTimeRequest:
    times = require(cfg, "times", where)
    left = [parse_operator(o, dim, f"{where}.left[{i}]") for i, o in enumerate(require(cfg, "left", where))]
    right_cfg = cfg.get("right")
    right = ([np.eye(dim)] * len(left) if right_cfg is None
             else [parse_operator(o, dim, f"{where}.right[{i}]") for i, o in enumerate(right_cfg)])
    try:
        return MultiTimeRequest(tuple(times), tuple(left), tuple(right))
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def parse_grid(cfg: Mapping, where: str) -> np.ndarray:
    """``{"start", "stop", "num"}`` or an explicit ``{"values": [...]}`` list."""
    if "values" in cfg:
        return np.asarray(cfg["values"], dtype=float)
    start = float(cfg.get("start", 0.0))
    stop = float(require(cfg, "stop", where))
    num = int(require(cfg, "num", where))
    if num < 1:
        raise ConfigError(f"{where}.num must be >= 1")
    return np.linspace(start, stop, num)


# ---------------------------------------------------------------------------
# output


def to_jsonable(x):
    if isinstance(x, dict):
        return {str(k): to_jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [to_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return to_jsonable(x.tolist())
    if isinstance(x, (complex, np.complexfloating)):
        return [float(x.real), float(x.imag)]
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    return x


def write_json(path, data) -> None:
    Path(path).write_text(json.dumps(to_jsonable(data), indent=2, sort_keys=True) + "\n")


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
