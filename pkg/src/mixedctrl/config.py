"""
Run configuration: a sectioned key/value (INI) file.

Example::

    [model]
    energies = 0.4843, 1.4214, 2.3691, 3.2434
    # dipoles = 1.0, 1.4142135623730951, 1.7320508075688772   (default sqrt(n))
    omega0 = 7.8e14

    [initial]
    kind = thermal          # ground | thermal | weights
    # kT = 2.7591           (thermal; default E_N - E_1)
    # weights = 0.4, 0.3, 0.2, 0.1

    [observable]
    kind = h0               # h0 | file
    # path = A.txt          (file: N rows of N complex entries)

    [grid]
    tF_fs = 200
    steps = 4096

    [optimizer]
    lambda = 4
    seed = 0
    seed_amplitude = 1e-3
    tol = 1e-8
    max_iters = 100
    scheme = exact

    [output]
    directory = out

Relative paths are resolved against the directory of the config file.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, InvariantError, ShapeError
from .liouville import DensityState, HermitianOperator
from .models import (
    HF_ENERGIES,
    HF_OMEGA0,
    MorseModel,
    build_dipole,
    build_h0,
    diagonal_state,
    ground_state,
    thermal_state,
    time_to_internal,
)
from .optimizer import OptimizerConfig
from .propagator import PropagatorTables, TimeGrid, build_tables

SECTIONS = {
    "model": {"dim", "energies", "dipoles", "omega0"},
    "initial": {"kind", "kt", "weights"},
    "observable": {"kind", "path"},
    "grid": {"tf_fs", "steps"},
    "optimizer": {"lambda", "seed", "seed_amplitude", "tol", "max_iters", "scheme"},
    "output": {"directory"},
}


@dataclass(frozen=True, eq=False)
class RunConfig:
    model: MorseModel
    initial_kind: str
    kT: float | None
    weights: tuple[float, ...] | None
    observable_kind: str
    observable_path: Path | None
    observable_matrix: np.ndarray | None
    tF_fs: float
    steps: int
    optimizer: OptimizerConfig
    output_dir: Path
    source: Path | None = None

    def rho0(self) -> DensityState:
        if self.initial_kind == "ground":
            return ground_state(self.model.dim)
        if self.initial_kind == "thermal":
            return thermal_state(self.model.energies, self.kT)
        return diagonal_state(self.weights)

    def observable(self) -> HermitianOperator:
        if self.observable_kind == "h0":
            return build_h0(self.model)
        return HermitianOperator(self.observable_matrix)

    def grid(self) -> TimeGrid:
        return TimeGrid(0.0, time_to_internal(self.tF_fs, self.model.omega0), self.steps)

    def tables(self) -> PropagatorTables:
        return build_tables(build_h0(self.model), build_dipole(self.model))

    def echo(self) -> dict:
        """Every resolved setting, enough to rebuild the run."""
        obs = None
        if self.observable_matrix is not None:
            m = self.observable_matrix
            obs = {"real": m.real.tolist(), "imag": m.imag.tolist()}
        opt = self.optimizer
        return {
            "model": {
                "dim": self.model.dim,
                "energies": self.model.energies.tolist(),
                "dipoles": self.model.dipoles.tolist(),
                "omega0": self.model.omega0,
            },
            "initial": {"kind": self.initial_kind, "kT": self.kT,
                        "weights": None if self.weights is None else list(self.weights)},
            "observable": {"kind": self.observable_kind,
                           "path": None if self.observable_path is None else str(self.observable_path),
                           "matrix": obs},
            "grid": {"tF_fs": self.tF_fs, "steps": self.steps},
            "optimizer": {"lambda": opt.lam, "seed": opt.seed, "seed_amplitude": opt.seed_amplitude,
                          "tol": opt.tol_deltaW, "max_iters": opt.max_iters, "scheme": opt.scheme},
        }


def _line_index(text: str) -> dict[tuple[str, str], int]:
    """Map ``(section, key)`` to 1-based line numbers."""
    where = {}
    section = None
    for i, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        m = re.match(r"^\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip().lower()
            where[(section, "")] = i
            continue
        m = re.match(r"^([^=:#;\s][^=:]*?)\s*[=:]", s)
        if m and section is not None:
            where[(section, m.group(1).strip().lower())] = i
    return where


class _Reader:
    def __init__(self, parser, lines, path):
        self.p = parser
        self.lines = lines
        self.path = path

    def err(self, section, key, msg):
        line = self.lines.get((section, key), self.lines.get((section, "")))
        return ConfigError(f"[{section}] {key}: {msg}" if key else f"[{section}] {msg}",
                           str(self.path) if self.path else None, line)

    def raw(self, section, key):
        if self.p.has_option(section, key):
            return self.p.get(section, key).strip()
        return None

    def float(self, section, key, default=None, positive=False):
        s = self.raw(section, key)
        if s is None:
            if default is None:
                raise self.err(section, key, "missing required value")
            return default
        try:
            v = float(s)
        except ValueError:
            raise self.err(section, key, f"not a number: {s!r}") from None
        if not np.isfinite(v) or (positive and v <= 0):
            raise self.err(section, key, f"must be {'positive and ' if positive else ''}finite, got {s}")
        return v

    def int(self, section, key, default=None, positive=False):
        s = self.raw(section, key)
        if s is None:
            if default is None:
                raise self.err(section, key, "missing required value")
            return default
        try:
            v = int(s)
        except ValueError:
            raise self.err(section, key, f"not an integer: {s!r}") from None
        if positive and v <= 0:
            raise self.err(section, key, f"must be positive, got {v}")
        return v

    def vector(self, section, key):
        s = self.raw(section, key)
        if s is None:
            return None
        try:
            return tuple(float(x) for x in re.split(r"[,\s]+", s) if x)
        except ValueError:
            raise self.err(section, key, f"not a list of numbers: {s!r}") from None

    def choice(self, section, key, options, default):
        s = (self.raw(section, key) or default).lower()
        if s not in options:
            raise self.err(section, key, f"expected one of {', '.join(options)}, got {s!r}")
        return s


def _strip_comments(text: str) -> str:
    # allow trailing "# ..." comments on value lines
    return "\n".join(re.sub(r"\s+#.*$", "", line) for line in text.splitlines())


def parse_config(text: str, path: Path | None = None) -> RunConfig:
    base = path.parent if path is not None else Path.cwd()
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(_strip_comments(text), source=str(path) if path else "<config>")
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        raise ConfigError(str(exc).splitlines()[0], str(path) if path else None, line) from None
    r = _Reader(parser, _line_index(text), path)

    for section in parser.sections():
        if section not in SECTIONS:
            raise r.err(section, "", "unknown section")
        for key in parser.options(section):
            if key not in SECTIONS[section]:
                raise r.err(section, key, "unknown key")

    energies = r.vector("model", "energies") or HF_ENERGIES
    dim = r.int("model", "dim", default=len(energies), positive=True)
    if dim != len(energies):
        raise r.err("model", "dim", f"dim={dim} but {len(energies)} energies given")
    try:
        model = MorseModel(np.array(energies), r.vector("model", "dipoles"),
                           r.float("model", "omega0", default=HF_OMEGA0, positive=True))
    except InvariantError as exc:
        key = "dipoles" if "dipole" in str(exc) else "energies"
        raise r.err("model", key, str(exc)) from None

    kind = r.choice("initial", "kind", ("ground", "thermal", "weights"), "ground")
    kT = weights = None
    if kind == "thermal":
        kT = r.float("initial", "kt", default=float(model.energies[-1] - model.energies[0]), positive=True)
    elif kind == "weights":
        weights = r.vector("initial", "weights")
        if weights is None:
            raise r.err("initial", "weights", "missing required value")
        if len(weights) != dim:
            raise r.err("initial", "weights", f"expected {dim} weights, got {len(weights)}")
        try:
            diagonal_state(weights)
        except InvariantError as exc:
            raise r.err("initial", "weights", str(exc)) from None

    obs_kind = r.choice("observable", "kind", ("h0", "file"), "h0")
    obs_path = obs_matrix = None
    if obs_kind == "file":
        raw = r.raw("observable", "path")
        if not raw:
            raise r.err("observable", "path", "missing required value")
        obs_path = (base / raw).resolve()
        if not obs_path.is_file():
            raise r.err("observable", "path", f"file not found: {obs_path}")
        try:
            obs_matrix = np.atleast_2d(np.loadtxt(obs_path, dtype=complex, delimiter=None))
            HermitianOperator(obs_matrix)
        except (ValueError, InvariantError, ShapeError) as exc:
            raise r.err("observable", "path", f"{obs_path.name}: {exc}") from None
        if obs_matrix.shape != (dim, dim):
            raise r.err("observable", "path", f"matrix is {obs_matrix.shape}, expected ({dim}, {dim})")

    tF_fs = r.float("grid", "tf_fs", default=200.0, positive=True)
    steps = r.int("grid", "steps", default=4096, positive=True)

    try:
        opt = OptimizerConfig(
            lam=r.float("optimizer", "lambda", default=4.0, positive=True),
            max_iters=r.int("optimizer", "max_iters", default=100, positive=True),
            tol_deltaW=r.float("optimizer", "tol", default=1e-8, positive=True),
            seed=r.int("optimizer", "seed", default=0),
            seed_amplitude=r.float("optimizer", "seed_amplitude", default=1e-3),
            scheme=r.choice("optimizer", "scheme", ("exact", "midpoint"), "exact"),
        )
    except InvariantError as exc:
        raise r.err("optimizer", "", str(exc)) from None

    out = r.raw("output", "directory") or "out"
    return RunConfig(model, kind, kT, weights, obs_kind, obs_path, obs_matrix, tF_fs, steps, opt,
                     (base / out).resolve(), path)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(path)) from None
    return parse_config(text, path)

