"""Experiment configuration files.

The format is a small INI dialect::

    # comment
    [section]
    key = value            # numbers, true/false, words, or lists "1 2 3"

Every key has a default that depends on the selected test case, so a file
containing only ``[case]`` / ``test_case = 1`` reproduces the first test
case.  Unknown sections or keys are errors reported with their line number.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from ..interface import OuterConfig
from ..subdomain import InnerOptions
from ..viscosity import CrossModelParams

EXPERIMENTS = ("single", "convergence-space", "convergence-time", "gmres-study", "testcase2")


class ConfigError(ValueError):
    def __init__(self, message, line=None, path=None):
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)
        self.line = line


@dataclass
class ExperimentConfig:
    test_case: int = 1
    experiment: str = "single"
    discontinuous: bool = False
    fluid_domain: tuple = (0.0, 1.0, 1.0, 2.0)
    porous_domain: tuple = (0.0, 1.0, 0.0, 1.0)
    interface_y: float = 1.0
    # cells per unit length; h = 1 / n
    resolutions: tuple = (8,)
    T: float = 0.01
    dt_f: float = 0.002
    dt_p: float = 0.001
    dt_coarse: tuple = (0.2, 0.1, 0.05, 0.025)
    # sweeps of the fluid step for the second test case (porous step = 2 x fluid step)
    dt_f_sweep: tuple = (0.25, 0.125, 0.0625, 0.03125)
    dt_compare: float = 0.125
    reference_dt: float = 0.01
    reference_resolution: int = 32
    fluid: CrossModelParams = field(default_factory=lambda: CrossModelParams(0.5, 1.5, 1.0, 2.0))
    porous: CrossModelParams = field(default_factory=lambda: CrossModelParams(0.5, 1.5, 1.0, 2.0))
    # viscosity exponents visited by the sweep drivers (r_f = r_p = r)
    r_values: tuple = (2.0, 1.5)
    kappa: float = 1.0
    S_p: float = 1.0
    alpha_bjs: float = 1.0
    eta: float = 10.0
    # time grid carrying the interface multiplier: "fluid" or "porous"
    multiplier_grid: str = "fluid"
    outer: OuterConfig = field(default_factory=OuterConfig)
    inner: InnerOptions = field(default_factory=InnerOptions)
    parallel: bool = False
    out_dir: str = "results"
    vtk: bool = False

    @property
    def c_bjs(self) -> float:
        return self.alpha_bjs / self.kappa ** 0.5

    def validate(self) -> "ExperimentConfig":
        if self.test_case not in (1, 2):
            raise ConfigError(f"test_case must be 1 or 2, got {self.test_case}")
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; "
                              f"expected one of {', '.join(EXPERIMENTS)}")
        if not self.T > 0:
            raise ConfigError("T must be positive")
        if self.multiplier_grid not in ("fluid", "porous"):
            raise ConfigError(f"multiplier_grid must be fluid or porous, got {self.multiplier_grid!r}")
        if self.multiplier_grid == "porous" and self.outer.precondition:
            raise ConfigError("the preconditioner needs the multiplier on the fluid time grid")
        steps = [("dt_f", self.dt_f), ("dt_p", self.dt_p), ("reference_dt", self.reference_dt)]
        steps += [("dt_coarse", v) for v in self.dt_coarse]
        steps += [("dt_f_sweep", v) for v in self.dt_f_sweep]
        for name, dt in steps:
            if not dt > 0:
                raise ConfigError(f"{name} must be positive, got {dt}")
        divides = [("dt_f", self.dt_f), ("dt_p", self.dt_p)]
        if self.experiment == "testcase2":
            divides.append(("reference_dt", self.reference_dt))
        for name, dt in divides:
            steps_in_T(self.T, dt, name)
        if any(int(n) != n or n < 1 for n in (*self.resolutions, self.reference_resolution)):
            raise ConfigError("mesh resolutions must be positive integers")
        f, p = self.fluid_domain, self.porous_domain
        if len(f) != 4 or len(p) != 4:
            raise ConfigError("domains are given as 'x0 x1 y0 y1'")
        if abs(f[2] - self.interface_y) > 1e-12 or abs(p[3] - self.interface_y) > 1e-12 \
                or abs(f[0] - p[0]) > 1e-12 or abs(f[1] - p[1]) > 1e-12:
            raise ConfigError("the fluid box must sit on top of the porous box along interface_y")
        if self.test_case == 1 and (tuple(f) != (0.0, 1.0, 1.0, 2.0)
                                    or tuple(p) != (0.0, 1.0, 0.0, 1.0)):
            raise ConfigError("test case 1 is defined on the unit squares stacked at y = 1")
        return self


def steps_in_T(T: float, dt: float, name: str = "dt") -> int:
    """Number of steps of size ``dt`` in ``[0, T]``; ``dt`` must divide ``T``."""
    n = round(T / dt)
    if n < 1 or abs(n * dt - T) > 1e-12 * max(1.0, T):
        raise ConfigError(f"{name}={dt} does not divide T={T}")
    return int(n)


def defaults(test_case: int = 1) -> ExperimentConfig:
    """Constants of the first test case, or of the pressure-drop case."""
    if test_case == 2:
        visc = CrossModelParams(nu_inf=1.0, nu_0=10.0, K=1.0, r=1.35)
        return ExperimentConfig(
            test_case=2, experiment="testcase2", resolutions=(32,), T=1.0,
            dt_f=0.0625, dt_p=0.125, fluid=visc, porous=visc, r_values=(1.35,), eta=0.0,
            outer=OuterConfig(newton_maxit=6, newton_tol=1e-8, gmres_maxit=400))
    return ExperimentConfig()


def experiment_defaults(experiment: str) -> ExperimentConfig:
    """Test-case defaults with the sweep settings of one of the studies."""
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}")
    if experiment == "testcase2":
        return defaults(2)
    cfg = dataclasses.replace(defaults(1), experiment=experiment)
    if experiment in ("convergence-space", "gmres-study"):
        return dataclasses.replace(cfg, resolutions=(4, 8, 16, 32))
    if experiment == "convergence-time":
        return dataclasses.replace(cfg, resolutions=(32,), T=0.2)
    return cfg


# section -> key -> (attribute path, kind)
_SCHEMA = {
    "case": {"test_case": ("test_case", "int"), "experiment": ("experiment", "str"),
             "discontinuous": ("discontinuous", "bool")},
    "geometry": {"fluid_domain": ("fluid_domain", "floats"),
                 "porous_domain": ("porous_domain", "floats"),
                 "interface_y": ("interface_y", "float")},
    "mesh": {"resolutions": ("resolutions", "ints"),
             "reference_resolution": ("reference_resolution", "int")},
    "time": {"T": ("T", "float"), "dt_f": ("dt_f", "float"), "dt_p": ("dt_p", "float"),
             "dt_coarse": ("dt_coarse", "floats"), "dt_f_sweep": ("dt_f_sweep", "floats"),
             "dt_compare": ("dt_compare", "float"), "reference_dt": ("reference_dt", "float")},
    "fluid": {k: (f"fluid.{k}", "float") for k in ("nu_inf", "nu_0", "K", "r")},
    "porous": {**{k: (f"porous.{k}", "float") for k in ("nu_inf", "nu_0", "K", "r")},
               "kappa": ("kappa", "float"), "S_p": ("S_p", "float")},
    "interface": {"alpha_bjs": ("alpha_bjs", "float"), "eta": ("eta", "float"),
                  "multiplier_grid": ("multiplier_grid", "str")},
    "sweep": {"r_values": ("r_values", "floats")},
    "solver": {"newton_maxit": ("outer.newton_maxit", "int"),
               "newton_tol": ("outer.newton_tol", "float"),
               "gmres_tol": ("outer.gmres_tol", "float"),
               "gmres_maxit": ("outer.gmres_maxit", "int"),
               "precond": ("outer.precondition", "bool"),
               "inner_tol": ("inner.tol", "float"), "inner_maxit": ("inner.maxit", "int"),
               "inner_residual_tol": ("inner.residual_tol", "float"),
               "parallel": ("parallel", "bool")},
    "output": {"dir": ("out_dir", "str"), "vtk": ("vtk", "bool")},
}

_BOOLS = {"true": True, "yes": True, "on": True, "1": True,
          "false": False, "no": False, "off": False, "0": False}


def _convert(raw: str, kind: str):
    if kind == "str":
        return raw
    if kind == "bool":
        try:
            return _BOOLS[raw.lower()]
        except KeyError:
            raise ValueError(f"expected true/false, got {raw!r}") from None
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    items = raw.replace(",", " ").split()
    if not items:
        raise ValueError("empty list")
    return tuple(int(v) for v in items) if kind == "ints" else tuple(float(v) for v in items)


def _assign(cfg: ExperimentConfig, path: str, value) -> ExperimentConfig:
    if "." not in path:
        return dataclasses.replace(cfg, **{path: value})
    head, attr = path.split(".")
    sub = getattr(cfg, head)
    return dataclasses.replace(cfg, **{head: dataclasses.replace(sub, **{attr: value})})


def parse_config_text(text: str, path=None) -> ExperimentConfig:
    entries = []
    section = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {line!r}", lineno, path)
            section = line[1:-1].strip()
            if section not in _SCHEMA:
                raise ConfigError(f"unknown section [{section}]", lineno, path)
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", lineno, path)
        if section is None:
            raise ConfigError("key outside of any section", lineno, path)
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in _SCHEMA[section]:
            raise ConfigError(f"unknown key {key!r} in [{section}]", lineno, path)
        attr, kind = _SCHEMA[section][key]
        try:
            value = _convert(raw, kind)
        except ValueError as exc:
            raise ConfigError(f"{section}.{key}: {exc}", lineno, path) from None
        entries.append((lineno, attr, value))

    test_case = next((v for _, a, v in entries if a == "test_case"), 1)
    if test_case not in (1, 2):
        line = next(n for n, a, _ in entries if a == "test_case")
        raise ConfigError(f"test_case must be 1 or 2, got {test_case}", line, path)
    cfg = defaults(test_case)
    for lineno, attr, value in entries:
        try:
            cfg = _assign(cfg, attr, value)
            if attr in ("T", "dt_f", "dt_p", "reference_dt") and not value > 0:
                raise ValueError(f"{attr} must be positive, got {value}")
        except ValueError as exc:
            raise ConfigError(str(exc), lineno, path) from None
    try:
        return cfg.validate()
    except ConfigError as exc:
        raise ConfigError(str(exc), None, path) from None


def parse_config(path) -> ExperimentConfig:
    """Read and validate an experiment configuration file."""
    path = Path(path)
    return parse_config_text(path.read_text(encoding="utf-8"), path)
