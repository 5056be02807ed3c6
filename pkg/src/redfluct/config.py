"""Study configuration: INI sections with one section per study kind."""
from __future__ import annotations

import configparser
import io
import os
from dataclasses import dataclass, field, replace

from .errors import ConfigError
from .exact import ED_DEFAULT_MAX_L
from .model import ParitySector, SpinAxis, XYZParams

__all__ = ["StudyConfig", "STUDY_KINDS", "DEFAULTS", "defaults_text", "load_config", "float_grid"]

STUDY_KINDS = ("ground", "scaling", "phase_diagram", "visibility_cut", "sampling")
BACKENDS = ("ed", "dmrg", "auto")

_COMMON = {
    "J": "1.0",
    "gamma": "0.0",
    "Jz": "0.5",
    "coupling_sign": "-1.0",
    "axes": "x,y,z",
    "cut": "half",
    "backend": "auto",
    "sector": "even",
    "chi_max": "128",
    "sweeps": "50",
    # solver target; 1e-12 is the production ideal, desk runs accept 1e-8
    "variance_target": "1e-10",
    "variance_accept": "1e-8",
    "lanczos_tol": "1e-12",
    "seed": "0",
    "min_fit_L": "8",
}

DEFAULTS = {
    "ground": {**_COMMON, "L": "12"},
    "scaling": {**_COMMON, "L": "8,10,12,14,16,18,20"},
    "phase_diagram": {
        **_COMMON,
        "L": "14",
        "gamma_min": "0.0",
        "gamma_max": "1.0",
        "gamma_step": "0.1",
        "Jz_min": "-1.0",
        "Jz_max": "1.0",
        "Jz_step": "0.1",
    },
    "visibility_cut": {
        **_COMMON,
        "L": "16",
        "Jz": "0.7",
        "gamma_min": "0.0",
        "gamma_max": "0.6",
        "gamma_step": "0.05",
    },
    "sampling": {
        **_COMMON,
        "L": "12",
        "gamma": "0.4",
        "Jz": "0.7",
        "backend": "ed",
        "axes": "z",
        "shots": "100,1000,10000,100000",
        "n_seeds": "20",
        "export_shots": "false",
        "shots_file": "",
    },
}


def float_grid(lo: float, hi: float, step: float) -> list[float]:
    """Inclusive grid lo, lo+step, ..., hi with values rounded to 12 digits."""
    if step <= 0:
        raise ConfigError("grid step must be positive")
    if hi < lo:
        raise ConfigError(f"empty grid: max {hi} < min {lo}")
    n = int(round((hi - lo) / step)) + 1
    return [round(lo + k * step, 12) for k in range(n)]


@dataclass
class StudyConfig:
    kind: str
    lengths: list
    params: XYZParams
    axes: tuple
    cut: str | int = "half"
    backend: str = "auto"
    sector: ParitySector = ParitySector.EVEN
    chi_max: int = 128
    sweeps: int = 50
    variance_target: float = 1e-10
    variance_accept: float = 1e-8
    lanczos_tol: float = 1e-12
    seed: int = 0
    min_fit_L: int = 8
    gammas: list = field(default_factory=list)
    Jzs: list = field(default_factory=list)
    shots: list = field(default_factory=list)
    n_seeds: int = 1
    export_shots: bool = False
    shots_file: str = ""
    workers: int = 1
    out: str = "."

    def backend_for(self, L: int) -> str:
        if self.backend == "auto":
            return "ed" if L <= ED_DEFAULT_MAX_L else "dmrg"
        return self.backend

    def cut_for(self, L: int) -> int:
        return L // 2 if self.cut == "half" else int(self.cut)

    def param_points(self) -> list[XYZParams]:
        """Parameter points in deterministic config order (gamma outer, Jz inner)."""
        p = self.params
        if self.kind == "phase_diagram":
            return [replace(p, gamma=g, Jz=jz) for g in self.gammas for jz in self.Jzs]
        if self.kind == "visibility_cut":
            return [replace(p, gamma=g) for g in self.gammas]
        return [p]


def _parse_list(raw: str, conv, what: str) -> list:
    try:
        return [conv(x.strip()) for x in raw.split(",") if x.strip()]
    except ValueError as e:
        raise ConfigError(f"bad {what} list {raw!r}: {e}") from None


def _num(sec, key, conv):
    try:
        return conv(sec[key])
    except ValueError:
        raise ConfigError(f"bad value for {key}: {sec[key]!r}") from None


def _build(kind: str, sec) -> StudyConfig:
    lengths = _parse_list(sec["L"], int, "L")
    if not lengths:
        raise ConfigError("L list is empty")
    if any(L < 2 for L in lengths):
        raise ConfigError("chain lengths must be >= 2")
    if kind == "scaling" and any(L % 2 for L in lengths):
        raise ConfigError("scaling studies need even chain lengths")
    if kind in ("ground", "phase_diagram", "visibility_cut", "sampling") and len(lengths) != 1:
        raise ConfigError(f"{kind} takes a single chain length")
    try:
        axes = tuple(SpinAxis.parse(a.strip()) for a in sec["axes"].split(",") if a.strip())
        sector = ParitySector.parse(sec["sector"])
    except ValueError as e:
        raise ConfigError(str(e)) from None
    if not axes:
        raise ConfigError("no axes selected")
    backend = sec["backend"].strip()
    if backend not in BACKENDS:
        raise ConfigError(f"backend must be one of {BACKENDS}, got {backend!r}")
    if backend == "ed" and max(lengths) > ED_DEFAULT_MAX_L:
        raise ConfigError(f"ed backend limited to L <= {ED_DEFAULT_MAX_L}")
    if backend == "dmrg" and min(lengths) < 2:
        raise ConfigError("dmrg backend needs L >= 2")
    cut = sec["cut"].strip()
    if cut != "half":
        try:
            cut = int(cut)
        except ValueError:
            raise ConfigError(f"cut must be 'half' or an integer, got {cut!r}") from None
        if any(not 1 <= cut <= L - 1 for L in lengths):
            raise ConfigError(f"cut {cut} outside 1..L-1")
    sign = _num(sec, "coupling_sign", float)
    if sign not in (-1.0, 1.0):
        raise ConfigError("coupling_sign must be -1 or 1")
    cfg = StudyConfig(
        kind=kind,
        lengths=lengths,
        params=XYZParams(_num(sec, "J", float), _num(sec, "gamma", float), _num(sec, "Jz", float), sign),
        axes=axes,
        cut=cut,
        backend=backend,
        sector=sector,
        chi_max=_num(sec, "chi_max", int),
        sweeps=_num(sec, "sweeps", int),
        variance_target=_num(sec, "variance_target", float),
        variance_accept=_num(sec, "variance_accept", float),
        lanczos_tol=_num(sec, "lanczos_tol", float),
        seed=_num(sec, "seed", int),
        min_fit_L=_num(sec, "min_fit_L", int),
    )
    if cfg.chi_max < 2 or cfg.sweeps < 1:
        raise ConfigError("chi_max must be >= 2 and sweeps >= 1")
    if cfg.seed < 0 or cfg.seed >= 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    if min(cfg.variance_target, cfg.variance_accept, cfg.lanczos_tol) <= 0:
        raise ConfigError("tolerances must be positive")
    if kind in ("phase_diagram", "visibility_cut"):
        cfg.gammas = float_grid(_num(sec, "gamma_min", float), _num(sec, "gamma_max", float), _num(sec, "gamma_step", float))
    if kind == "phase_diagram":
        cfg.Jzs = float_grid(_num(sec, "Jz_min", float), _num(sec, "Jz_max", float), _num(sec, "Jz_step", float))
    if kind == "sampling":
        cfg.shots = sorted(_parse_list(sec["shots"], int, "shots"))
        if not cfg.shots or min(cfg.shots) < 3:
            raise ConfigError("shots list must be non-empty with N >= 3")
        cfg.n_seeds = _num(sec, "n_seeds", int)
        if cfg.n_seeds < 1:
            raise ConfigError("n_seeds must be >= 1")
        try:
            cfg.export_shots = sec.getboolean("export_shots")
        except ValueError:
            raise ConfigError("export_shots must be a boolean") from None
        cfg.shots_file = sec["shots_file"].strip()
        if cfg.backend_for(lengths[0]) != "ed":
            raise ConfigError("sampling needs an ED-sized chain and the ed backend")
    return cfg


def load_config(kind: str, path=None, overrides: dict | None = None) -> StudyConfig:
    """Read the ``[kind]`` section of an INI file on top of the defaults.

    Unknown keys are rejected so that typos fail before any computation.
    """
    if kind not in STUDY_KINDS:
        raise ConfigError(f"unknown study kind {kind!r}")
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    cp.read_dict({k: dict(v) for k, v in DEFAULTS.items()})
    if path is not None:
        if not os.path.exists(path):
            raise ConfigError(f"config file not found: {path}")
        try:
            user = configparser.ConfigParser(interpolation=None)
            user.optionxform = str
            user.read(path)
        except configparser.Error as e:
            raise ConfigError(f"cannot parse {path}: {e}") from None
        for name in user.sections():
            if name not in STUDY_KINDS:
                raise ConfigError(f"unknown section [{name}] in {path}")
            for key, val in user[name].items():
                if key not in DEFAULTS[name]:
                    raise ConfigError(f"unknown key {key!r} in [{name}]")
                cp[name][key] = val
    for key, val in (overrides or {}).items():
        if key not in DEFAULTS[kind]:
            raise ConfigError(f"unknown key {key!r} for {kind}")
        cp[kind][key] = str(val)
    return _build(kind, cp[kind])


def defaults_text() -> str:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    cp.read_dict(DEFAULTS)
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()

