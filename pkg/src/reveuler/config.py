"""Flat key=value experiment configs with # comments, plus bundled presets."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields
from importlib import resources

from .data import COMPLETION_MODES, PROJECTED, DataSpec, ProfileParams, RadialProfile, SurrogateProfile
from .fields import Grid
from .iteration import ADVECTIVE, KERNEL_DERIVATIVE, IterationConfig, SignPack

PRESETS = ("smoke", "singular-default", "lipschitz-boundary", "kink-k2", "nu-sweep", "moment-audit")


class ConfigError(ValueError):
    """Unparseable or invalid config; ``key`` names the offending entry."""

    def __init__(self, key: str, msg: str):
        super().__init__(f"config key {key!r}: {msg}")
        self.key = key


def _bool(s: str) -> bool:
    low = s.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _floats(s: str) -> tuple:
    return tuple(float(x) for x in s.replace(",", " ").split()) if s.strip() else ()


def _ints(s: str) -> tuple:
    return tuple(int(x) for x in s.replace(",", " ").split()) if s.strip() else ()


@dataclass
class ExperimentConfig:
    name: str = "experiment"
    # grid and time
    R: float = 4.0
    n: int = 33
    nu: float = 0.1
    T: float = 0.5
    n_steps: int = 16
    K_max: int = 8
    # data
    profile: str = "singular"  # singular | surrogate
    k: int = 0
    alpha0: float = 0.25
    beta0: float = 2.2
    i0: int = 1
    completion_mode: str = PROJECTED
    surrogate_amplitude: float = 1.0
    surrogate_width: float = 1.0
    # scheme
    conv_path: str = "fast"
    flip_burgers: bool = False
    flip_leray: bool = False
    burgers_form: str = ADVECTIVE
    leray_corrected: bool = False
    track_vorticity: bool = False
    # diagnostics toggles
    contraction: bool = False
    contraction_threshold: float = 0.9
    decay: bool = False
    decay_order: float = 8.0
    incompressibility: bool = False
    recursion: bool = False
    moment: bool = False
    moment_fields: int = 10
    blowup: bool = False
    blowup_R: float = 1.0
    blowup_n: tuple = (65, 129, 257)
    mms: bool = False
    mms_R: float = 5.0
    mms_n: tuple = (17, 25)
    mms_T: float = 0.5
    mms_K: int = 8
    nu_sweep: tuple = ()
    # plumbing
    threads: int = 1
    seed: int = 0
    output_dir: str = "reveuler-out"
    snapshots: bool = False

    def validate(self):
        if self.n % 2 == 0:
            raise ConfigError("n", f"must be odd, got {self.n}")
        if self.n < 9:
            raise ConfigError("n", f"must be >= 9, got {self.n}")
        if not self.R > 0:
            raise ConfigError("R", "must be positive")
        for key in ("nu", "T"):
            if not getattr(self, key) > 0:
                raise ConfigError(key, "must be positive")
        if self.K_max < 3:
            raise ConfigError("K_max", "must be >= 3")
        if self.n_steps < 1:
            raise ConfigError("n_steps", "must be >= 1")
        if self.profile not in ("singular", "surrogate"):
            raise ConfigError("profile", "must be 'singular' or 'surrogate'")
        if self.completion_mode not in COMPLETION_MODES:
            raise ConfigError("completion_mode", f"must be one of {COMPLETION_MODES}")
        if self.i0 not in (1, 2, 3):
            raise ConfigError("i0", "must be 1, 2 or 3")
        if self.k < 0 or self.k == 1:
            raise ConfigError("k", "must be 0 or >= 2")
        if self.conv_path.lower() not in ("fast", "direct"):
            raise ConfigError("conv_path", "must be 'fast' or 'direct'")
        if self.burgers_form not in (ADVECTIVE, KERNEL_DERIVATIVE):
            raise ConfigError("burgers_form", f"must be {ADVECTIVE!r} or {KERNEL_DERIVATIVE!r}")
        if self.threads < 1:
            raise ConfigError("threads", "must be >= 1")
        for key, ns in (("blowup_n", self.blowup_n), ("mms_n", self.mms_n)):
            if any(m % 2 == 0 or m < 9 for m in ns):
                raise ConfigError(key, "grid sizes must be odd and >= 9")
        if self.contraction and self.K_max < 5:
            raise ConfigError("K_max", "contraction ratios need K_max >= 5")
        if self.decay and (self.K_max < 4 or self.R < 3):
            raise ConfigError("K_max" if self.K_max < 4 else "R", "decay envelopes need K_max >= 4 and R >= 3")
        if self.nu_sweep and len(self.nu_sweep) < 3:
            raise ConfigError("nu_sweep", "needs at least 3 values")
        return self

    # -- derived objects

    def make_profile(self):
        if self.profile == "surrogate":
            return SurrogateProfile(self.surrogate_amplitude, self.surrogate_width)
        return RadialProfile(ProfileParams(self.k, self.alpha0, self.beta0))

    def data_spec(self) -> DataSpec:
        return DataSpec(self.i0, self.completion_mode, self.make_profile())

    def iteration_config(self) -> IterationConfig:
        return IterationConfig(
            nu=self.nu,
            T=self.T,
            n_steps=self.n_steps,
            K_max=self.K_max,
            data=self.data_spec(),
            grid=Grid(self.R, self.n),
            conv_path=self.conv_path,
            signs=SignPack(self.flip_burgers, self.flip_leray),
            burgers_form=self.burgers_form,
            leray_corrected=self.leray_corrected,
            track_vorticity=self.track_vorticity or self.recursion,
        )

    def canonical(self) -> str:
        lines = []
        for f in fields(self):
            if f.name == "output_dir":
                continue
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(repr(x) for x in v)
            elif isinstance(v, bool):
                v = "true" if v else "false"
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"

    @property
    def fingerprint(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]


_CONVERTERS = {}
for _f in fields(ExperimentConfig):
    _t = _f.type
    if _t == "bool":
        _CONVERTERS[_f.name] = _bool
    elif _t == "int":
        _CONVERTERS[_f.name] = int
    elif _t == "float":
        _CONVERTERS[_f.name] = float
    elif _t == "tuple":
        _CONVERTERS[_f.name] = _ints if _f.name.endswith("_n") else _floats
    else:
        _CONVERTERS[_f.name] = str


def parse_config(text: str) -> ExperimentConfig:
    """Parse key=value lines; blank lines and # comments are ignored.  Raises ConfigError."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(line, f"line {lineno} is not key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in _CONVERTERS:
            raise ConfigError(key, "unknown key")
        try:
            values[key] = _CONVERTERS[key](val)
        except ValueError as exc:
            raise ConfigError(key, str(exc)) from None
    return ExperimentConfig(**values).validate()


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def preset_text(name: str) -> str:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return resources.files("reveuler.presets").joinpath(f"{name}.cfg").read_text(encoding="utf-8")


def list_presets() -> str:
    out = []
    for name in PRESETS:
        first = preset_text(name).splitlines()[0].lstrip("# ").strip()
        out.append(f"{name:20s} {first}")
    return "\n".join(out) + "\n"
