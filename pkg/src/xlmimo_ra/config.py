"""System and algorithm configuration, with INI-style file loading.

Power-like quantities are stored in linear scale (watts); configuration
files may give them in dB/dBm and they are converted once at load time.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field, replace

__all__ = [
    "SystemConfig",
    "GaParams",
    "SolverParams",
    "ConfigInvalid",
    "db_to_linear",
    "dbm_to_watts",
    "GA_RA_DEFAULTS",
    "DGA_LOCAL_DEFAULTS",
    "load_config_file",
]


class ConfigInvalid(ValueError):
    """A configuration violates one of its structural invariants."""


def db_to_linear(x_db):
    return 10.0 ** (x_db / 10.0)


def dbm_to_watts(x_dbm):
    return 10.0 ** ((x_dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class SystemConfig:
    """Cell geometry, array partition and power/noise parameters.

    The array of ``num_antennas`` elements is split into ``num_subarrays``
    equal contiguous subarrays, each with ``rf_per_subarray`` RF chains,
    so at most that many antennas per subarray can be active at once.
    """

    cell_size_m: float = 30.0
    num_antennas: int = 512
    num_rf: int = 256
    num_subarrays: int = 8
    num_users: int = 50
    max_power_w: float = 230e-6
    ref_path_loss: float = db_to_linear(-35.3)
    path_loss_exp: float = 3.0
    noise_power_w: float = dbm_to_watts(-96.0)

    def __post_init__(self):
        m, n, b = self.num_antennas, self.num_rf, self.num_subarrays
        if min(m, n, b, self.num_users) < 1:
            raise ConfigInvalid("antenna/RF/subarray/user counts must be >= 1")
        if m % b != 0:
            raise ConfigInvalid(f"num_antennas={m} not divisible by num_subarrays={b}")
        if n % b != 0:
            raise ConfigInvalid(f"num_rf={n} not divisible by num_subarrays={b}")
        if n // b >= m // b:
            raise ConfigInvalid(
                f"rf_per_subarray={n // b} must be < antennas_per_subarray={m // b}"
            )
        for name in ("cell_size_m", "max_power_w", "ref_path_loss",
                     "path_loss_exp", "noise_power_w"):
            if getattr(self, name) <= 0:
                raise ConfigInvalid(f"{name} must be > 0")

    @property
    def antennas_per_subarray(self) -> int:
        return self.num_antennas // self.num_subarrays

    @property
    def rf_per_subarray(self) -> int:
        return self.num_rf // self.num_subarrays

    def subarray_slice(self, b: int) -> slice:
        """Index slice of subarray ``b`` (0-based) into a length-M vector."""
        if not 0 <= b < self.num_subarrays:
            raise IndexError(f"subarray index {b} out of range")
        mb = self.antennas_per_subarray
        return slice(b * mb, (b + 1) * mb)

    def with_(self, **kwargs) -> "SystemConfig":
        return replace(self, **kwargs)


@dataclass(frozen=True)
class GaParams:
    """Genetic-algorithm phase parameters.

    Elitism keeps ``elites`` individuals; each of the ``tournaments``
    crossover pair-draws produces two children, so the population is
    refilled exactly when elites + 2 * tournaments == population.
    """

    population: int = 80
    elites: int = 8
    tournaments: int = 36
    p_crossover: float = 0.33
    p_mutation: float = 0.13
    max_generations: int = 1000
    stall_generations: int = 300

    def __post_init__(self):
        if not self.elites < self.population:
            raise ConfigInvalid("elites must be < population")
        if self.elites + 2 * self.tournaments != self.population:
            raise ConfigInvalid(
                "population fill rule violated: elites + 2*tournaments "
                f"= {self.elites + 2 * self.tournaments} != {self.population}"
            )
        for name in ("p_crossover", "p_mutation"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ConfigInvalid(f"{name}={p} not in [0, 1]")
        if self.stall_generations > self.max_generations:
            raise ConfigInvalid("stall_generations must be <= max_generations")
        if self.max_generations < 1:
            raise ConfigInvalid("max_generations must be >= 1")

    def with_(self, **kwargs) -> "GaParams":
        return replace(self, **kwargs)


# Tuned parameter sets for the centralized and the per-subarray local GA.
GA_RA_DEFAULTS = GaParams()
DGA_LOCAL_DEFAULTS = GaParams(p_crossover=0.35, p_mutation=0.36,
                              max_generations=100, stall_generations=30)


@dataclass(frozen=True)
class SolverParams:
    """Frank-Wolfe stopping parameters for the relaxed selection solver."""

    gap_tol: float = 1e-5
    max_iters: int = 200


# ---------------------------------------------------------------------------
# Configuration files
# ---------------------------------------------------------------------------

_SYSTEM_INT_KEYS = ("num_antennas", "num_rf", "num_subarrays", "num_users")


def _system_from_section(sec) -> SystemConfig:
    kw = {}
    for key in _SYSTEM_INT_KEYS:
        if key in sec:
            kw[key] = int(sec[key])
    if "cell_size_m" in sec:
        kw["cell_size_m"] = float(sec["cell_size_m"])
    if "path_loss_exp" in sec:
        kw["path_loss_exp"] = float(sec["path_loss_exp"])
    # power-like entries accept either a linear-scale or a dB/dBm key
    if "max_power_dbm" in sec:
        kw["max_power_w"] = dbm_to_watts(float(sec["max_power_dbm"]))
    elif "max_power_w" in sec:
        kw["max_power_w"] = float(sec["max_power_w"])
    if "ref_path_loss_db" in sec:
        kw["ref_path_loss"] = db_to_linear(float(sec["ref_path_loss_db"]))
    elif "ref_path_loss" in sec:
        kw["ref_path_loss"] = float(sec["ref_path_loss"])
    if "noise_power_dbm" in sec:
        kw["noise_power_w"] = dbm_to_watts(float(sec["noise_power_dbm"]))
    elif "noise_power_w" in sec:
        kw["noise_power_w"] = float(sec["noise_power_w"])
    return SystemConfig(**kw)


def _ga_from_section(sec, defaults: GaParams) -> GaParams:
    kw = {}
    for key in ("population", "elites", "tournaments",
                "max_generations", "stall_generations"):
        if key in sec:
            kw[key] = int(sec[key])
    for key in ("p_crossover", "p_mutation"):
        if key in sec:
            kw[key] = float(sec[key])
    return defaults.with_(**kw) if kw else defaults


@dataclass
class FileConfig:
    """Parsed contents of an experiment configuration file."""

    system: SystemConfig
    ga: GaParams
    dga: GaParams
    dga_iterations: list = field(default_factory=lambda: [5, 16])
    sweep_variable: str = "num_rf"
    sweep_values: list = field(default_factory=list)
    methods: list = field(default_factory=list)
    trials: int = 50
    seed: int = 1
    out_dir: str = "results"
    threads: int = 1


def _int_list(text):
    return [int(v) for v in text.replace(",", " ").split()]


def load_config_file(path) -> FileConfig:
    """Parse an INI-style experiment configuration.

    Sections: [system], [ga], [dga], [sweep], [output]; every key is
    optional and falls back to the package defaults.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    read = parser.read(path)
    if not read:
        raise ConfigInvalid(f"cannot read config file: {path}")
    try:
        system = _system_from_section(parser["system"] if "system" in parser else {})
    except (ValueError, KeyError) as exc:
        if isinstance(exc, ConfigInvalid):
            raise
        raise ConfigInvalid(f"bad [system] section: {exc}") from exc
    ga = _ga_from_section(parser["ga"] if "ga" in parser else {}, GA_RA_DEFAULTS)
    dga_sec = parser["dga"] if "dga" in parser else {}
    dga = _ga_from_section(dga_sec, DGA_LOCAL_DEFAULTS)
    dga_iters = _int_list(dga_sec["iterations"]) if "iterations" in dga_sec else [5, 16]

    out = FileConfig(system=system, ga=ga, dga=dga, dga_iterations=dga_iters)
    # the environment supplies the default output dir; [output] overrides it
    out.out_dir = os.environ.get("XLMIMO_RA_OUTDIR", out.out_dir)
    if "sweep" in parser:
        sec = parser["sweep"]
        out.sweep_variable = sec.get("variable", out.sweep_variable)
        if "values" in sec:
            out.sweep_values = _int_list(sec["values"])
        if "methods" in sec:
            out.methods = [m.strip() for m in sec["methods"].split(",") if m.strip()]
        out.trials = int(sec.get("trials", out.trials))
        out.seed = int(sec.get("seed", out.seed))
    if "output" in parser:
        sec = parser["output"]
        out.out_dir = sec.get("directory", out.out_dir)
        out.threads = int(sec.get("threads", out.threads))
    if not out.sweep_values:
        out.sweep_values = [getattr(system, out.sweep_variable)]
    return out
