"""Experiment configuration: parsing, validation and canonical serialization."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import MISSING, dataclass, field, fields
from typing import Any, Optional

import numpy as np

from .channel import CORRELATIONS, INDEPENDENT, FadingTables, Topology, geometric_fading
from .errors import ConfigError
from .optimize import JrSolverConfig
from .schemes import Scheme

REDRAW = "redraw-per-trial"
FIXED = "fixed-per-sweep"
PLACEMENTS = (REDRAW, FIXED)

_TOPOLOGY_KEYS = {f.name for f in fields(Topology)}
_JR_KEYS = {f.name for f in fields(JrSolverConfig)}


_REAL_FIELDS = ("pu_min", "bandwidth", "m_smallscale", "noise_density", "noise_figure",
                "ris_bs_l0_db", "ris_bs_exponent")


def _is_real(x) -> bool:
    return isinstance(x, (int, float, np.integer, np.floating)) and not isinstance(x, bool) and math.isfinite(x)


def noise_power_watts(bandwidth: float, density: float, nf: float) -> float:
    """Thermal noise power in W from a dBm/Hz density, bandwidth in Hz and noise figure in dB."""
    if not bandwidth > 0:
        raise ValueError("bandwidth must be positive")
    return 10.0 ** ((density + 10.0 * math.log10(bandwidth) + nf - 30.0) / 10.0)


def default_sweep(step: float = 3.0, stop: float = 30.0) -> list[float]:
    return [float(x) for x in np.arange(0.0, stop + step / 2, step)]


@dataclass
class SystemConfig:
    r0: float
    topology: Topology = field(default_factory=Topology)
    m_smallscale: float = 2.5
    ris_bs_l0_db: float = -30.0
    ris_bs_exponent: float = 2.0
    fading: Optional[dict] = None
    pu_min: float = 0.1
    gain_sweep: list = field(default_factory=default_sweep)
    bandwidth: float = 10e6
    noise_density: float = -174.0
    noise_figure: float = 9.0
    schemes: list = field(default_factory=lambda: ["SU", "OR", "OMUR", "OMUR_RP", "OppBF", "IR"])
    trials: int = 100_000
    seed: int = 0
    correlation: str = INDEPENDENT
    user_placement: str = REDRAW
    analytical: bool = True
    oracle_samples: int = 200_000
    jr: JrSolverConfig = field(default_factory=JrSolverConfig)

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise ConfigError(problems)
        self.schemes = [Scheme.parse(s).value for s in self.schemes]
        self.gain_sweep = [float(g) for g in self.gain_sweep]

    def problems(self) -> list[str]:
        errs = []
        bad = {name for name in _REAL_FIELDS if not _is_real(getattr(self, name))}
        sweep_ok = isinstance(self.gain_sweep, (list, tuple)) and all(_is_real(g) for g in self.gain_sweep)
        errs += [f"{name}: must be a number" for name in _REAL_FIELDS if name in bad]
        if self.r0 is None:
            errs.append("r0: r0 required (target rate in bit/s/Hz)")
        elif not (isinstance(self.r0, (int, float)) and self.r0 >= 0):
            errs.append("r0: must be a non-negative number")
        if not isinstance(self.trials, int) or self.trials < 1:
            errs.append("trials: must be an integer >= 1")
        if not sweep_ok:
            errs.append("gain_sweep: must be a list of numbers (dB)")
        elif not self.gain_sweep:
            errs.append("gain_sweep: must list at least one power gain in dB")
        elif list(self.gain_sweep) != sorted(self.gain_sweep):
            errs.append("gain_sweep: must be sorted ascending")
        if "pu_min" not in bad and not self.pu_min > 0:
            errs.append("pu_min: must be > 0")
        if "bandwidth" not in bad and not self.bandwidth > 0:
            errs.append("bandwidth: must be > 0")
        if "m_smallscale" not in bad and not self.m_smallscale >= 0.5:
            errs.append("m_smallscale: must be >= 0.5")
        if not isinstance(self.seed, int) or self.seed < 0:
            errs.append("seed: must be a non-negative integer")
        if self.correlation not in CORRELATIONS:
            errs.append(f"correlation: must be one of {CORRELATIONS}, got {self.correlation!r}")
        if self.user_placement not in PLACEMENTS:
            errs.append(f"user_placement: must be one of {PLACEMENTS}, got {self.user_placement!r}")
        if not isinstance(self.oracle_samples, int) or self.oracle_samples < 10_000:
            errs.append("oracle_samples: must be an integer >= 10000")
        if not isinstance(self.schemes, (list, tuple)):
            errs.append("schemes: must be a list of scheme names")
        for i, s in enumerate(self.schemes if isinstance(self.schemes, (list, tuple)) else []):
            try:
                Scheme.parse(s)
            except ValueError as exc:
                errs.append(f"schemes[{i}]: {exc}")
        if self.fading is not None and not bad:
            try:
                self.explicit_fading().check_covers(self.topology)
            except (ConfigError, ValueError, KeyError, TypeError) as exc:
                errs.append(f"fading: {exc}")
        return errs

    # derived quantities

    @property
    def noise_power(self) -> float:
        return noise_power_watts(self.bandwidth, self.noise_density, self.noise_figure)

    def snr(self, gain_db: float) -> float:
        return self.pu_min * 10.0 ** (gain_db / 10.0) / self.noise_power

    def explicit_fading(self) -> FadingTables:
        fad = self.fading

        def unpack(rows):
            arr = np.asarray([[r["m"], r["omega"]] for r in rows], dtype=float).reshape(-1, 2)
            return arr[:, 0], arr[:, 1]

        m_d, om_d = unpack(fad["direct"])
        S, K = self.topology.num_surfaces, self.topology.num_users
        g_rows = [c for row in fad.get("ris_user", []) for c in row]
        m_g, om_g = unpack(g_rows) if g_rows else (np.zeros(0), np.zeros(0))
        m_f, om_f = unpack(fad.get("ris_bs", [])) if fad.get("ris_bs") else (np.zeros(0), np.zeros(0))
        if m_g.size != S * K:
            raise ConfigError([f"ris_user needs {S} rows of {K} entries"])
        return FadingTables(m_d, om_d, m_g.reshape(S, K), om_g.reshape(S, K), m_f, om_f)

    def position_rng(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=(0,))))

    def fixed_positions(self) -> np.ndarray:
        """User positions used when they are not redrawn per trial."""
        if self.topology.user_positions is not None:
            return self.topology.user_positions
        return self.topology.draw_user_positions(self.position_rng())

    def fading_for(self, positions) -> FadingTables:
        return geometric_fading(
            self.topology, positions, self.m_smallscale, self.ris_bs_l0_db, self.ris_bs_exponent
        )

    @property
    def varies_per_trial(self) -> bool:
        return (
            self.fading is None
            and self.topology.user_positions is None
            and self.user_placement == REDRAW
        )

    def fixed_fading(self) -> Optional[FadingTables]:
        """Fading tables shared by all trials, or None when users move per trial."""
        if self.fading is not None:
            return self.explicit_fading()
        if self.varies_per_trial:
            return None
        return self.fading_for(self.fixed_positions())

    # serialization

    def to_dict(self) -> dict:
        topo = {
            "cell_radius": float(self.topology.cell_radius),
            "num_users": int(self.topology.num_users),
            "num_surfaces": int(self.topology.num_surfaces),
            "elements_per_surface": list(self.topology.elements_per_surface),
            "ris_distance_to_bs": float(self.topology.ris_distance_to_bs),
            "carrier_freq": float(self.topology.carrier_freq),
            "user_positions": None
            if self.topology.user_positions is None
            else self.topology.user_positions.tolist(),
        }
        return {
            "r0": self.r0,
            "topology": topo,
            "m_smallscale": self.m_smallscale,
            "ris_bs_l0_db": self.ris_bs_l0_db,
            "ris_bs_exponent": self.ris_bs_exponent,
            "fading": self.fading,
            "pu_min": self.pu_min,
            "gain_sweep": list(self.gain_sweep),
            "bandwidth": self.bandwidth,
            "noise_density": self.noise_density,
            "noise_figure": self.noise_figure,
            "schemes": list(self.schemes),
            "trials": self.trials,
            "seed": self.seed,
            "correlation": self.correlation,
            "user_placement": self.user_placement,
            "analytical": self.analytical,
            "oracle_samples": self.oracle_samples,
            "jr": {
                "max_sweeps": self.jr.max_sweeps,
                "rel_tolerance": self.jr.rel_tolerance,
                "init": self.jr.init,
            },
        }

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "SystemConfig":
        """Build and validate; every problem found is reported at once."""
        if not isinstance(raw, dict):
            raise ConfigError(["config: top level must be a mapping"])
        problems = []
        known = {f.name for f in fields(cls)}
        for key in raw:
            if key not in known:
                problems.append(f"{key}: unknown field")
        kwargs = {k: v for k, v in raw.items() if k in known}
        if "r0" not in raw or raw.get("r0") is None:
            problems.append("r0: r0 required (target rate in bit/s/Hz)")
            kwargs["r0"] = None

        topo_raw = raw.get("topology") or {}
        topo = None
        if not isinstance(topo_raw, dict):
            problems.append("topology: must be a mapping")
        else:
            for key in topo_raw:
                if key not in _TOPOLOGY_KEYS:
                    problems.append(f"topology.{key}: unknown field")
            try:
                topo = Topology(**{k: v for k, v in topo_raw.items() if k in _TOPOLOGY_KEYS})
            except ConfigError as exc:
                problems.extend(exc.problems)
            except (TypeError, ValueError) as exc:
                problems.append(f"topology: {exc}")
        kwargs["topology"] = topo or Topology()

        jr_raw = raw.get("jr") or {}
        try:
            for key in jr_raw:
                if key not in _JR_KEYS:
                    problems.append(f"jr.{key}: unknown field")
            kwargs["jr"] = JrSolverConfig(**{k: v for k, v in jr_raw.items() if k in _JR_KEYS})
        except ConfigError as exc:
            problems.extend(exc.problems)
            kwargs["jr"] = JrSolverConfig()

        if "trials" in kwargs and isinstance(kwargs["trials"], float) and kwargs["trials"].is_integer():
            kwargs["trials"] = int(kwargs["trials"])
        try:
            cfg = cls.__new__(cls)
            for f in fields(cls):
                default = f.default_factory() if f.default_factory is not MISSING else f.default
                setattr(cfg, f.name, kwargs.get(f.name, default))
            problems.extend(p for p in cfg.problems() if p not in problems)
        except Exception as exc:  # malformed values that defeat validation itself
            problems.append(f"config: {exc}")
        if problems:
            raise ConfigError(problems)
        return cls(**kwargs)

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()


def load_config(path) -> SystemConfig:
    import yaml

    with open(path) as fh:
        try:
            raw = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError([f"config: not valid YAML ({exc})"]) from exc
    return SystemConfig.from_dict(raw)
