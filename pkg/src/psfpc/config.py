"""Scenario configuration, config-file loading and named presets."""
from __future__ import annotations

import math
import sys
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from .online_em import DEFAULT_ALPHA, INIT_CASES
from .oscillator import OscillatorParams, estimation_sigmas, snr_db_to_linear

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

ALGORITHMS = ("psfpc", "dfpc", "kf_psfpc", "kf_dfpc", "em_kf_psfpc", "em_kf_dfpc")
EM_MODES = ("em", "naive", "genie")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    algorithm: str = "psfpc"
    em_mode: str | None = None
    n_nodes: int = 20
    connectivity: float = 0.2
    directed: bool = True
    snr_db: float = 30.0
    T_s: float = 1e-4
    f_s_hz: float = 1e7
    f_c_hz: float = 1e9
    beta1: float = 5e-19
    beta2: float = 5e-19
    A_dBc: float = -53.46
    sigma_init_ppm: float = 100.0
    alpha_em: float = DEFAULT_ALPHA
    em_init_case: str = "good_b"
    n_iterations: int = 100
    n_trials: int = 100
    base_seed: int = 0
    output_path: str | None = None
    name: str = "scenario"

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}; choose from {ALGORITHMS}")
        if self.em_mode is None:
            object.__setattr__(self, "em_mode", default_em_mode(self.algorithm))
        if self.em_mode not in EM_MODES:
            raise ConfigError(f"unknown em_mode {self.em_mode!r}; choose from {EM_MODES}")
        if self.algorithm.startswith("em_kf") and self.em_mode != "em":
            raise ConfigError(f"{self.algorithm} runs the EM estimator; em_mode must be 'em'")
        if self.algorithm.startswith("kf_") and self.em_mode == "em":
            raise ConfigError(f"{self.algorithm} keeps its covariances fixed; use em_kf_* for EM")
        if self.dfpc and self.directed:
            raise ConfigError("DFPC variants need an undirected network (directed = false)")
        if self.em_init_case not in INIT_CASES or self.em_init_case == "custom":
            raise ConfigError(f"em_init_case must be one of {INIT_CASES[:3]}")
        if self.n_trials < 1 or self.n_iterations < 1 or self.n_nodes < 2:
            raise ConfigError("n_trials, n_iterations must be >= 1 and n_nodes >= 2")
        if not 0.0 <= self.connectivity <= 1.0:
            raise ConfigError("connectivity must lie in [0, 1]")
        if not 0.0 < self.alpha_em < 1.0:
            raise ConfigError("alpha_em must lie in (0, 1)")
        try:
            estimation_sigmas(self.oscillator_params())
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def dfpc(self) -> bool:
        return self.algorithm.endswith("dfpc")

    @property
    def filtered(self) -> bool:
        return "kf" in self.algorithm

    def oscillator_params(self) -> OscillatorParams:
        return OscillatorParams(
            f_c=self.f_c_hz,
            beta1=self.beta1,
            beta2=self.beta2,
            A_dBc=self.A_dBc,
            sigma_init_ppm=self.sigma_init_ppm,
            T=self.T_s,
            f_s=self.f_s_hz,
            snr_linear=snr_db_to_linear(self.snr_db),
        )

    def with_overrides(self, **kw) -> "ScenarioConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        if "algorithm" in kw and "em_mode" not in kw:
            kw["em_mode"] = None
        return replace(self, **kw)

    def noiseless(self) -> "ScenarioConfig":
        """Same scenario with drift, jitter and estimation noise disabled."""
        return replace(self, beta1=0.0, beta2=0.0, A_dBc=-math.inf, snr_db=math.inf)

    def to_dict(self) -> dict:
        return asdict(self)


def default_em_mode(algorithm: str) -> str:
    return "em" if algorithm.startswith("em_kf") else "genie"


_FIELD_TYPES = {f.name: f.type for f in fields(ScenarioConfig)}


def _coerce(key: str, value):
    kind = _FIELD_TYPES[key]
    if value is None:
        return None
    if kind == "bool":
        if isinstance(value, str):
            return value.lower() in ("1", "true", "yes", "on")
        return bool(value)
    if kind == "int":
        return int(value)
    if kind == "float":
        return float(value)
    return str(value)


def load_config(path) -> ScenarioConfig:
    """Read a flat TOML file of ``ScenarioConfig`` keys."""
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    unknown = set(raw) - set(_FIELD_TYPES)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return ScenarioConfig(**{k: _coerce(k, v) for k, v in raw.items()})


def dump_config(cfg: ScenarioConfig) -> str:
    """Serialize to flat TOML (``None`` values are omitted)."""
    lines = []
    for key, value in cfg.to_dict().items():
        if value is None:
            continue
        if isinstance(value, bool):
            text = "true" if value else "false"
        elif isinstance(value, str):
            text = f'"{value}"'
        elif isinstance(value, float) and math.isinf(value):
            text = "inf" if value > 0 else "-inf"
        else:
            text = repr(value)
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"


PRESETS = ("fig1a", "fig1b", "fig1c", "fig2a", "fig2b", "fig2c",
           "fig3", "fig4", "fig5", "fig6")

_PRESET_TRIALS = 1000


def preset(name: str) -> list[ScenarioConfig]:
    """Scenario(s) behind one named preset, at 1000 trials per point.

    The single-trace presets (fig1*, fig2*) return one config; the sweeps return several.
    """
    base = ScenarioConfig(n_iterations=100, n_trials=_PRESET_TRIALS)
    trace = {"a": (20, 0.0), "b": (100, 0.0), "c": (100, 30.0)}
    if name[:4] in ("fig1", "fig2") and len(name) == 5 and name[4] in trace:
        n, snr = trace[name[4]]
        return [replace(base, name=name, algorithm="psfpc", n_nodes=n,
                        connectivity=0.2, snr_db=snr, n_trials=1)]
    if name == "fig3":
        out = []
        for algo in ("psfpc", "dfpc"):
            for n in (20, 60, 100):
                for c in (0.2, 0.3, 0.4, 0.5):
                    out.append(replace(base, name=f"fig3_{algo}_N{n}_c{c}", algorithm=algo,
                                       n_nodes=n, connectivity=c, directed=algo == "psfpc"))
        return out
    if name == "fig4":
        out = []
        for algo in ("psfpc", "dfpc"):
            for n in (20, 100):
                for c in (0.2, 0.5):
                    out.append(replace(base, name=f"fig4_{algo}_N{n}_c{c}", algorithm=algo,
                                       n_nodes=n, connectivity=c, directed=algo == "psfpc"))
        return out
    if name == "fig5":
        out = []
        variants = (("em_kf_psfpc", "em"), ("kf_psfpc", "naive"), ("kf_psfpc", "genie"))
        for case in ("poor_a", "good_b"):
            for algo, mode in variants:
                for n in (20, 40):
                    out.append(replace(base, name=f"fig5_{case}_{mode}_N{n}", algorithm=algo,
                                       em_mode=mode, em_init_case=case, n_nodes=n,
                                       connectivity=0.2))
        return out
    if name == "fig6":
        out = []
        variants = (("em_kf_psfpc", "em", True), ("kf_psfpc", "naive", True),
                    ("kf_psfpc", "genie", True), ("em_kf_dfpc", "em", False),
                    ("kf_dfpc", "naive", False), ("kf_dfpc", "genie", False))
        for algo, mode, directed in variants:
            for c in (0.2, 0.5):
                for n in (20, 40, 60, 80, 100):
                    out.append(replace(base, name=f"fig6_{algo}_{mode}_N{n}_c{c}",
                                       algorithm=algo, em_mode=mode, em_init_case="good_b",
                                       n_nodes=n, connectivity=c, directed=directed))
        return out
    raise ConfigError(f"unknown preset {name!r}; choose from {PRESETS}")
