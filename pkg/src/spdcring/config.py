"""Run configuration: YAML file plus command-line overrides.

Keys carry their units in the name. Scaled times are in units of the
inverse pump half-linewidth.
"""

from __future__ import annotations

import copy
from dataclasses import replace

import yaml

from .model import C_LIGHT, ConfigError, Resonance, SystemParams

DEFAULTS = {
    "pump_energy_pJ": 0.09,
    "energies_pJ": [0.001, 0.003, 0.01, 0.03, 0.1],
    "pulse_duration_ns": 0.5,
    "wavelength_signal_nm": 1557.85,
    "wavelength_idler_nm": 1562.45,
    "wavelength_pump_nm": 780.0,
    "eta_signal": 0.95,
    "eta_idler": 0.95,
    "eta_pump": 0.5,
    "q_int_signal": 1.0e6,
    "q_int_idler": 1.0e6,
    "q_int_pump": 1.0e5,
    "group_velocity_m_per_s": C_LIGHT / 3.2,
    "radius_um": 30.0,
    "a_eff_um2": 0.56,
    "chi2_pm_per_V": 220.0,
    "n_k": 81,
    "half_span_linewidths": 8.0,
    "n_k_pump": 121,
    "half_span_pump_linewidths": 3.0,
    "start_pulse_durations": -5.0,
    "stop_scaled": 30.0,
    "gauss_dt_scaled": 0.02,
    "nongauss_dt_scaled": 0.1,
    "fock_cutoff": 16,
    "supermodes": [2, 1],
    "theta_pi": 0.67,
    "phi_pi": 2.12,
    "scan_theta_points": 0,
    "scan_phi_points": 0,
    "n_singular": 30,
    "chi_points": 64,
    "chi_extent": 6.0,
    "wigner_points": 121,
    "wigner_extent": 3.0,
    "threads": 1,
}


def load(path=None) -> dict:
    """Defaults updated with the YAML file at ``path``.

    Raises:
        ConfigError: unreadable file, non-mapping content or unknown keys.
    """
    cfg = copy.deepcopy(DEFAULTS)
    if path is None:
        return cfg
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a mapping")
    return merge(cfg, data)


def merge(cfg: dict, updates: dict) -> dict:
    unknown = sorted(set(updates) - set(DEFAULTS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    out = dict(cfg)
    out.update({k: v for k, v in updates.items() if v is not None})
    return out


def parse_list(text: str, kind=float, length=None) -> list:
    try:
        vals = [kind(v) for v in str(text).replace(";", ",").split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse list {text!r}") from exc
    if length is not None and len(vals) != length:
        raise ConfigError(f"expected {length} values in {text!r}")
    return vals


def params(cfg: dict, energy_pJ=None) -> SystemParams:
    """Build :class:`SystemParams` from a resolved configuration."""
    try:
        v = float(cfg["group_velocity_m_per_s"])
        sig = Resonance(float(cfg["wavelength_signal_nm"]), float(cfg["q_int_signal"]),
                        float(cfg["eta_signal"]), v, int(cfg["n_k"]),
                        float(cfg["half_span_linewidths"]))
        idl = replace(sig, wavelength_nm=float(cfg["wavelength_idler_nm"]),
                      q_int=float(cfg["q_int_idler"]), escape_efficiency=float(cfg["eta_idler"]))
        pump = Resonance(float(cfg["wavelength_pump_nm"]), float(cfg["q_int_pump"]),
                         float(cfg["eta_pump"]), v, int(cfg["n_k_pump"]),
                         float(cfg["half_span_pump_linewidths"]))
        energy = cfg["pump_energy_pJ"] if energy_pJ is None else energy_pJ
        return SystemParams(
            signal=sig, idler=idl, pump=pump,
            chi2=float(cfg["chi2_pm_per_V"]) * 1e-12,
            radius=float(cfg["radius_um"]) * 1e-6,
            a_eff=float(cfg["a_eff_um2"]) * 1e-12,
            pump_energy=float(energy) * 1e-12,
            pulse_duration=float(cfg["pulse_duration_ns"]) * 1e-9,
            t0_pulse=float(cfg["start_pulse_durations"]),
            t1_gamma=float(cfg["stop_scaled"]),
        )
    except (TypeError, ValueError, KeyError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid configuration value: {exc}") from exc


def dump(cfg: dict) -> str:
    return yaml.safe_dump(cfg, sort_keys=True, default_flow_style=None)
