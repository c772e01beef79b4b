"""Physical model of a lossy microring pumped by a Gaussian pulse.

Builds the discretized three-wave coupling between signal, idler and pump
asymptotic modes. Every frequency handed to the dynamics is expressed in
units of the pump half-linewidth, and every time in units of its inverse.

Mode ordering for signal and idler is ``[actual channel, phantom channel]``,
each block sorted by detuning. The pump carries only its actual channel.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy import constants

HBAR = constants.hbar
C_LIGHT = constants.c
EPS0 = constants.epsilon_0


class ConfigError(ValueError):
    """Raised when physical or numerical parameters are inconsistent."""


@dataclass(frozen=True)
class Resonance:
    """One ring resonance and the uniform grid used to resolve it.

    Args:
        wavelength_nm: vacuum wavelength of the resonance center.
        q_int: intrinsic quality factor from scattering loss.
        escape_efficiency: fraction of the loaded decay going to the bus.
        group_velocity: bus group velocity in m/s. Observables do not
            depend on it; it only sets the wavenumber axis.
        n_k: number of grid points per channel.
        half_span: half-width of the grid in units of the half-linewidth.
        q_load: optional loaded quality factor. When given it overrides
            ``(1 - escape_efficiency) * q_int``, which is how a lossless
            resonance (escape efficiency 1) is specified.
    """

    wavelength_nm: float
    q_int: float
    escape_efficiency: float
    group_velocity: float = C_LIGHT / 3.2
    n_k: int = 41
    half_span: float = 8.0
    q_load: Optional[float] = None

    def __post_init__(self):
        if not 0.0 < self.escape_efficiency <= 1.0:
            raise ConfigError("escape efficiency must lie in (0, 1]")
        if self.n_k < 1:
            raise ConfigError("n_k must be positive")
        if self.half_span <= 0:
            raise ConfigError("half_span must be positive")
        if self.group_velocity <= 0:
            raise ConfigError("group velocity must be positive")
        if self.q_load is None:
            if self.escape_efficiency >= 1.0 or not np.isfinite(self.q_int):
                raise ConfigError("a lossless resonance needs an explicit q_load")
            if self.q_int <= 0:
                raise ConfigError("q_int must be positive")
        elif self.q_load <= 0:
            raise ConfigError("q_load must be positive")

    @property
    def omega(self) -> float:
        """Angular frequency of the resonance center (rad/s)."""
        return 2 * np.pi * C_LIGHT / (self.wavelength_nm * 1e-9)

    @property
    def loaded_q(self) -> float:
        if self.q_load is not None:
            return self.q_load
        return (1.0 - self.escape_efficiency) * self.q_int

    @property
    def half_linewidth(self) -> float:
        """Half-linewidth in rad/s."""
        return self.omega / (2 * self.loaded_q)

    def detunings(self) -> np.ndarray:
        """Grid of detunings in rad/s, symmetric about the resonance."""
        gam = self.half_linewidth
        if self.n_k == 1:
            return np.zeros(1)
        return np.linspace(-self.half_span * gam, self.half_span * gam, self.n_k)

    def frequency_step(self) -> float:
        """Spacing of the detuning grid in rad/s."""
        if self.n_k == 1:
            return 2 * self.half_span * self.half_linewidth
        return 2 * self.half_span * self.half_linewidth / (self.n_k - 1)

    def wavenumber_offsets(self) -> np.ndarray:
        """Offsets ``k - K`` of the grid in 1/m."""
        return self.detunings() / self.group_velocity

    def wavenumber_step(self) -> float:
        return self.frequency_step() / self.group_velocity


@dataclass(frozen=True)
class SystemParams:
    """Complete description of one simulation scenario.

    Lengths are SI unless the name says otherwise. ``t0_pulse`` is the start
    time in units of the pulse duration and ``t1_gamma`` the stop time in
    units of the inverse pump half-linewidth.
    """

    signal: Resonance
    idler: Resonance
    pump: Resonance
    chi2: float = 220e-12
    radius: float = 30e-6
    a_eff: float = 0.56e-12
    pump_energy: float = 0.09e-12
    pulse_duration: float = 0.5e-9
    t0_pulse: float = -5.0
    t1_gamma: float = 30.0
    energy_mismatch: float = 0.0
    coupling_scale: float = 1.0 / (2 * np.pi) ** 2

    def __post_init__(self):
        if self.pump_energy < 0:
            raise ConfigError("pump energy must be non-negative")
        if self.pulse_duration <= 0:
            raise ConfigError("pulse duration must be positive")
        if self.t1_time <= self.t0_time:
            raise ConfigError("stop time must follow start time")
        for name in ("chi2", "radius", "a_eff"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")

    @property
    def gamma_p(self) -> float:
        """Pump half-linewidth in rad/s; the unit of all scaled rates."""
        return self.pump.half_linewidth

    @property
    def time_unit(self) -> float:
        """Seconds per unit of scaled time."""
        return 1.0 / self.gamma_p

    @property
    def t0_time(self) -> float:
        return self.t0_pulse * self.pulse_duration * self.gamma_p

    @property
    def t1_time(self) -> float:
        return self.t1_gamma

    @property
    def pump_photons(self) -> float:
        return self.pump_energy / (HBAR * self.pump.omega)

    def nominal_mismatch(self) -> float:
        """Energy mismatch ``omega_S + omega_I - omega_P`` from the wavelengths (rad/s)."""
        return self.signal.omega + self.idler.omega - self.pump.omega

    def with_energy(self, energy: float) -> "SystemParams":
        return replace(self, pump_energy=energy)

    def with_escape(self, eta: float, q_int: Optional[float] = None) -> "SystemParams":
        """Same system with new signal/idler escape efficiency (and intrinsic Q)."""
        kw = {"escape_efficiency": eta}
        if q_int is not None:
            kw["q_int"] = q_int
        return replace(self, signal=replace(self.signal, **kw), idler=replace(self.idler, **kw))


def default_params(**overrides) -> SystemParams:
    """Baseline InGaP ring: overcoupled signal/idler, critically coupled pump."""
    signal = Resonance(1557.85, 1e6, 0.95, n_k=overrides.pop("n_k", 81),
                       half_span=overrides.pop("half_span", 8.0))
    idler = replace(signal, wavelength_nm=1562.45)
    pump = Resonance(780.0, 1e5, 0.5, n_k=overrides.pop("n_k_pump", 121),
                     half_span=overrides.pop("half_span_pump", 3.0))
    return SystemParams(signal=signal, idler=idler, pump=pump, **overrides)


def coupling_prefactor(p: SystemParams) -> float:
    """Nonlinear prefactor in m^{3/2}/s multiplying the three enhancement factors."""
    w = p.signal.omega * p.idler.omega * p.pump.omega
    return p.chi2 * p.radius * np.sqrt(HBAR * w / (4 * np.pi * EPS0 * p.a_eff))


def field_enhancement(res: Resonance, k_offset, radius: float, sign: int, channel_weight: float):
    """Lorentzian field-enhancement factor on a wavenumber grid.

    ``sign`` selects the ``+`` or ``-`` branch of the imaginary part and
    ``channel_weight`` is the escape efficiency for the actual channel or its
    complement for the phantom channel.
    """
    v = res.group_velocity
    gam = res.half_linewidth
    amp = np.sqrt(v * gam * channel_weight / (np.pi * radius))
    return amp / (v * (-np.asarray(k_offset)) + sign * 1j * gam)


def initial_pump(p: SystemParams) -> np.ndarray:
    """Discrete coherent amplitudes of the incoming pump pulse."""
    res = p.pump
    vt = res.group_velocity * p.pulse_duration
    kk = res.wavenumber_offsets()
    phi = np.sqrt(vt / np.sqrt(np.pi)) * np.exp(-0.5 * (vt * kk) ** 2)
    return np.sqrt(res.wavenumber_step()) * np.sqrt(p.pump_photons) * phi.astype(complex)


@dataclass
class CouplingTensor:
    """Rank-one three-wave coupling with its interaction-picture phases.

    The coupling at time ``t`` is ``scale * a(t) (x) b(t) (x) c(t)`` with
    ``a = conj(fs) exp(i ws t)``, ``b = conj(fi) exp(i wi t)`` and
    ``c = fp exp(-i wp t)``. All rates are in units of the pump half-linewidth.
    The energy mismatch phase is carried by the signal factor.
    """

    scale: float
    fs: np.ndarray
    fi: np.ndarray
    fp: np.ndarray
    ws: np.ndarray
    wi: np.ndarray
    wp: np.ndarray
    mismatch: float = 0.0

    @property
    def shape(self):
        return (self.fs.size, self.fi.size, self.fp.size)

    def factors(self, t: float):
        a = np.conj(self.fs) * np.exp(1j * (self.ws + self.mismatch) * t)
        b = np.conj(self.fi) * np.exp(1j * self.wi * t)
        c = self.fp * np.exp(-1j * self.wp * t)
        return a, b, c

    def tensor(self, t: float = 0.0) -> np.ndarray:
        """Dense coupling array; only sensible for small grids."""
        a, b, c = self.factors(t)
        return self.scale * np.einsum("i,j,k->ijk", a, b, c)

    def pump_drive(self, x: np.ndarray, t: float) -> complex:
        return self.scale * (self.factors(t)[2] @ x)

    def z_times(self, x, t, mat):
        """``Z(t) @ mat`` with ``Z = sum_k coupling[..., k] x_k``."""
        a, b, c = self.factors(t)
        return np.outer(self.scale * (c @ x) * a, b @ mat)

    def zt_times(self, x, t, mat):
        a, b, c = self.factors(t)
        return np.outer(self.scale * (c @ x) * b, a @ mat)

    def delta(self, w_si, v_ii, t):
        """Pump source term contracted with ``w_si @ v_ii.T``."""
        a, b, c = self.factors(t)
        left = np.conj(a) @ w_si
        right = v_ii.T @ np.conj(b)
        return self.scale * np.conj(c) * (left @ right)

    def conj_factors(self, t: float):
        a, b, c = self.factors(t)
        return np.conj(a), np.conj(b), np.conj(c)


@dataclass
class DenseCoupling:
    """General (not necessarily rank-one) coupling, mostly for small checks.

    ``base[i, j, k] * exp(i (ws_i + wi_j - wp_k) t)`` in scaled units.
    """

    base: np.ndarray
    ws: np.ndarray
    wi: np.ndarray
    wp: np.ndarray

    @property
    def shape(self):
        return self.base.shape

    def tensor(self, t: float = 0.0) -> np.ndarray:
        ph = np.exp(1j * t * (self.ws[:, None, None] + self.wi[None, :, None] - self.wp[None, None, :]))
        return self.base * ph

    def _z(self, x, t):
        return np.tensordot(self.tensor(t), x, axes=([2], [0]))

    def z_times(self, x, t, mat):
        return self._z(x, t) @ mat

    def zt_times(self, x, t, mat):
        return self._z(x, t).T @ mat

    def delta(self, w_si, v_ii, t):
        m = w_si @ v_ii.T
        return np.einsum("ijk,ij->k", np.conj(self.tensor(t)), m)


@dataclass
class ModelGrid:
    """Detuning grids (rad/s) for the three resonances."""

    signal: np.ndarray
    idler: np.ndarray
    pump: np.ndarray
    k_signal: np.ndarray = field(default=None)
    k_idler: np.ndarray = field(default=None)
    k_pump: np.ndarray = field(default=None)


def build_grid(p: SystemParams) -> ModelGrid:
    return ModelGrid(
        p.signal.detunings(), p.idler.detunings(), p.pump.detunings(),
        p.signal.wavenumber_offsets(), p.idler.wavenumber_offsets(), p.pump.wavenumber_offsets(),
    )


def _channel_factors(res: Resonance, radius: float, sign: int) -> np.ndarray:
    """sqrt(dk) * F on the stacked [actual, phantom] grid."""
    kk = res.wavenumber_offsets()
    root = np.sqrt(res.wavenumber_step())
    ac = root * field_enhancement(res, kk, radius, sign, res.escape_efficiency)
    ph = root * field_enhancement(res, kk, radius, sign, 1.0 - res.escape_efficiency)
    return np.concatenate([ac, ph])


def build_coupling(p: SystemParams) -> CouplingTensor:
    """Discretized coupling ``(dk)^{3/2} g F*_S+ F*_I+ F_P-`` in scaled units."""
    gp = p.gamma_p
    scale = p.coupling_scale * coupling_prefactor(p) / gp
    fs = _channel_factors(p.signal, p.radius, +1)
    fi = _channel_factors(p.idler, p.radius, +1)
    kp = p.pump.wavenumber_offsets()
    fp = np.sqrt(p.pump.wavenumber_step()) * field_enhancement(
        p.pump, kp, p.radius, -1, p.pump.escape_efficiency)
    ws = np.tile(p.signal.detunings(), 2) / gp
    wi = np.tile(p.idler.detunings(), 2) / gp
    wp = p.pump.detunings() / gp
    return CouplingTensor(scale, fs, fi, fp, ws, wi, wp,
                          mismatch=p.energy_mismatch / gp)
