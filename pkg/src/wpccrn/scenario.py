"""Network geometry, fading draws and the per-realization coefficients.

All internal quantities are linear units (Watts, Watts/Hz, linear SNR gap).
Energies handed to the solvers are normalized by eta*h_hi, so the
energy-neutrality budget of SU i is (P_e + theta_i) * t_e.
"""

import math
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

CHANNEL_STREAM = 0
SELECTION_STREAM = 1


class ConfigError(ValueError):
    """Bad configuration value or key."""


def dbm_to_watt(dbm):
    return 10.0 ** (dbm / 10.0) * 1e-3


def watt_to_dbm(w):
    return 10.0 * math.log10(w / 1e-3)


def db_to_linear(db):
    return 10.0 ** (db / 10.0)


@dataclass(frozen=True)
class ScenarioConfig:
    """Static network parameters. Defaults are the reference simulation setup."""

    n_su: int = 4
    p_primary: float = dbm_to_watt(20.0)
    p_hap: float = dbm_to_watt(20.0)
    noise: float = dbm_to_watt(-70.0)
    eta: float = 0.5
    snr_gap: float = db_to_linear(8.8)
    pathloss_exp: float = 3.0
    d_pt_pr: float = 50.0
    su_radius: float = 10.0
    target_primary_rate: float = 1.5
    rng_seed: int = 0
    min_distance: float = 0.5  # clamp against singular path loss

    def __post_init__(self):
        if int(self.n_su) != self.n_su or self.n_su < 1:
            raise ConfigError("n_su must be an integer >= 1")
        for name in ("p_primary", "p_hap", "noise", "d_pt_pr", "su_radius", "min_distance"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ConfigError(f"{name} must be positive, got {v!r}")
        if not (0 < self.eta <= 1):
            raise ConfigError("eta must lie in (0, 1]")
        if not self.snr_gap >= 1:
            raise ConfigError("snr_gap must be >= 1 (linear)")
        if not self.pathloss_exp > 0:
            raise ConfigError("pathloss_exp must be positive")
        if not self.target_primary_rate >= 0:
            raise ConfigError("target_primary_rate must be >= 0")

    @property
    def gamma_noise(self):
        """Gamma * N_0, the common SNR denominator."""
        return self.snr_gap * self.noise

    def with_overrides(self, **kw):
        return replace(self, **kw)

    def to_dict(self):
        return asdict(self)


_FIELD_TYPES = {f.name: f.type for f in fields(ScenarioConfig)}
_DBM_KEYS = {"p_primary_dbm": "p_primary", "p_hap_dbm": "p_hap", "noise_dbm": "noise"}
_DB_KEYS = {"snr_gap_db": "snr_gap"}


def parse_assignment(key, raw):
    """Map one `key = value` pair to (field, linear value)."""
    key = key.strip()
    raw = str(raw).strip()
    try:
        if key in _DBM_KEYS:
            return _DBM_KEYS[key], dbm_to_watt(float(raw))
        if key in _DB_KEYS:
            return _DB_KEYS[key], db_to_linear(float(raw))
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown config key: {key}")
        if key in ("n_su", "rng_seed"):
            v = float(raw)
            if v != int(v):
                raise ConfigError(f"{key} must be an integer, got {raw}")
            return key, int(v)
        return key, float(raw)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc


def parse_config_text(text, base=None):
    """Flat `key = value` lines, `#` comments; powers may use the _dbm suffix."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        k, v = line.split("=", 1)
        name, val = parse_assignment(k, v)
        values[name] = val
    base = base or ScenarioConfig()
    return replace(base, **values)


def load_config(path=None, overrides=()):
    cfg = ScenarioConfig()
    if path is not None:
        with open(path) as fh:
            cfg = parse_config_text(fh.read(), cfg)
    extra = {}
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must be key=value: {item}")
        name, val = parse_assignment(*item.split("=", 1))
        extra[name] = val
    return replace(cfg, **extra)


def realization_rng(seed, index, stream=CHANNEL_STREAM):
    """Philox generator keyed by (seed, stream, index).

    Realization k always gets the same substream, whatever the worker layout.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream), int(index)))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class Geometry:
    """Link distances in meters; SU vectors have length n_su."""

    d_p: float  # PT-PR
    d_ps: np.ndarray  # PT-SU_i
    d_sp: np.ndarray  # SU_i-PR
    d_hs: np.ndarray  # HAP-SU_i (both directions)
    su_xy: np.ndarray


@dataclass(frozen=True)
class ChannelState:
    """One fading realization of all five gain families (fading x path loss)."""

    h_p: float
    h_ps: np.ndarray
    h_sp: np.ndarray
    h_hs: np.ndarray
    h_sh: np.ndarray

    def __post_init__(self):
        n = len(self.h_ps)
        for name in ("h_ps", "h_sp", "h_hs", "h_sh"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (n,):
                raise ValueError(f"{name} must have length {n}")
            if np.any(~(arr > 0)):
                raise ValueError(f"{name} must be positive")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not self.h_p > 0:
            raise ValueError("h_p must be positive")

    @property
    def n_su(self):
        return len(self.h_ps)


@dataclass(frozen=True)
class DerivedCoefficients:
    gamma_p: float
    gamma_ip: np.ndarray
    gamma_ih: np.ndarray
    theta: np.ndarray
    q1: float
    q2: float
    budget: np.ndarray = field(repr=False)  # P_e + theta_i
    q2_each: np.ndarray = field(repr=False)  # ln(1 + h_pi P_p / (Gamma N_0))


def place_users(config, rng):
    """PT and PR on a line, HAP at the midpoint, SUs uniform in a disk."""
    n = config.n_su
    half = 0.5 * config.d_pt_pr
    r = config.su_radius * np.sqrt(rng.random(n))
    phi = 2.0 * np.pi * rng.random(n)
    xy = np.column_stack([r * np.cos(phi), r * np.sin(phi)])
    pt = np.array([-half, 0.0])
    pr = np.array([half, 0.0])
    dmin = config.min_distance
    d_hs = np.maximum(np.hypot(xy[:, 0], xy[:, 1]), dmin)
    d_ps = np.maximum(np.hypot(*(xy - pt).T), dmin)
    d_sp = np.maximum(np.hypot(*(xy - pr).T), dmin)
    return Geometry(d_p=config.d_pt_pr, d_ps=d_ps, d_sp=d_sp, d_hs=d_hs, su_xy=xy)


def draw_channels(geometry, config, rng):
    """Unit-mean exponential fading times d^-beta, independent per link."""
    b = config.pathloss_exp
    n = len(geometry.d_ps)
    fade = rng.exponential(1.0, size=1 + 4 * n)
    h_p = fade[0] * geometry.d_p ** (-b)
    f = fade[1:].reshape(4, n)
    return ChannelState(
        h_p=float(h_p),
        h_ps=f[0] * geometry.d_ps ** (-b),
        h_sp=f[1] * geometry.d_sp ** (-b),
        h_hs=f[2] * geometry.d_hs ** (-b),
        h_sh=f[3] * geometry.d_hs ** (-b),
    )


def generate_realization(config, index, seed=None):
    rng = realization_rng(config.rng_seed if seed is None else seed, index)
    return draw_channels(place_users(config, rng), config, rng)


def derive_coefficients(channels, config, decoding_cutoff=None):
    """gamma_p, gamma_ip, gamma_ih, theta, Q1 and Q2 for the k-th largest h_pi."""
    n = channels.n_su
    k = n if decoding_cutoff is None else int(decoding_cutoff)
    if not 1 <= k <= n:
        raise ValueError(f"decoding_cutoff must be in [1, {n}]")
    gn = config.gamma_noise
    gamma_p = channels.h_p * config.p_primary / gn
    gamma_ip = config.eta * channels.h_hs * channels.h_sp / gn
    gamma_ih = config.eta * channels.h_hs * channels.h_sh / gn
    theta = config.p_primary * channels.h_ps / channels.h_hs
    q2_each = np.log1p(channels.h_ps * config.p_primary / gn)
    q2 = float(np.sort(q2_each)[::-1][k - 1])
    return DerivedCoefficients(
        gamma_p=float(gamma_p),
        gamma_ip=gamma_ip,
        gamma_ih=gamma_ih,
        theta=theta,
        q1=float(math.log1p(gamma_p)),
        q2=q2,
        budget=config.p_hap + theta,
        q2_each=q2_each,
    )


def harvested_energy(i, t_e, channels, config):
    """eta (P_e h_hi + P_p h_pi) t_e, in Joules."""
    return config.eta * (config.p_hap * channels.h_hs[i] + config.p_primary * channels.h_ps[i]) * t_e


def primary_coop_rate(allocation, channels, config, decoding_set=None):
    """t_e ln(1+gamma_p) + t_0 ln(1 + gamma_p + sum_{S_D} gamma_ip E_ip / t_0)."""
    c = derive_coefficients(channels, config)
    members = range(channels.n_su) if decoding_set is None else _members(decoding_set)
    relay = sum(c.gamma_ip[i] * allocation.e_sp[i] for i in members)
    rate = allocation.t_e * c.q1
    if allocation.t_0 > 0:
        rate += allocation.t_0 * math.log1p(c.gamma_p + relay / allocation.t_0)
    return rate


def _members(decoding_set):
    return getattr(decoding_set, "members", decoding_set)


def su_rate(t_i, e_ih, gamma_ih):
    """t ln(1 + gamma e / t); zero at t = 0 (perspective limit)."""
    if t_i <= 0:
        return 0.0
    return t_i * math.log1p(gamma_ih * e_ih / t_i)


def channels_from_coefficients(gamma_p, gamma_ip, gamma_ih, theta, p_hap, target_primary_rate,
                               q2=None, hap_gain=1e4):
    """Build (config, channels) that reproduce given solver coefficients.

    Uses Gamma = N_0 = eta = P_p = 1 and a common h_hi = hap_gain, which makes
    Q2_i = ln(1 + theta_i * hap_gain) unless explicit q2 values are given
    (then h_pi is scaled and theta is matched through h_hi per SU).
    """
    gamma_ip = np.asarray(gamma_ip, float)
    gamma_ih = np.asarray(gamma_ih, float)
    theta = np.asarray(theta, float)
    n = len(gamma_ip)
    cfg = ScenarioConfig(n_su=n, p_primary=1.0, p_hap=float(p_hap), noise=1.0, eta=1.0,
                         snr_gap=1.0, target_primary_rate=float(target_primary_rate))
    if q2 is None:
        h_hs = np.full(n, float(hap_gain))
        h_ps = theta * h_hs
    else:
        h_ps = np.expm1(np.broadcast_to(np.asarray(q2, float), (n,)))
        h_hs = h_ps / theta
    ch = ChannelState(h_p=float(gamma_p), h_ps=h_ps, h_sp=gamma_ip / h_hs,
                      h_hs=h_hs, h_sh=gamma_ih / h_hs)
    return cfg, ch
