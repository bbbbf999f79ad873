"""
Time-varying, frequency-selective channel generators.

Two families are provided, both evaluated through the same ray-sum sampler:

* tapped delay line (TDL) channels where every tap is an independent
  sum-of-rays Jakes process, and
* clustered delay line (CDL) channels built from a cluster table, with
  per-ray arrival/departure geometry, array responses, polarization coupling
  and a Doppler term that depends on the UE travel direction.

A sampler holds all of its randomness; evaluating it is a pure function of
time and frequency.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0

# TR 38.901 Table 7.5-3, ray offset angles within a cluster for 1 deg rms spread
DEFAULT_RAY_OFFSETS = (
    0.0447, -0.0447, 0.1413, -0.1413, 0.2492, -0.2492, 0.3715, -0.3715,
    0.5129, -0.5129, 0.6797, -0.6797, 0.8844, -0.8844, 1.1481, -1.1481,
    1.5195, -1.5195, 2.1551, -2.1551,
)


class CdlTableError(ValueError):
    """Raised for a missing or malformed CDL table file."""


def kmh_to_ms(speed_kmh: float) -> float:
    return speed_kmh / 3.6


def max_doppler(speed_ms: float, carrier_hz: float) -> float:
    """Maximum Doppler shift ``v * f_c / c`` in Hz."""
    return speed_ms * carrier_hz / SPEED_OF_LIGHT


@dataclass(frozen=True)
class VelocityVector:
    """UE velocity. ``elevation`` is measured from the horizontal plane."""

    speed: float
    azimuth: float
    elevation: float = 0.0

    def __post_init__(self):
        if not self.speed >= 0:
            raise ValueError(f"speed must be non-negative, got {self.speed}")
        if not (math.isfinite(self.azimuth) and math.isfinite(self.elevation)):
            raise ValueError("velocity angles must be finite")

    @classmethod
    def from_kmh(cls, speed_kmh: float, azimuth_deg: float = 0.0, elevation_deg: float = 0.0):
        return cls(kmh_to_ms(speed_kmh), math.radians(azimuth_deg), math.radians(elevation_deg))

    def vector(self) -> np.ndarray:
        ce = math.cos(self.elevation)
        return self.speed * np.array([
            ce * math.cos(self.azimuth), ce * math.sin(self.azimuth), math.sin(self.elevation)
        ])


@dataclass(frozen=True)
class TapProfile:
    """Power delay profile of a TDL channel; powers are normalized to sum 1."""

    taps: tuple

    def __post_init__(self):
        taps = tuple((float(d), float(p)) for d, p in self.taps)
        if not taps:
            raise ValueError("tap profile needs at least one tap")
        delays = np.array([d for d, _ in taps])
        powers = np.array([p for _, p in taps])
        if np.any(delays < 0) or np.any(np.diff(delays) <= 0):
            raise ValueError("tap delays must be non-negative and strictly increasing")
        if np.any(powers <= 0) or not np.isfinite(powers.sum()):
            raise ValueError("tap powers must be positive and finite")
        total = powers.sum()
        object.__setattr__(self, "taps", tuple((d, p / total) for d, p in taps))

    @property
    def delays(self) -> np.ndarray:
        return np.array([d for d, _ in self.taps])

    @property
    def powers(self) -> np.ndarray:
        return np.array([p for _, p in self.taps])

    @classmethod
    def equal_power(cls, num_taps: int, spacing: float) -> "TapProfile":
        return cls(tuple((k * spacing, 1.0) for k in range(num_taps)))

    @classmethod
    def exponential(cls, rms_delay_spread: float, num_taps: int, spacing: float) -> "TapProfile":
        delays = np.arange(num_taps) * spacing
        return cls(tuple(zip(delays, np.exp(-delays / rms_delay_spread))))


@dataclass(frozen=True)
class CdlTable:
    """Cluster table of a CDL model.

    Angles are in degrees, delays are normalized (scaled by the target delay
    spread when the channel is built).
    """

    normalized_delay: np.ndarray
    power_db: np.ndarray
    aod: np.ndarray
    aoa: np.ndarray
    zod: np.ndarray
    zoa: np.ndarray
    c_asd: float
    c_asa: float
    c_zsd: float
    c_zsa: float
    cross_polar_ratio: float
    ray_offsets: tuple = DEFAULT_RAY_OFFSETS

    def __post_init__(self):
        if len(self.ray_offsets) != 20:
            raise CdlTableError(f"expected 20 ray offsets, got {len(self.ray_offsets)}")
        n = len(self.normalized_delay)
        if n < 1:
            raise CdlTableError("CDL table has no clusters")
        for name in ("power_db", "aod", "aoa", "zod", "zoa"):
            if len(getattr(self, name)) != n:
                raise CdlTableError(f"column {name} has wrong length")
        if np.any(self.normalized_delay < 0) or self.normalized_delay.min() != 0:
            raise CdlTableError("normalized delays must be non-negative and start at 0")

    @property
    def num_clusters(self) -> int:
        return len(self.normalized_delay)

    @property
    def powers(self) -> np.ndarray:
        p = 10 ** (self.power_db / 10)
        return p / p.sum()

    def rms_delay_spread(self) -> float:
        return rms_spread(self.normalized_delay, self.powers)


_SCALAR_KEYS = {"c_asd", "c_asa", "c_zsd", "c_zsa", "xpr_db", "ray_offsets"}


def load_cdl_table(path) -> CdlTable:
    """Parse a CDL table file (see ``data/cdl_a.txt`` for the schema)."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise CdlTableError(f"cannot read CDL table {path}: {exc}") from None
    rows, scalars = [], {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" in line:
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in _SCALAR_KEYS:
                raise CdlTableError(f"{path}:{lineno}: unknown key {key!r}")
            if key in scalars:
                raise CdlTableError(f"{path}:{lineno}: duplicate key {key!r}")
            try:
                if key == "ray_offsets":
                    scalars[key] = tuple(float(v) for v in value.split(","))
                else:
                    scalars[key] = float(value)
            except ValueError:
                raise CdlTableError(f"{path}:{lineno}: bad value for {key!r}") from None
            continue
        try:
            values = [float(v) for v in line.split()]
        except ValueError:
            raise CdlTableError(f"{path}:{lineno}: non-numeric cluster row") from None
        if len(values) != 6:
            raise CdlTableError(f"{path}:{lineno}: expected 6 columns, got {len(values)}")
        rows.append(values)
    missing = _SCALAR_KEYS - {"ray_offsets"} - scalars.keys()
    if missing:
        raise CdlTableError(f"{path}: missing keys {sorted(missing)}")
    if not rows:
        raise CdlTableError(f"{path}: no cluster rows")
    cols = np.array(rows).T
    return CdlTable(
        normalized_delay=cols[0], power_db=cols[1], aod=cols[2], aoa=cols[3],
        zod=cols[4], zoa=cols[5],
        c_asd=scalars["c_asd"], c_asa=scalars["c_asa"],
        c_zsd=scalars["c_zsd"], c_zsa=scalars["c_zsa"],
        cross_polar_ratio=scalars["xpr_db"],
        ray_offsets=scalars.get("ray_offsets", DEFAULT_RAY_OFFSETS),
    )


def cdl_a() -> CdlTable:
    """The CDL-A table shipped with the package."""
    with resources.as_file(resources.files("tdcp") / "data" / "cdl_a.txt") as p:
        return load_cdl_table(p)


@dataclass(frozen=True)
class AntennaArray:
    """Uniform planar array in the y-z plane, boresight along +x.

    Element order is polarization-major, then column, then row, i.e. element
    ``(p, col, row)`` has index ``p * rows * columns + col * rows + row``.
    """

    rows: int = 1
    columns: int = 1
    polarizations: int = 1
    horizontal_spacing: float = 0.5
    vertical_spacing: float = 0.5
    element_pattern: str = "isotropic"
    slants_deg: tuple = ()

    def __post_init__(self):
        if self.rows < 1 or self.columns < 1:
            raise ValueError("array needs at least one row and one column")
        if self.polarizations not in (1, 2):
            raise ValueError("polarizations must be 1 or 2")
        if self.horizontal_spacing <= 0 or self.vertical_spacing <= 0:
            raise ValueError("element spacings must be positive")
        if self.element_pattern not in ("isotropic", "directional"):
            raise ValueError(f"unknown element pattern {self.element_pattern!r}")
        if not self.slants_deg:
            slants = (45.0, -45.0) if self.polarizations == 2 else (0.0,)
            object.__setattr__(self, "slants_deg", slants)
        if len(self.slants_deg) != self.polarizations:
            raise ValueError("one slant angle per polarization required")

    @classmethod
    def base_station(cls, **kw) -> "AntennaArray":
        kw = {"rows": 2, "columns": 4, "polarizations": 2,
              "horizontal_spacing": 0.5, "vertical_spacing": 0.8, **kw}
        return cls(**kw)

    @classmethod
    def ue(cls, **kw) -> "AntennaArray":
        # co-located cross-polarized pair
        kw = {"rows": 1, "columns": 1, "polarizations": 2, "slants_deg": (0.0, 90.0), **kw}
        return cls(**kw)

    @property
    def elements_per_polarization(self) -> int:
        return self.rows * self.columns

    @property
    def num_elements(self) -> int:
        return self.polarizations * self.elements_per_polarization

    def positions(self) -> np.ndarray:
        """Element positions in wavelengths, shape (num_elements, 3)."""
        col, row = np.meshgrid(np.arange(self.columns), np.arange(self.rows), indexing="ij")
        yz = np.stack([col.ravel() * self.horizontal_spacing,
                       row.ravel() * self.vertical_spacing], axis=1)
        pos = np.zeros((self.elements_per_polarization, 3))
        pos[:, 1:] = yz
        return np.tile(pos, (self.polarizations, 1))

    def slants(self) -> np.ndarray:
        return np.repeat(np.radians(self.slants_deg), self.elements_per_polarization)

    def field(self, zenith_deg: np.ndarray, azimuth_deg: np.ndarray) -> np.ndarray:
        """Polarized field components, shape (num_elements, rays, 2) for (theta, phi)."""
        zen = np.asarray(zenith_deg, dtype=float)
        az = np.asarray(azimuth_deg, dtype=float)
        if self.element_pattern == "directional":
            # TR 38.901 Table 7.3-1 single element, 8 dBi peak gain
            az_w = (az + 180.0) % 360.0 - 180.0
            a_v = -np.minimum(12 * ((zen - 90.0) / 65.0) ** 2, 30.0)
            a_h = -np.minimum(12 * (az_w / 65.0) ** 2, 30.0)
            gain_db = 8.0 - np.minimum(-(a_v + a_h), 30.0)
            amp = 10 ** (gain_db / 20)
        else:
            amp = np.ones(np.broadcast(zen, az).shape)
        zeta = self.slants()[:, None]
        return np.stack([amp[None] * np.cos(zeta), amp[None] * np.sin(zeta)], axis=-1)


@dataclass(frozen=True, eq=False)
class ChannelSampler:
    """Ray-sum channel ``H(t, f)``.

    ``gains[c, m]`` is the (rx x tx) coefficient of ray ``m`` of cluster ``c``;
    the ray rotates at ``dopplers[c, m]`` Hz and all rays of a cluster share
    ``delays[c]``.
    """

    delays: np.ndarray
    dopplers: np.ndarray
    gains: np.ndarray
    bandwidth: float | None = None
    window: tuple | None = None
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("delays", "dopplers", "gains"):
            arr = np.array(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def num_rx(self) -> int:
        return self.gains.shape[2]

    @property
    def num_tx(self) -> int:
        return self.gains.shape[3]

    @property
    def mean_power(self) -> float:
        """Nominal per-link channel power (ensemble), 1 after normalization."""
        return 1.0

    def ray_powers(self) -> np.ndarray:
        """Power of each ray averaged over links, shape (clusters, rays)."""
        return np.mean(np.abs(self.gains) ** 2, axis=(2, 3))

    def through(self, port=None) -> "ChannelSampler":
        """Single-port sampler seen through transmit weights (default: element 0)."""
        if port is None:
            g = self.gains[..., :1]
        else:
            g = (self.gains @ np.asarray(port, dtype=complex).reshape(self.num_tx, 1))
        return replace(self, gains=g)

    def response(self, times, freqs) -> np.ndarray:
        """Evaluate ``H`` on a time x frequency grid, shape (T, F, rx, tx)."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        freqs = np.atleast_1d(np.asarray(freqs, dtype=float))
        if self.window is not None:
            lo, hi = self.window
            if times.min() < lo or times.max() > hi:
                raise ValueError(f"time outside sampler window [{lo}, {hi}]")
        if self.bandwidth is not None and np.any(np.abs(freqs) > self.bandwidth / 2 * (1 + 1e-9)):
            raise ValueError("frequency outside configured bandwidth")
        c, m, u, s = self.gains.shape
        nt = len(times)
        rot = _rotations(self.dopplers, times)                                   # (C, T, M)
        per_cluster = rot @ self.gains.reshape(c, m, u * s)                      # (C, T, K)
        h = _delay_phase(freqs, self.delays) @ per_cluster.reshape(c, nt * u * s)
        return h.reshape(len(freqs), nt, u, s).transpose(1, 0, 2, 3)


def cis(phase) -> np.ndarray:
    """``exp(j * phase)`` for real ``phase``; cheaper than complex ``np.exp``."""
    phase = np.asarray(phase, dtype=float)
    out = np.empty(phase.shape, dtype=complex)
    np.cos(phase, out=out.real)
    np.sin(phase, out=out.imag)
    return out


def _rotations(dopplers: np.ndarray, times: np.ndarray) -> np.ndarray:
    """``exp(j 2 pi nu t)`` per cluster, time and ray, shape (C, T, M)."""
    nt = len(times)
    step = np.diff(times)
    if nt < 4 or not np.allclose(step, step[0], rtol=1e-9, atol=0.0):
        return cis(2 * np.pi * dopplers[:, None, :] * times[None, :, None])
    # equispaced grid: repeated multiplication by one step rotation, error ~ T * eps
    rot = np.empty((dopplers.shape[0], nt, dopplers.shape[1]), complex)
    rot[:, 0] = cis(2 * np.pi * dopplers * times[0])
    inc = cis(2 * np.pi * dopplers * step[0])
    for k in range(1, nt):
        np.multiply(rot[:, k - 1], inc, out=rot[:, k])
    return rot


_PHASE_CACHE: dict = {}


def _delay_phase(freqs: np.ndarray, delays: np.ndarray) -> np.ndarray:
    # Monte Carlo loops re-evaluate the same (grid, profile) pair many times
    key = (freqs.tobytes(), delays.tobytes())
    mat = _PHASE_CACHE.get(key)
    if mat is None:
        if len(_PHASE_CACHE) >= 8:
            _PHASE_CACHE.pop(next(iter(_PHASE_CACHE)))
        mat = cis(-2 * np.pi * np.outer(freqs, delays))
        mat.setflags(write=False)
        _PHASE_CACHE[key] = mat
    return mat


def freq_response(sampler: ChannelSampler, t: float, freq_grid) -> np.ndarray:
    """Channel at time ``t`` on ``freq_grid`` (Hz, baseband), shape (F, rx, tx)."""
    return sampler.response([t], freq_grid)[0]


def make_tdl(profile: TapProfile, max_doppler_hz: float, num_rays: int = 64, seed: int = 0,
             num_rx: int = 1, num_tx: int = 1, bandwidth: float | None = None) -> ChannelSampler:
    """Tapped delay line channel with independent Jakes fading per tap and link.

    Each tap is ``sqrt(p / M) * sum_m exp(j(2 pi fD cos(a_m) t + phi_m))`` with
    equispaced arrival angles ``a_m`` under a random rotation and independent
    uniform phases ``phi_m``.
    """
    if not isinstance(profile, TapProfile) or not profile.taps:
        raise ValueError("empty tap profile")
    if max_doppler_hz < 0:
        raise ValueError("max Doppler must be non-negative")
    if num_rays < 8:
        raise ValueError("num_rays must be at least 8")
    rng = np.random.default_rng(seed)
    n_taps = len(profile.taps)
    shape = (n_taps, num_rays, num_rx, num_tx)
    rotation = rng.uniform(0, 1, size=(n_taps, 1, num_rx, num_tx))
    angles = 2 * np.pi * (np.arange(num_rays)[None, :, None, None] + rotation) / num_rays
    phases = rng.uniform(-np.pi, np.pi, size=shape)
    amp = np.sqrt(profile.powers / num_rays)[:, None, None, None]
    # each ray of each link is its own sinusoid: flatten links into the ray axis
    gains = np.zeros((n_taps, num_rays * num_rx * num_tx, num_rx, num_tx), complex)
    dopplers = (max_doppler_hz * np.cos(angles)).reshape(n_taps, -1)
    links = num_rx * num_tx
    # ray index in flattened (ray, rx, tx) order -> its own link: a diagonal in (link, link)
    diag = np.einsum("trll->trl", gains.reshape(n_taps, num_rays, links, links))
    diag[...] = (amp * cis(phases)).reshape(n_taps, num_rays, links)
    return ChannelSampler(profile.delays, dopplers, gains, bandwidth=bandwidth,
                          info={"model": "TDL", "max_doppler_hz": max_doppler_hz})


def rms_spread(values, powers) -> float:
    p = np.asarray(powers, float) / np.sum(powers)
    v = np.asarray(values, float)
    mean = np.sum(p * v)
    return float(np.sqrt(np.sum(p * (v - mean) ** 2)))


def _wrap_deg(a):
    return (np.asarray(a) + 180.0) % 360.0 - 180.0


def azimuth_spread(angles_deg, powers) -> float:
    """Power-weighted rms of azimuths, wrapped about their circular mean."""
    p = np.asarray(powers, float) / np.sum(powers)
    mu = np.degrees(np.angle(np.sum(p * np.exp(1j * np.radians(angles_deg)))))
    return rms_spread(_wrap_deg(np.asarray(angles_deg) - mu), p)


def scale_azimuths(angles_deg, powers, target_deg: float) -> np.ndarray:
    """Linearly rescale azimuths about their power-weighted mean to a target rms spread."""
    p = np.asarray(powers, float) / np.sum(powers)
    mu = np.degrees(np.angle(np.sum(p * np.exp(1j * np.radians(angles_deg)))))
    dev = _wrap_deg(np.asarray(angles_deg) - mu)
    centre = np.sum(p * dev)
    spread = rms_spread(dev, p)
    return mu + centre + (dev - centre) * (target_deg / spread)


def scale_zeniths(angles_deg, powers, target_deg: float) -> np.ndarray:
    p = np.asarray(powers, float) / np.sum(powers)
    z = np.asarray(angles_deg, float)
    mean = np.sum(p * z)
    return mean + (z - mean) * (target_deg / rms_spread(z, p))


def _unit(zenith_deg, azimuth_deg):
    zen, az = np.radians(zenith_deg), np.radians(azimuth_deg)
    return np.stack([np.sin(zen) * np.cos(az), np.sin(zen) * np.sin(az), np.cos(zen)], axis=-1)


def make_cdl(table: CdlTable, target_delay_spread: float, target_asa: float, target_zsa: float,
             tx: AntennaArray, rx: AntennaArray, velocity: VelocityVector, carrier_hz: float,
             seed: int = 0, target_asd: float | None = None, target_zsd: float | None = None,
             bandwidth: float | None = None) -> ChannelSampler:
    """Clustered delay line channel for a moving UE.

    Cluster delays are scaled so the rms delay spread equals
    ``target_delay_spread``; arrival azimuths/zeniths (and optionally departure
    angles) are rescaled about their power-weighted mean to the target spreads.
    Each cluster expands into 20 rays with random angle coupling, a random
    cross-polarization matrix and a Doppler rotation ``r_rx . v / lambda``.
    The channel is normalized to unit mean power per rx/tx element pair.
    """
    if target_delay_spread <= 0 or target_asa <= 0 or target_zsa <= 0:
        raise ValueError("target spreads must be positive")
    rng = np.random.default_rng(seed)
    powers = table.powers
    n_cl, n_ray = table.num_clusters, len(table.ray_offsets)
    offsets = np.asarray(table.ray_offsets)

    delays = table.normalized_delay * (target_delay_spread / table.rms_delay_spread())
    aoa = scale_azimuths(table.aoa, powers, target_asa)
    zoa = scale_zeniths(table.zoa, powers, target_zsa)
    aod = table.aod if target_asd is None else scale_azimuths(table.aod, powers, target_asd)
    zod = table.zod if target_zsd is None else scale_zeniths(table.zod, powers, target_zsd)

    def rays(centre, spread):
        return centre[:, None] + spread * offsets[None, :]

    ray_aoa = rays(aoa, table.c_asa)
    # random coupling of departure/zenith rays to the arrival rays, per cluster
    perm = lambda: np.argsort(rng.random((n_cl, n_ray)), axis=1)
    ray_aod = np.take_along_axis(rays(aod, table.c_asd), perm(), axis=1)
    ray_zod = np.take_along_axis(rays(zod, table.c_zsd), perm(), axis=1)
    ray_zoa = np.take_along_axis(rays(zoa, table.c_zsa), perm(), axis=1)
    ray_zoa, ray_zod = (np.where(z % 360 > 180, 360 - z % 360, z % 360) for z in (ray_zoa, ray_zod))

    kappa_inv = 10 ** (-table.cross_polar_ratio / 10)
    phases = np.exp(1j * rng.uniform(-np.pi, np.pi, size=(n_cl, n_ray, 2, 2)))
    pol = phases * np.sqrt(np.array([[1.0, kappa_inv], [kappa_inv, 1.0]]))

    r_rx = _unit(ray_zoa, ray_aoa)        # (C, M, 3)
    r_tx = _unit(ray_zod, ray_aod)
    f_rx = rx.field(ray_zoa.ravel(), ray_aoa.ravel()).reshape(rx.num_elements, n_cl, n_ray, 2)
    f_tx = tx.field(ray_zod.ravel(), ray_aod.ravel()).reshape(tx.num_elements, n_cl, n_ray, 2)
    a_rx = np.exp(2j * np.pi * np.einsum("cmx,ux->cmu", r_rx, rx.positions()))
    a_tx = np.exp(2j * np.pi * np.einsum("cmx,sx->cms", r_tx, tx.positions()))

    coupling = np.einsum("ucmp,cmpq,scmq->cmus", f_rx, pol, f_tx)
    # expected |coupling|^2 with the random phases averaged out
    pol_power = np.einsum("ucmp,pq,scmq->cmus", np.abs(f_rx) ** 2,
                          np.array([[1.0, kappa_inv], [kappa_inv, 1.0]]), np.abs(f_tx) ** 2)
    norm = np.sum(powers[:, None] / n_ray * pol_power.mean(axis=(2, 3)))
    amp = np.sqrt(powers / n_ray / norm)[:, None, None, None]
    gains = amp * coupling * a_rx[:, :, :, None] * a_tx[:, :, None, :]

    wavelength = SPEED_OF_LIGHT / carrier_hz
    dopplers = r_rx @ velocity.vector() / wavelength
    return ChannelSampler(delays, dopplers, gains, bandwidth=bandwidth, info={
        "model": "CDL", "speed": velocity.speed, "azimuth": velocity.azimuth,
        "carrier_hz": carrier_hz,
    })
