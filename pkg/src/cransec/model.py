"""System configuration, cluster geometry and random channel generation.

Units are SI throughout (W, Hz, W/Hz, m).  Channels are stored as row
vectors, matching the ``h @ F @ v`` convention used by the rate formulas.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

#: Half-wavelength uniform linear array.
ANTENNA_SPACING = 0.5
#: Close-in reference distance of the mmWave path-loss model.
REFERENCE_DISTANCE = 1.0


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watt_to_dbm(watt: float) -> float:
    return 10.0 * math.log10(watt) + 30.0


@dataclass(frozen=True)
class SystemConfig:
    """Scalar parameters of one cooperating-BS cluster.

    ``p_bs_per`` defaults to an equal split of ``p_bs_total``.  ``csi_error_ratio``
    may be a scalar (same bound for every eavesdropper) or one value per Eve.
    """

    n_cp_antennas: int = 8
    n_bs_antennas: int = 4
    n_bs: int = 3
    n_users: int = 2
    n_eves: int = 1
    n_paths: int = 4
    phase_bits: int = 3
    bw_mmwave: float = 50e6
    bw_microwave: float = 20e6
    noise_psd: float = dbm_to_watt(-174.0)
    p_bs_total: float = dbm_to_watt(15.0)
    p_bs_per: tuple[float, ...] | None = None
    p_cp: float = dbm_to_watt(46.0)
    cp_distance: float = 500.0
    cluster_radius: float = 30.0
    shadowing_sigma: float = 4.6
    csi_error_ratio: float | tuple[float, ...] = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        for name in ("n_cp_antennas", "n_bs_antennas", "n_bs", "n_users", "n_paths", "phase_bits"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        if int(self.n_eves) != self.n_eves or self.n_eves < 0:
            raise ValueError(f"n_eves must be a non-negative integer, got {self.n_eves!r}")
        for name in ("bw_mmwave", "bw_microwave", "noise_psd", "p_bs_total", "p_cp",
                     "cp_distance", "cluster_radius"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")
        if self.shadowing_sigma < 0:
            raise ValueError("shadowing_sigma must be >= 0")

        if self.p_bs_per is None:
            per = (self.p_bs_total / self.n_bs,) * self.n_bs
        else:
            per = tuple(float(p) for p in self.p_bs_per)
        if len(per) != self.n_bs or any(p <= 0 for p in per):
            raise ValueError("p_bs_per needs n_bs positive entries")
        object.__setattr__(self, "p_bs_per", per)

        sigma = self.csi_error_ratio
        if np.ndim(sigma) == 0:
            sigma = (float(sigma),) * self.n_eves
        else:
            sigma = tuple(float(s) for s in sigma)
        if len(sigma) != self.n_eves or any(s < 0 for s in sigma):
            raise ValueError("csi_error_ratio needs n_eves entries, all >= 0")
        object.__setattr__(self, "csi_error_ratio", sigma)

    @property
    def eta(self) -> float:
        """Microwave-to-mmWave bandwidth ratio."""
        return self.bw_microwave / self.bw_mmwave

    def replace(self, **changes) -> "SystemConfig":
        # derived fields are recomputed unless given explicitly
        if "p_bs_total" in changes or "n_bs" in changes:
            changes.setdefault("p_bs_per", None)
        if "n_eves" in changes and "csi_error_ratio" not in changes:
            sig = self.csi_error_ratio
            changes["csi_error_ratio"] = sig[0] if sig else 0.0
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["p_bs_per"] = list(self.p_bs_per)
        d["csi_error_ratio"] = list(self.csi_error_ratio)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "SystemConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kw = dict(data)
        if kw.get("p_bs_per") is not None:
            kw["p_bs_per"] = tuple(kw["p_bs_per"])
        if isinstance(kw.get("csi_error_ratio"), list):
            kw["csi_error_ratio"] = tuple(kw["csi_error_ratio"])
        return cls(**kw)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


@dataclass(frozen=True)
class Topology:
    bs_positions: np.ndarray
    user_positions: np.ndarray
    eve_positions: np.ndarray
    cp_distance_to_cluster: float

    @property
    def cp_position(self) -> np.ndarray:
        return np.array([self.cp_distance_to_cluster, 0.0])


@dataclass(frozen=True)
class ChannelSet:
    """Fronthaul and access channels of one drawn instance.

    ``h``/``he_true``/``he_est`` have one row per user/Eve of length M*L, the
    per-BS blocks concatenated.  Path gains and angles have shape
    (n_terminals, L, C).
    """

    g: np.ndarray
    h: np.ndarray
    he_true: np.ndarray
    he_est: np.ndarray
    user_gains: np.ndarray = field(default=None, repr=False)
    user_angles: np.ndarray = field(default=None, repr=False)
    eve_gains: np.ndarray = field(default=None, repr=False)
    eve_angles: np.ndarray = field(default=None, repr=False)

    @property
    def n_bs(self) -> int:
        return self.g.shape[0]

    @property
    def n_users(self) -> int:
        return self.h.shape[0]

    @property
    def n_eves(self) -> int:
        return self.he_est.shape[0]

    def check(self, cfg: SystemConfig) -> None:
        ml = cfg.n_bs_antennas * cfg.n_bs
        expected = {
            "g": (cfg.n_bs, cfg.n_cp_antennas),
            "h": (cfg.n_users, ml),
            "he_true": (cfg.n_eves, ml),
            "he_est": (cfg.n_eves, ml),
        }
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ValueError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")


def path_loss_mmwave(d: float, shadow: float = 0.0) -> float:
    """Close-in mmWave path loss in dB (73 GHz, exponent 2.4)."""
    if d < REFERENCE_DISTANCE:
        raise ValueError(f"mmWave path loss defined for d >= {REFERENCE_DISTANCE} m, got {d}")
    return 69.7 + 24.0 * math.log10(d) + shadow


def path_loss_microwave(d: float) -> float:
    if d <= 0:
        raise ValueError(f"distance must be positive, got {d}")
    return 38.0 + 30.0 * math.log10(d)


def steering_vector(theta: float, m: int, spacing: float = ANTENNA_SPACING) -> np.ndarray:
    idx = np.arange(m)
    return np.exp(1j * 2.0 * np.pi * spacing * idx * np.sin(theta)) / np.sqrt(m)


def clustered_channel(gains: np.ndarray, angles: np.ndarray, m: int) -> np.ndarray:
    """Sum of C steering vectors weighted by complex path gains, times sqrt(M/C)."""
    gains = np.atleast_1d(gains)
    angles = np.atleast_1d(angles)
    c = gains.size
    h = np.zeros(m, dtype=complex)
    for alpha, theta in zip(gains, angles):
        h += alpha * steering_vector(theta, m)
    return np.sqrt(m / c) * h


def complex_normal(rng: np.random.Generator, size) -> np.ndarray:
    return (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / np.sqrt(2.0)


def sample_mmwave_channel(rng: np.random.Generator, n_paths: int, m: int, d: float = 1.0,
                          shadow: float = 0.0):
    """Draw one BS->terminal mmWave link.

    Returns ``(h, gains, angles)``; the gains already include the path loss at
    distance ``d`` with shadowing ``shadow`` (dB).
    """
    if n_paths < 1:
        raise ValueError("need at least one path")
    scale = 10.0 ** (-path_loss_mmwave(d, shadow) / 20.0)
    gains = complex_normal(rng, n_paths) * scale
    angles = rng.uniform(0.0, np.pi, n_paths)
    return clustered_channel(gains, angles, m), gains, angles


def sample_fronthaul_channel(rng: np.random.Generator, n: int, d: float) -> np.ndarray:
    """i.i.d. Rayleigh CP->BS vector scaled by the microwave path loss."""
    if n < 1:
        raise ValueError("need at least one antenna")
    scale = 10.0 ** (-path_loss_microwave(d) / 20.0)
    return complex_normal(rng, n) * scale


def apply_csi_error(h_hat: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Add an error drawn uniformly from the ball ||dh||^2 <= sigma*||h_hat||^2.

    Always consumes the same number of random draws, so sweeps over ``sigma``
    with a shared seed perturb along the same direction.
    """
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    h_hat = np.asarray(h_hat, dtype=complex)
    n = h_hat.size
    direction = complex_normal(rng, n)
    direction /= np.linalg.norm(direction)
    u = rng.uniform()
    if sigma == 0:
        return h_hat.copy()
    radius = math.sqrt(sigma) * np.linalg.norm(h_hat) * u ** (1.0 / (2 * n))
    return h_hat + radius * direction.reshape(h_hat.shape)


def _uniform_disk(rng: np.random.Generator, count: int, radius: float) -> np.ndarray:
    # one (r, phi) pair per point, so a longer draw extends a shorter one
    u = rng.uniform(size=(count, 2))
    r = radius * np.sqrt(u[:, 0])
    phi = 2.0 * np.pi * u[:, 1]
    return np.column_stack([r * np.cos(phi), r * np.sin(phi)])


def generate_topology(cfg: SystemConfig, rng: np.random.Generator) -> Topology:
    """Node positions.  BSs, users and Eves use separate child streams of ``rng``."""
    bs_rng, user_rng, eve_rng = rng.spawn(3)
    return Topology(
        bs_positions=_uniform_disk(bs_rng, cfg.n_bs, cfg.cluster_radius),
        user_positions=_uniform_disk(user_rng, cfg.n_users, cfg.cluster_radius),
        eve_positions=_uniform_disk(eve_rng, cfg.n_eves, cfg.cluster_radius),
        cp_distance_to_cluster=cfg.cp_distance,
    )


def _terminal_channels(cfg, topo, positions, rng):
    m, c = cfg.n_bs_antennas, cfg.n_paths
    rows = np.zeros((len(positions), m * cfg.n_bs), dtype=complex)
    gains = np.zeros((len(positions), cfg.n_bs, c), dtype=complex)
    angles = np.zeros((len(positions), cfg.n_bs, c))
    for t, pos in enumerate(positions):
        for l, bs in enumerate(topo.bs_positions):
            d = max(float(np.linalg.norm(pos - bs)), REFERENCE_DISTANCE)
            shadow = rng.normal(0.0, cfg.shadowing_sigma)
            h, a, th = sample_mmwave_channel(rng, c, m, d, shadow)
            rows[t, l * m:(l + 1) * m] = h
            gains[t, l] = a
            angles[t, l] = th
    return rows, gains, angles


def generate_channels(cfg: SystemConfig, topo: Topology, rng: np.random.Generator) -> ChannelSet:
    """Channels for a topology.  Fronthaul, user, Eve and CSI-error draws use
    separate child streams of ``rng`` and each terminal is drawn in turn, so
    with a shared seed the first K users and first Z Eves do not depend on
    how many terminals of either kind exist."""
    fh_rng, user_rng, eve_rng, err_rng = rng.spawn(4)
    g = np.array([
        sample_fronthaul_channel(fh_rng, cfg.n_cp_antennas, float(np.linalg.norm(bs - topo.cp_position)))
        for bs in topo.bs_positions
    ]).reshape(cfg.n_bs, cfg.n_cp_antennas)
    h, ug, ua = _terminal_channels(cfg, topo, topo.user_positions, user_rng)
    he_est, eg, ea = _terminal_channels(cfg, topo, topo.eve_positions, eve_rng)
    he_true = np.array([apply_csi_error(he_est[z], cfg.csi_error_ratio[z], err_rng)
                        for z in range(cfg.n_eves)]).reshape(he_est.shape)
    return ChannelSet(g=g, h=h, he_true=he_true, he_est=he_est,
                      user_gains=ug, user_angles=ua, eve_gains=eg, eve_angles=ea)


def draw_instance(cfg: SystemConfig, rng: np.random.Generator | None = None):
    """Topology and channels from one generator; seeded by ``cfg.rng_seed`` by default."""
    if rng is None:
        rng = np.random.default_rng(cfg.rng_seed)
    topo = generate_topology(cfg, rng)
    return topo, generate_channels(cfg, topo, rng)


def zero_channels(cfg: SystemConfig) -> ChannelSet:
    ml = cfg.n_bs_antennas * cfg.n_bs
    return ChannelSet(
        g=np.zeros((cfg.n_bs, cfg.n_cp_antennas), dtype=complex),
        h=np.zeros((cfg.n_users, ml), dtype=complex),
        he_true=np.zeros((cfg.n_eves, ml), dtype=complex),
        he_est=np.zeros((cfg.n_eves, ml), dtype=complex),
    )


def with_eves(channels: ChannelSet, he: Sequence[np.ndarray] | np.ndarray,
              he_est: np.ndarray | None = None) -> ChannelSet:
    he = np.asarray(he, dtype=complex)
    return dataclasses.replace(channels, he_true=he, he_est=he if he_est is None else he_est)
