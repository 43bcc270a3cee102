"""Problem data model and randomized hexagonal-network instance generation.

Power, load and SINR vectors are plain 1-D float64 numpy arrays; the
helpers :func:`check_power` and :func:`check_load` validate them where a
caller needs the invariants enforced.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

MACRO = "macro"
SMALL = "small"

#: Identifier of the random generator used for every draw, recorded in run metadata.
RNG_ALGORITHM = "numpy.random.Generator(PCG64)"


class InvalidInstanceError(ValueError):
    """Raised when problem data violates a model invariant."""


def _frozen(a, dtype=np.float64):
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class PathLossModel:
    """Log-distance path loss ``PL(dB) = intercept + slope * log10(d_km)`` per cell kind."""

    macro_intercept_db: float = 128.1
    macro_slope_db: float = 37.6
    small_intercept_db: float = 140.7
    small_slope_db: float = 36.7
    min_distance_m: float = 10.0

    def __post_init__(self):
        if self.min_distance_m <= 0:
            raise InvalidInstanceError("pathloss.min_distance_m must be > 0")


@dataclass(frozen=True)
class PhysicalConstants:
    """Radio constants shared by every instance of a scenario.

    Powers are in watts per RU.  The bandwidth default of 180 kHz per RU and
    25 RUs correspond to a 4.5 MHz carrier.
    """

    ru_bandwidth_hz: float = 180e3
    ru_count: int = 25
    noise_psd_dbm_hz: float = -174.0
    power_max_macro_w: float = 0.2
    power_max_small_w: float = 0.05
    pathloss: PathLossModel = field(default_factory=PathLossModel)

    def __post_init__(self):
        if self.ru_bandwidth_hz <= 0:
            raise InvalidInstanceError("physical.ru_bandwidth_hz must be > 0")
        if int(self.ru_count) != self.ru_count or self.ru_count < 1:
            raise InvalidInstanceError("physical.ru_count must be a positive integer")
        if self.power_max_macro_w <= 0 or self.power_max_small_w <= 0:
            raise InvalidInstanceError("physical power caps must be > 0")

    @property
    def noise_power_w(self) -> float:
        return 10.0 ** (self.noise_psd_dbm_hz / 10.0) * 1e-3 * self.ru_bandwidth_hz


@dataclass(frozen=True)
class TopologySpec:
    macro_count: int = 7
    small_per_macro: int = 2
    ues_per_hexagon: int = 30
    inter_site_distance_m: float = 500.0
    carrier_freq_ghz: float = 2.0
    shadowing_std_macro_db: float = 6.0
    shadowing_std_small_db: float = 3.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.macro_count < 1:
            raise InvalidInstanceError("topology.macro_count must be positive")
        if self.small_per_macro < 0:
            raise InvalidInstanceError("topology.small_per_macro must be non-negative")
        if self.ues_per_hexagon < 1:
            raise InvalidInstanceError("topology.ues_per_hexagon must be positive")
        if not self.inter_site_distance_m > 0:
            raise InvalidInstanceError("topology.inter_site_distance_m must be > 0")
        if self.shadowing_std_macro_db < 0 or self.shadowing_std_small_db < 0:
            raise InvalidInstanceError("topology shadowing std must be >= 0")


@dataclass(frozen=True, eq=False)
class NetworkInstance:
    """Immutable problem data for one network.

    Parameters
    ----------
    gain : (n, m) array
        Linear channel gains ``g_ij`` from cell ``i`` to UE ``j``.
    noise_power : float
        Noise power per RU in watts.
    ru_bandwidth : float
        RU bandwidth ``B`` in Hz.
    ru_count : int
        Number of RUs ``M`` per cell.
    demand_min : (m,) array
        Minimum bit-rate demand per UE in bits/s.
    power_max : (n,) array
        Per-cell transmit power cap in watts per RU.
    cell_kind : sequence of str
        ``"macro"`` or ``"small"`` per cell.
    """

    gain: np.ndarray
    noise_power: float
    ru_bandwidth: float
    ru_count: int
    demand_min: np.ndarray
    power_max: np.ndarray
    cell_kind: tuple = ()
    cell_xy: Optional[np.ndarray] = None
    ue_xy: Optional[np.ndarray] = None

    def __post_init__(self):
        gain = _frozen(self.gain)
        if gain.ndim != 2 or gain.shape[0] < 1 or gain.shape[1] < 1:
            raise InvalidInstanceError("gain must be a non-empty n x m matrix")
        n, m = gain.shape
        if not np.all(np.isfinite(gain)) or not np.all(gain > 0):
            raise InvalidInstanceError("gain entries must be finite and > 0")
        demand = _frozen(np.broadcast_to(np.asarray(self.demand_min, dtype=float), (m,)))
        if not np.all(demand > 0) or not np.all(np.isfinite(demand)):
            raise InvalidInstanceError("demand_min entries must be finite and > 0")
        pmax = _frozen(np.broadcast_to(np.asarray(self.power_max, dtype=float), (n,)))
        if not np.all(pmax > 0):
            raise InvalidInstanceError("power_max entries must be > 0")
        if not self.noise_power > 0:
            raise InvalidInstanceError("noise_power must be > 0")
        if not self.ru_bandwidth > 0:
            raise InvalidInstanceError("ru_bandwidth must be > 0")
        if int(self.ru_count) != self.ru_count or self.ru_count < 1:
            raise InvalidInstanceError("ru_count must be a positive integer")
        kind = tuple(self.cell_kind) if self.cell_kind else (MACRO,) * n
        if len(kind) != n or any(k not in (MACRO, SMALL) for k in kind):
            raise InvalidInstanceError("cell_kind must list 'macro' or 'small' for every cell")
        object.__setattr__(self, "gain", gain)
        object.__setattr__(self, "demand_min", demand)
        object.__setattr__(self, "power_max", pmax)
        object.__setattr__(self, "cell_kind", kind)
        object.__setattr__(self, "ru_count", int(self.ru_count))
        if self.cell_xy is not None:
            object.__setattr__(self, "cell_xy", _frozen(self.cell_xy))
        if self.ue_xy is not None:
            object.__setattr__(self, "ue_xy", _frozen(self.ue_xy))

    @property
    def n_cells(self) -> int:
        return self.gain.shape[0]

    @property
    def n_ues(self) -> int:
        return self.gain.shape[1]

    @property
    def capacity_scale(self) -> float:
        """``M * B``: bits/s delivered at unit spectral efficiency on every RU."""
        return self.ru_count * self.ru_bandwidth

    def with_demand(self, demand) -> "NetworkInstance":
        """Return a copy with ``demand_min`` replaced (scalar or per-UE)."""
        return NetworkInstance(
            gain=self.gain,
            noise_power=self.noise_power,
            ru_bandwidth=self.ru_bandwidth,
            ru_count=self.ru_count,
            demand_min=np.broadcast_to(np.asarray(demand, dtype=float), (self.n_ues,)),
            power_max=self.power_max,
            cell_kind=self.cell_kind,
            cell_xy=self.cell_xy,
            ue_xy=self.ue_xy,
        )

    def power_by_kind(self, macro_w: float, small_w: float) -> np.ndarray:
        return np.array([macro_w if k == MACRO else small_w for k in self.cell_kind])


@dataclass(frozen=True, eq=False)
class Association:
    """Binary cell-UE serving matrix; JT UEs have more than one serving cell."""

    kappa: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.kappa)
        if k.ndim != 2:
            raise InvalidInstanceError("kappa must be a 2-D matrix")
        if not np.all((k == 0) | (k == 1)):
            raise InvalidInstanceError("kappa entries must be 0 or 1")
        k = _frozen(k, dtype=np.uint8)
        if not np.all(k.sum(axis=0) >= 1):
            bad = int(np.flatnonzero(k.sum(axis=0) == 0)[0])
            raise InvalidInstanceError(f"UE {bad} has no serving cell")
        object.__setattr__(self, "kappa", k)

    def __eq__(self, other):
        if not isinstance(other, Association):
            return NotImplemented
        return self.kappa.shape == other.kappa.shape and bool(np.array_equal(self.kappa, other.kappa))

    def __hash__(self):
        return hash((self.kappa.shape, self.kappa.tobytes()))

    @property
    def shape(self):
        return self.kappa.shape

    def serving_cells(self, ue: int) -> np.ndarray:
        return np.flatnonzero(self.kappa[:, ue])

    def served_ues(self, cell: int) -> np.ndarray:
        return np.flatnonzero(self.kappa[cell])

    @property
    def jt_links(self) -> int:
        """Number of links beyond the first serving cell of each UE."""
        return int(self.kappa.sum()) - self.kappa.shape[1]

    @property
    def is_single_serving(self) -> bool:
        return bool(np.all(self.kappa.sum(axis=0) == 1))

    def with_link(self, cell: int, ue: int) -> "Association":
        k = self.kappa.copy()
        k[cell, ue] = 1
        return Association(k)


def check_power(inst: NetworkInstance, p) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (inst.n_cells,):
        raise InvalidInstanceError(f"power vector must have length {inst.n_cells}")
    if not np.all(p > 0):
        raise InvalidInstanceError("power entries must be > 0")
    if np.any(p > inst.power_max * (1 + 1e-12)):
        bad = int(np.argmax(p / inst.power_max))
        raise InvalidInstanceError(f"power of cell {bad} exceeds its cap")
    return p


def check_load(inst: NetworkInstance, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (inst.n_cells,):
        raise InvalidInstanceError(f"load vector must have length {inst.n_cells}")
    if not np.all(x >= 0):
        raise InvalidInstanceError("load entries must be >= 0")
    return x


def path_loss_db(kind: str, distance_m, carrier_ghz: float = 2.0,
                 model: PathLossModel = PathLossModel()):
    """Path loss in dB for a macro or small cell at ``distance_m`` meters.

    Distances below ``model.min_distance_m`` are clamped up.  The adopted
    log-distance forms carry no explicit frequency term; ``carrier_ghz`` is
    accepted so alternative models can be swapped in without changing callers.
    """
    d_km = np.maximum(np.asarray(distance_m, dtype=float), model.min_distance_m) / 1000.0
    if kind == MACRO:
        pl = model.macro_intercept_db + model.macro_slope_db * np.log10(d_km)
    elif kind == SMALL:
        pl = model.small_intercept_db + model.small_slope_db * np.log10(d_km)
    else:
        raise ValueError(f"unknown cell kind {kind!r}")
    return pl if pl.ndim else float(pl)


def hex_sites(count: int, isd: float) -> np.ndarray:
    """Centres of ``count`` hexagons in rings around the origin (flat-top layout)."""
    # axial coordinates ring by ring
    axial = [(0, 0)]
    directions = [(1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1)]
    ring = 1
    while len(axial) < count:
        q, r = -ring, ring  # start corner
        for dq, dr in directions:
            for _ in range(ring):
                axial.append((q, r))
                q, r = q + dq, r + dr
        ring += 1
    axial = np.array(axial[:count], dtype=float)
    radius = isd / np.sqrt(3.0)
    x = radius * 1.5 * axial[:, 0]
    y = radius * np.sqrt(3.0) * (axial[:, 1] + axial[:, 0] / 2.0)
    return np.column_stack([x, y])


def sample_in_hexagon(rng: np.random.Generator, center, radius: float, size: int) -> np.ndarray:
    """Uniform points inside a flat-top hexagon of circumradius ``radius``."""
    out = np.empty((0, 2))
    half_h = radius * np.sqrt(3.0) / 2.0
    while out.shape[0] < size:
        pts = rng.uniform([-radius, -half_h], [radius, half_h], size=(2 * size, 2))
        ax, ay = np.abs(pts[:, 0]), np.abs(pts[:, 1])
        inside = ay <= np.sqrt(3.0) * (radius - ax)
        out = np.vstack([out, pts[inside]])
    return out[:size] + np.asarray(center, dtype=float)


def compute_gains(cell_xy, cell_kind: Sequence[str], ue_xy, rng: np.random.Generator,
                  carrier_ghz: float = 2.0, shadow_std_macro_db: float = 6.0,
                  shadow_std_small_db: float = 3.0,
                  model: PathLossModel = PathLossModel()) -> np.ndarray:
    """Linear gains ``10^(-(PL + shadowing)/10)`` with i.i.d. log-normal shadowing per link."""
    cell_xy = np.asarray(cell_xy, dtype=float)
    ue_xy = np.asarray(ue_xy, dtype=float)
    dist = np.linalg.norm(cell_xy[:, None, :] - ue_xy[None, :, :], axis=2)
    pl = np.empty_like(dist)
    std = np.empty(len(cell_kind))
    for i, kind in enumerate(cell_kind):
        pl[i] = path_loss_db(kind, dist[i], carrier_ghz, model)
        std[i] = shadow_std_macro_db if kind == MACRO else shadow_std_small_db
    shadow = rng.standard_normal(dist.shape) * std[:, None]
    return 10.0 ** (-(pl + shadow) / 10.0)


def generate_instance(spec: TopologySpec, phys: PhysicalConstants = PhysicalConstants(),
                      demand_bps: float = 1e5) -> NetworkInstance:
    """Draw a hexagonal macro/small-cell network with UEs, gains and power caps.

    Cells are ordered macros first, then the small cells of macro 0, macro 1,
    and so on.  The result depends only on ``spec`` and ``phys`` (the demand
    is a plain parameter, not a random draw).
    """
    rng = np.random.default_rng(spec.rng_seed)
    sites = hex_sites(spec.macro_count, spec.inter_site_distance_m)
    radius = spec.inter_site_distance_m / np.sqrt(3.0)
    small_xy = [sample_in_hexagon(rng, c, radius, spec.small_per_macro) for c in sites]
    ue_xy = np.vstack([sample_in_hexagon(rng, c, radius, spec.ues_per_hexagon) for c in sites])
    cell_xy = np.vstack([sites] + small_xy)
    kinds = (MACRO,) * spec.macro_count + (SMALL,) * (spec.macro_count * spec.small_per_macro)
    gain = compute_gains(cell_xy, kinds, ue_xy, rng, spec.carrier_freq_ghz,
                         spec.shadowing_std_macro_db, spec.shadowing_std_small_db,
                         phys.pathloss)
    pmax = np.array([phys.power_max_macro_w if k == MACRO else phys.power_max_small_w
                     for k in kinds])
    return NetworkInstance(
        gain=gain,
        noise_power=phys.noise_power_w,
        ru_bandwidth=phys.ru_bandwidth_hz,
        ru_count=phys.ru_count,
        demand_min=np.full(ue_xy.shape[0], float(demand_bps)),
        power_max=pmax,
        cell_kind=kinds,
        cell_xy=cell_xy,
        ue_xy=ue_xy,
    )


def initial_association(inst: NetworkInstance) -> Association:
    """Serve each UE by the single cell with the strongest ``p_max * g`` (lowest index on ties)."""
    rx = inst.power_max[:, None] * inst.gain
    best = np.argmax(rx, axis=0)  # argmax returns the first maximum
    kappa = np.zeros(inst.gain.shape, dtype=np.uint8)
    kappa[best, np.arange(inst.n_ues)] = 1
    return Association(kappa)
