"""Spatially correlated multi-path channels for multi-panel planar arrays.

Port ordering used throughout the package: for each polarization, the
combined channel matrix (vertical RF ports x horizontal elements) is
vectorized column-major (vertical index fastest); the polarizations are
stacked one after the other.  ``line_panel_order`` gives the permutation to
panel-major order used by the line-panel quantizer.
"""

from dataclasses import dataclass, field

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0


class ConfigurationError(ValueError):
    """Inconsistent array or scenario parameters."""


class DomainError(ValueError):
    """Argument outside the domain of a formula."""


@dataclass(frozen=True)
class ArrayConfig:
    """Geometry of a multi-panel array.

    Spacings are in meters.  ``panel_gap_*`` is the extra distance between
    the last element of one panel and the first element of the next one.
    ``vertical_combining`` vertical elements share one RF chain.
    """

    n_panels_v: int = 1
    n_panels_h: int = 2
    n_elems_v: int = 8
    n_elems_h: int = 2
    panel_gap_v: float = 2.0 * SPEED_OF_LIGHT / 900e6
    panel_gap_h: float = 2.0 * SPEED_OF_LIGHT / 900e6
    elem_spacing_v: float = 0.5 * SPEED_OF_LIGHT / 900e6
    elem_spacing_h: float = 0.7 * SPEED_OF_LIGHT / 900e6
    vertical_combining: int = 8
    cross_polarized: bool = True
    carrier_frequency: float = 900e6

    def __post_init__(self):
        counts = (self.n_panels_v, self.n_panels_h, self.n_elems_v,
                  self.n_elems_h, self.vertical_combining)
        if min(counts) < 1:
            raise ConfigurationError("panel, element and combining counts must be >= 1")
        if self.n_elems_v % self.vertical_combining:
            raise ConfigurationError(
                f"n_elems_v={self.n_elems_v} not divisible by "
                f"vertical_combining={self.vertical_combining}")
        if min(self.elem_spacing_v, self.elem_spacing_h) <= 0:
            raise ConfigurationError("element spacings must be positive")
        if min(self.panel_gap_v, self.panel_gap_h) < 0:
            raise ConfigurationError("panel gaps must be non-negative")
        if self.carrier_frequency <= 0:
            raise ConfigurationError("carrier frequency must be positive")

    @classmethod
    def in_wavelengths(cls, panel_gap=2.0, elem_spacing_v=0.5, elem_spacing_h=0.7,
                       carrier_frequency=900e6, **kwargs):
        """Build a config with spacings given in wavelengths."""
        lam = SPEED_OF_LIGHT / carrier_frequency
        return cls(panel_gap_v=panel_gap * lam, panel_gap_h=panel_gap * lam,
                   elem_spacing_v=elem_spacing_v * lam,
                   elem_spacing_h=elem_spacing_h * lam,
                   carrier_frequency=carrier_frequency, **kwargs)

    @property
    def wavelength(self):
        return SPEED_OF_LIGHT / self.carrier_frequency

    @property
    def rows(self):
        """Physical vertical elements over the whole array."""
        return self.n_panels_v * self.n_elems_v

    @property
    def cols(self):
        """Physical horizontal elements over the whole array."""
        return self.n_panels_h * self.n_elems_h

    @property
    def ports_v_per_panel(self):
        return self.n_elems_v // self.vertical_combining

    @property
    def ports_v(self):
        """Vertical RF ports over the whole array."""
        return self.n_panels_v * self.ports_v_per_panel

    @property
    def ports_per_pol(self):
        return self.ports_v * self.cols

    @property
    def n_pol(self):
        return 2 if self.cross_polarized else 1

    @property
    def n_ports(self):
        return self.n_pol * self.ports_per_pol


@dataclass(frozen=True)
class PathLoss:
    """Log-distance path loss ``intercept + slope * log10(r)`` in dB."""

    intercept: float = 8.0
    slope: float = 37.6

    def db(self, distance):
        distance = np.asarray(distance, dtype=float)
        if np.any(distance <= 0):
            raise DomainError("distance must be positive")
        return self.intercept + self.slope * np.log10(distance)


@dataclass(frozen=True)
class ScenarioParams:
    """User drop and propagation parameters.

    ``vertical_angle_range`` bounds the angle whose sine scales the vertical
    element offsets; ``horizontal_angle_range`` bounds the angle whose cosine
    scales the horizontal offsets.  ``tilt`` is the analog steering angle of
    the vertical combiner; ``None`` means pointing at the user ring.
    """

    n_users: int = 3
    ground_distance: float = 100.0
    bs_height: float = 30.0
    ue_height: float = 2.0
    n_paths: int = 20
    horizontal_angle_range: tuple = (0.0, np.pi)
    vertical_angle_range: tuple = (0.0, np.pi / 36)
    pathloss: PathLoss = field(default_factory=PathLoss)
    tilt: float | None = None

    def __post_init__(self):
        if self.n_paths < 1:
            raise ConfigurationError("n_paths must be >= 1")
        if self.n_users < 1:
            raise ConfigurationError("n_users must be >= 1")
        for name in ("horizontal_angle_range", "vertical_angle_range"):
            lo, hi = getattr(self, name)
            if not lo <= hi:
                raise ConfigurationError(f"{name} is empty: {lo} > {hi}")
        if self.ground_distance < 0:
            raise ConfigurationError("ground_distance must be >= 0")

    @property
    def distance(self):
        """3D base-station to user distance in meters."""
        return float(np.hypot(self.ground_distance, self.bs_height - self.ue_height))

    @property
    def tilt_angle(self):
        if self.tilt is not None:
            return self.tilt
        return float(np.arctan2(self.bs_height - self.ue_height, self.ground_distance))


@dataclass(frozen=True)
class PathSet:
    """Propagation paths of one user; ``gains`` has one row per polarization."""

    vertical_angles: np.ndarray
    horizontal_angles: np.ndarray
    gains: np.ndarray
    distance: float

    def __len__(self):
        return self.vertical_angles.size


@dataclass(frozen=True)
class ChannelRealization:
    vector: np.ndarray
    config: ArrayConfig
    distance: float

    def __post_init__(self):
        if self.vector.shape != (self.config.n_ports,):
            raise ConfigurationError(
                f"channel length {self.vector.shape} != ({self.config.n_ports},)")
        if not np.all(np.isfinite(self.vector)):
            raise ValueError("channel has non-finite entries")


def complex_gaussian(rng, size):
    """Circularly-symmetric complex Gaussian samples with unit variance."""
    return (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / np.sqrt(2.0)


def sample_paths(config, scenario, rng):
    S = scenario.n_paths
    vlo, vhi = scenario.vertical_angle_range
    hlo, hhi = scenario.horizontal_angle_range
    vert = rng.uniform(vlo, vhi, S) if vhi > vlo else np.full(S, float(vlo))
    horiz = rng.uniform(hlo, hhi, S) if hhi > hlo else np.full(S, float(hlo))
    gains = complex_gaussian(rng, (config.n_pol, S))
    return PathSet(vert, horiz, gains, scenario.distance)


def large_scale_coefficient(z, distance, pathloss=PathLoss()):
    """Path gain scaled by the amplitude path loss ``10^(-PL/20)``."""
    return z * 10.0 ** (-pathloss.db(distance) / 20.0)


def _offset(idx, per_panel, panel_gap, spacing, total):
    idx = np.asarray(idx)
    if np.any(idx < 1) or np.any(idx > total):
        raise DomainError(f"element index outside 1..{total}")
    panel = -(-idx // per_panel)  # ceil(idx / per_panel)
    return panel_gap * (panel - 1) + spacing * (idx - panel)


def vertical_offset(config, m):
    """Vertical position of element row ``m`` (1-based) in meters."""
    return _offset(m, config.n_elems_v, config.panel_gap_v, config.elem_spacing_v,
                   config.rows)


def horizontal_offset(config, n):
    """Horizontal position of element column ``n`` (1-based) in meters."""
    return _offset(n, config.n_elems_h, config.panel_gap_h, config.elem_spacing_h,
                   config.cols)


def vertical_offsets(config):
    return vertical_offset(config, np.arange(1, config.rows + 1))


def horizontal_offsets(config):
    return horizontal_offset(config, np.arange(1, config.cols + 1))


def channel_matrix_per_path(config, vertical_angle, horizontal_angle, rho):
    """Element-level channel matrix of one path, shape (rows, cols)."""
    k = 2 * np.pi / config.wavelength
    dv = vertical_offsets(config) * np.sin(vertical_angle)
    dh = horizontal_offsets(config) * np.cos(horizontal_angle) * np.cos(vertical_angle)
    return rho * np.exp(-1j * k * (dv[:, None] + dh[None, :]))


def aggregate_channel(matrices):
    matrices = [np.asarray(m) for m in matrices]
    if not matrices:
        raise ValueError("need at least one path matrix")
    shape = matrices[0].shape
    if any(m.shape != shape for m in matrices):
        raise ValueError("path matrices differ in shape")
    return np.sum(matrices, axis=0) / np.sqrt(len(matrices))


def vectorize_channel(H, n_elements=None):
    """Column-major vectorization scaled by ``1/sqrt(n_elements)``.

    ``n_elements`` defaults to ``H.size``.
    """
    H = np.asarray(H)
    n = H.size if n_elements is None else n_elements
    return H.reshape(-1, order="F") / np.sqrt(n)


def txru_weight(config, tilt):
    """Analog weights of one vertical RF chain, length ``vertical_combining``."""
    R = config.vertical_combining
    m = np.arange(1, R + 1)
    k = 2 * np.pi / config.wavelength
    phase = k * (m - 1) * vertical_offset(config, m) * np.cos(tilt)
    return np.exp(-1j * phase) / np.sqrt(R)


def combine_vertical(H, u):
    """Apply one analog weight vector to each group of ``len(u)`` rows."""
    H = np.asarray(H)
    R = len(u)
    if H.shape[0] % R:
        raise ConfigurationError(f"{H.shape[0]} rows not divisible into groups of {R}")
    groups = H.reshape(H.shape[0] // R, R, *H.shape[1:])
    return np.einsum("r,gr...->g...", np.conj(u), groups)


def apply_one_to_m(H_full, u, config):
    """Combine vertical elements into RF ports and vectorize one polarization.

    The result uses the normalization of the element-level vectorization, so
    with ``u = [1]`` it equals ``vectorize_channel(H_full)``.
    """
    if H_full.shape != (config.rows, config.cols):
        raise ConfigurationError(f"matrix shape {H_full.shape} != {(config.rows, config.cols)}")
    if len(u) != config.vertical_combining:
        raise ConfigurationError("weight length must equal vertical_combining")
    return vectorize_channel(combine_vertical(H_full, u), n_elements=H_full.size)


def element_channel(config, paths, pol=0):
    """Aggregate element-level channel of one polarization, shape (rows, cols).

    Fused form of summing ``channel_matrix_per_path`` over the paths.
    """
    k = 2 * np.pi / config.wavelength
    rho = large_scale_coefficient(paths.gains[pol], paths.distance)
    sv = np.sin(paths.vertical_angles)
    ch = np.cos(paths.horizontal_angles) * np.cos(paths.vertical_angles)
    Av = np.exp(-1j * k * np.outer(vertical_offsets(config), sv))
    Ah = np.exp(-1j * k * np.outer(horizontal_offsets(config), ch))
    return (Av * rho) @ Ah.T / np.sqrt(len(paths))


def port_channel(config, paths, tilt):
    """Port-domain channel vector of one user from its paths."""
    u = txru_weight(config, tilt)
    parts = [apply_one_to_m(element_channel(config, paths, p), u, config)
             for p in range(config.n_pol)]
    return np.concatenate(parts)


def generate_user(config, scenario, rng):
    paths = sample_paths(config, scenario, rng)
    vec = port_channel(config, paths, scenario.tilt_angle)
    return ChannelRealization(vec, config, paths.distance)


def generate_channels(config, scenario, rng):
    """Channels of all users for one drop, shape (n_users, n_ports)."""
    return np.stack([generate_user(config, scenario, rng).vector
                     for _ in range(scenario.n_users)])


def line_panel_order(config):
    """Permutation from port order to panel-major order.

    Entry ``i`` of the result is the port index placed at position ``i`` of
    the panel-major vector ``[panel 0 (pol A, pol B), panel 1 (...), ...]``.
    """
    block = config.ports_v * config.n_elems_h
    idx = []
    for m in range(config.n_panels_h):
        for p in range(config.n_pol):
            start = p * config.ports_per_pol + m * block
            idx.extend(range(start, start + block))
    return np.array(idx, dtype=np.intp)
