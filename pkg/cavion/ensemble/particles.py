"""
Nanoparticle Ensembles
Sampling of doped nanoparticles and the ions they carry.
"""

import math
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from .. import config
from ..errors import InvalidParameterError
from ..rng import Stream, as_generator, substream

FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))


@dataclass(frozen=True)
class ParticleSpec:
    """Size, doping and spectral distribution of a nanoparticle batch."""
    diameter_mean_nm: float = config.DIAMETER_MEAN_NM
    diameter_sd_nm: float = config.DIAMETER_SD_NM
    ion_density_per_um3: float = config.ION_DENSITY_PER_UM3
    c2_fraction: float = config.C2_FRACTION
    inhom_center_hz: float = config.INHOM_CENTER_HZ
    inhom_fwhm_hz: float = config.INHOM_FWHM_HZ
    homwidth_base_hz: float = config.HOMWIDTH_BASE_HZ
    homwidth_surface_hz: float = config.HOMWIDTH_SURFACE_HZ
    surface_layer_nm: float = config.SURFACE_LAYER_NM
    sd_sigma_hz: float = config.SD_SIGMA_HZ
    sd_tau_s: float = config.SD_TAU_S
    zeeman_slope_hz_per_mt: float = config.ZEEMAN_SLOPE_HZ_PER_MT

    def __post_init__(self):
        if not self.diameter_mean_nm > 0:
            raise InvalidParameterError("diameter_mean_nm must be > 0")
        if self.diameter_sd_nm < 0:
            raise InvalidParameterError("diameter_sd_nm must be >= 0")
        if self.ion_density_per_um3 < 0:
            raise InvalidParameterError("ion_density_per_um3 must be >= 0")
        if not 0.0 <= self.c2_fraction <= 1.0:
            raise InvalidParameterError("c2_fraction must be in [0, 1]")
        for name in ("inhom_fwhm_hz", "homwidth_base_hz", "homwidth_surface_hz", "sd_tau_s"):
            if not getattr(self, name) > 0:
                raise InvalidParameterError(f"{name} must be > 0")
        if self.homwidth_surface_hz < self.homwidth_base_hz:
            raise InvalidParameterError("homwidth_surface_hz must be >= homwidth_base_hz")
        if self.surface_layer_nm < 0 or self.sd_sigma_hz < 0:
            raise InvalidParameterError("surface_layer_nm and sd_sigma_hz must be >= 0")

    @property
    def inhom_sigma_hz(self) -> float:
        return self.inhom_fwhm_hz / FWHM_PER_SIGMA


@dataclass(frozen=True)
class Ion:
    """One addressed (C2-site) ion."""
    position_nm: Tuple[float, float, float]  # relative to particle center
    center_freq_hz: float
    hom_fwhm_hz: float
    dipole_polar_angle: float = 0.0
    sd_sigma_hz: float = config.SD_SIGMA_HZ
    sd_tau_s: float = config.SD_TAU_S
    zeeman_slope_hz_per_mt: float = config.ZEEMAN_SLOPE_HZ_PER_MT

    def __post_init__(self):
        if not self.hom_fwhm_hz > 0:
            raise InvalidParameterError("hom_fwhm_hz must be > 0")
        if not self.sd_tau_s > 0:
            raise InvalidParameterError("sd_tau_s must be > 0")
        if self.sd_sigma_hz < 0:
            raise InvalidParameterError("sd_sigma_hz must be >= 0")

    @property
    def radius_nm(self) -> float:
        return math.sqrt(sum(c * c for c in self.position_nm))


@dataclass
class Nanoparticle:
    """A particle on the flat mirror and its addressed ions."""
    diameter_nm: float
    x_um: float = 0.0
    y_um: float = 0.0
    height_nm: float = None  # center above the mirror; resting particle by default
    ions: List[Ion] = field(default_factory=list)
    scatter_loss_ppm: float = config.SCATTERER_LOSS_PPM
    n_total_ions: int = None
    inhom_center_hz: float = config.INHOM_CENTER_HZ
    inhom_fwhm_hz: float = config.INHOM_FWHM_HZ

    def __post_init__(self):
        if not self.diameter_nm > 0:
            raise InvalidParameterError("diameter_nm must be > 0")
        if self.height_nm is None:
            self.height_nm = self.diameter_nm / 2.0
        if self.n_total_ions is None:
            self.n_total_ions = len(self.ions)
        if self.scatter_loss_ppm < 0:
            raise InvalidParameterError("scatter_loss_ppm must be >= 0")
        radius = self.diameter_nm / 2.0
        for i, ion in enumerate(self.ions):
            if ion.radius_nm > radius * (1.0 + 1e-12):
                raise InvalidParameterError(f"ion {i} lies outside the particle")

    @property
    def inhom_sigma_hz(self) -> float:
        return self.inhom_fwhm_hz / FWHM_PER_SIGMA

    def ion_positions_um(self) -> np.ndarray:
        """(n, 3) ion positions in mirror coordinates, um (z above the mirror)."""
        if not self.ions:
            return np.zeros((0, 3))
        rel = np.array([ion.position_nm for ion in self.ions], dtype=float) * 1e-3
        rel[:, 0] += self.x_um
        rel[:, 1] += self.y_um
        rel[:, 2] += self.height_nm * 1e-3
        return rel


def volume_um3(diameter_nm: float) -> float:
    d_um = diameter_nm * 1e-3
    return math.pi / 6.0 * d_um**3


def rayleigh_loss_ppm(diameter_nm: float) -> float:
    """Scattering loss scaled as d^6 from the 170 nm reference particle."""
    ratio = diameter_nm / config.SCATTERER_REFERENCE_DIAMETER_NM
    return config.SCATTERER_LOSS_PPM * ratio**6


def sample_ions(diameter_nm: float, spec: ParticleSpec, count: int, rng) -> List[Ion]:
    """
    Draw `count` ions uniformly in a sphere of the given diameter.

    Frequencies follow the Gaussian inhomogeneous line, dipoles are isotropic,
    and ions within `surface_layer_nm` of the surface get a log-uniform width
    between the bulk and surface values.
    """
    if count < 0:
        raise InvalidParameterError("ion count must be >= 0")
    rng = as_generator(rng)
    if count == 0:
        return []

    radius = diameter_nm / 2.0
    direction = rng.standard_normal((count, 3))
    direction /= np.linalg.norm(direction, axis=1)[:, None]
    r = radius * rng.random(count) ** (1.0 / 3.0)
    positions = direction * r[:, None]

    freqs = rng.normal(spec.inhom_center_hz, spec.inhom_sigma_hz, count)
    angles = np.arccos(rng.uniform(-1.0, 1.0, count))

    depth = radius - r
    log_lo, log_hi = np.log(spec.homwidth_base_hz), np.log(spec.homwidth_surface_hz)
    surface_widths = np.exp(rng.uniform(log_lo, log_hi, count))
    widths = np.where(depth > spec.surface_layer_nm, spec.homwidth_base_hz, surface_widths)

    return [
        Ion(
            position_nm=(float(p[0]), float(p[1]), float(p[2])),
            center_freq_hz=float(f),
            hom_fwhm_hz=float(w),
            dipole_polar_angle=float(a),
            sd_sigma_hz=spec.sd_sigma_hz,
            sd_tau_s=spec.sd_tau_s,
            zeeman_slope_hz_per_mt=spec.zeeman_slope_hz_per_mt,
        )
        for p, f, w, a in zip(positions, freqs, widths, angles)
    ]


def sample_nanoparticle(
    spec: ParticleSpec, rng_seed: int, x_um: float = 0.0, y_um: float = 0.0
) -> Nanoparticle:
    """Sample one particle: size, Poisson ion count, C2 subset and ions."""
    rng = substream(rng_seed, Stream.SAMPLE)

    diameter = rng.normal(spec.diameter_mean_nm, spec.diameter_sd_nm)
    while diameter <= 0:
        diameter = rng.normal(spec.diameter_mean_nm, spec.diameter_sd_nm)
    diameter = float(diameter)

    n_total = int(rng.poisson(spec.ion_density_per_um3 * volume_um3(diameter)))
    n_c2 = int(rng.binomial(n_total, spec.c2_fraction)) if n_total else 0
    ions = sample_ions(diameter, spec, n_c2, rng)

    return Nanoparticle(
        diameter_nm=diameter,
        x_um=x_um,
        y_um=y_um,
        ions=ions,
        scatter_loss_ppm=rayleigh_loss_ppm(diameter),
        n_total_ions=n_total,
        inhom_center_hz=spec.inhom_center_hz,
        inhom_fwhm_hz=spec.inhom_fwhm_hz,
    )


def spectral_density(particle: Nanoparticle, freq_hz):
    """Expected addressed-ion density at freq_hz, in ions per GHz."""
    sigma = particle.inhom_sigma_hz
    f = np.asarray(freq_hz, dtype=float)
    pdf = np.exp(-0.5 * ((f - particle.inhom_center_hz) / sigma) ** 2) / (sigma * math.sqrt(2 * math.pi))
    density = len(particle.ions) * pdf * 1e9
    return float(density) if density.ndim == 0 else density


@dataclass
class IonCountReport:
    """Density-model ion counts next to the published figure."""
    diameter_nm: float
    expected_total: float
    expected_c2: float
    quoted_c2: float
    quoted_c2_fraction: float
    quoted_implied_total: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def ion_count_report(spec: ParticleSpec = None, diameter_nm: float = 170.0) -> IonCountReport:
    spec = spec or ParticleSpec()
    total = spec.ion_density_per_um3 * volume_um3(diameter_nm)
    return IonCountReport(
        diameter_nm=diameter_nm,
        expected_total=total,
        expected_c2=total * spec.c2_fraction,
        quoted_c2=float(config.QUOTED_C2_IONS),
        quoted_c2_fraction=config.C2_FRACTION,
        quoted_implied_total=config.QUOTED_C2_IONS / config.C2_FRACTION,
    )
