"""Casimir-coupled cantilever dynamics: forces, spectra, and transfer protocols.

The package is organized bottom-up: dielectric response and reflection
(`materials`), sphere-plate force curves (`lifshitz`), time-domain mechanics
(`mechanics`), the effective two-mode spectrum (`spectral`), and measurement
protocols (`protocol`), with TOML configuration (`config`) and a CLI (`cli`)
on top.
"""

from .constants import C, HBAR, KB
from .materials import (
    GOLD,
    SILICON,
    Dielectric,
    Drude,
    MirrorStack,
    PerfectConductor,
    TransverseMode,
    bulk_reflection,
    layered_reflection,
    permittivity_imag_freq,
)
from .lifshitz import (
    CasimirField,
    FieldRangeError,
    Geometry,
    QuadratureError,
    QuadratureSpec,
    ThermalSetting,
    build_field,
    energy_per_area_T0,
    energy_per_area_finite_T,
    force_gradient_over_R,
    ideal_force,
    pfa_force,
    thermal_fraction,
)
from .mechanics import (
    Cantilever,
    ContactError,
    DriveSignal,
    ModulationSchedule,
    SnapInError,
    SystemConfig,
    Trajectory,
    demodulated_energies,
    drive_for_amplitude,
    estimate_effective_params,
    shifted_frequency,
    simulate,
)
from .spectral import (
    CouplingMap,
    EffectiveHamiltonian,
    EigenPair,
    coupling_from_modulation,
    detuning,
    eigenvalues,
    ep_locate,
    min_gap_along_path,
    surface_grid,
)
from .protocol import (
    ControlLoop,
    EfficiencyCurve,
    PSDMap,
    TransferResult,
    efficiency_vs_fmax,
    minimum_splitting,
    psd,
    psd_map,
    run_transfer_experiment,
    transduction_ratio,
    transduction_vs_fmod,
)
from .config import ConfigError, RunConfig, parse_config

__version__ = "0.1.0"
