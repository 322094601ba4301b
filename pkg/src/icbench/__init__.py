"""Limited-angle, low-photon X-ray tomography bench for synthetic ICs."""

from .circuits import (
    BinaryVolume,
    CircuitParams,
    LayerKind,
    copper_statistics,
    generate_circuit,
    layer_kind_of,
)
from .geometry import Geometry, Spectrum, SpectralLine, calibrate_alpha, default_geometry, default_spectrum
from .projector import SystemMatrix, build_system_matrix
from .detection import Measurements, expected_counts, sample_measurements
from .recon import Approximant, SolverConfig, neg_log_likelihood, nll_gradient, reconstruct_ml
from .ber import (
    SINGLE_ERROR_LINE,
    BerReport,
    ClassPdfModel,
    decision_threshold,
    error_rates,
    fit_class_pdfs,
    sweep_summary,
)
from .formats import (
    atomic_write_bytes,
    atomic_write_json,
    read_cfv,
    read_json,
    read_rad,
    read_rec,
    write_cfv,
    write_rad,
    write_rec,
)
from .pipeline import Condition, Workspace, condition_hash
from .errors import ConfigError, DomainError, IcBenchError

__version__ = "0.1.0"
