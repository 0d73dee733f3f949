"""Explicit convergence-rate certificates for underdamped Langevin dynamics."""
from .certificate import (Certificate, ModelParams, VillaniCertificate, build_certificate,
                          growth_constants_for, villani_certificate)
from .config import RunConfig
from .dynamics import SamplerConfig, SimConfig, sample_invariant, simulate_ensemble
from .errors import (CapabilityError, CertificateError, DomainError, NumericsError,
                     SetupError, StatisticsError)
from .harness import RateEstimate, compare_certificate, estimate_decay_rate
from .lyapunov import LyapunovWeight, drift_check
from .potential import (DoubleWell, PhasePoint, Potential, SingleWell, SingularPair,
                        make_potential)
from .spectral import local_poincare_estimate

__version__ = "0.1.0"

__all__ = [
    "CapabilityError", "Certificate", "CertificateError", "DomainError", "DoubleWell",
    "LyapunovWeight", "ModelParams", "NumericsError", "PhasePoint", "Potential",
    "RateEstimate", "RunConfig", "SamplerConfig", "SetupError", "SimConfig", "SingleWell",
    "SingularPair", "StatisticsError", "VillaniCertificate", "build_certificate",
    "compare_certificate", "drift_check", "estimate_decay_rate", "growth_constants_for",
    "local_poincare_estimate", "make_potential", "sample_invariant", "simulate_ensemble",
    "villani_certificate",
]
