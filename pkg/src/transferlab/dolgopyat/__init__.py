"""Quantitative oscillatory-cancellation machinery for twisted transfer operators."""

from .calculus import ETA_MIN, boundary_pair, calculus_lemma_check, calculus_sweep
from .cancellation import (
    DEFAULT_ETA,
    CancellationReport,
    ChiConstructionError,
    ChiFunction,
    ConePair,
    cancellation_probe,
    chi_build,
    domination,
)
from .context import OutOfScopeError, TwistedContext
from .contraction import ContractionReport, cone_iterate, l2_contraction
from .decay import (
    DecayReport,
    ResolventReport,
    fit_decay,
    norm_decay,
    resolvent_bound,
    threshold_certificate,
    uniform_refit,
)
from .federer import FedererTable, federer_crosscheck, federer_table
from .lasota_yorke import LasotaYorkeEstimate, contraction_rate, lasota_yorke_estimate
from .semiflow import CorrelationReport, bump_observable, semiflow_correlation
from .uni import InvalidPairError, UniCertificate, psi_pair, uni_certificate

__all__ = [
    "DEFAULT_ETA",
    "ETA_MIN",
    "CancellationReport",
    "ChiConstructionError",
    "ChiFunction",
    "ConePair",
    "ContractionReport",
    "CorrelationReport",
    "DecayReport",
    "FedererTable",
    "InvalidPairError",
    "LasotaYorkeEstimate",
    "OutOfScopeError",
    "ResolventReport",
    "TwistedContext",
    "UniCertificate",
    "boundary_pair",
    "bump_observable",
    "calculus_lemma_check",
    "calculus_sweep",
    "cancellation_probe",
    "chi_build",
    "cone_iterate",
    "contraction_rate",
    "domination",
    "federer_crosscheck",
    "federer_table",
    "fit_decay",
    "l2_contraction",
    "lasota_yorke_estimate",
    "norm_decay",
    "psi_pair",
    "resolvent_bound",
    "semiflow_correlation",
    "threshold_certificate",
    "uni_certificate",
    "uniform_refit",
]
