"""Uncertain and credal evidence in Bayesian and credal networks."""

from .bn import Query, marginal, posterior
from .credal import EngineConfig, IntervalPosterior, check_cpk, cn_update_oracle, gen_hard_instance, update
from .errors import (
    CredevError,
    DegeneratePoolError,
    DocumentError,
    InconsistentEvidenceError,
    InvalidEvidenceError,
    PreconditionError,
    ResourceLimitError,
    ValidationError,
)
from .evidence import (
    CredalSoftEvidence,
    CredalVirtualEvidence,
    HardEvidence,
    IDMCounts,
    IncompleteObservation,
    SoftEvidence,
    VirtualEvidence,
    absorb_all,
    conservative_update,
    cse_to_cve,
    cse_update,
    cve_to_cse,
    cve_update,
    idm_to_cve,
    se_to_ve,
    se_update,
    ve_to_se,
    ve_update,
)
from .model import (
    CCPT,
    CPT,
    ECPT,
    PMF,
    BayesianNetwork,
    CredalNetwork,
    CredalSet,
    IntervalCS,
    Variable,
    shadow,
    validate_network,
)
from .pooling import OpinionSet, credal_logop, logop

__all__ = [
    "BayesianNetwork", "CCPT", "CPT", "CredalNetwork", "CredalSet", "CredalSoftEvidence",
    "CredalVirtualEvidence", "CredevError", "DegeneratePoolError", "DocumentError", "ECPT",
    "EngineConfig", "HardEvidence", "IDMCounts", "InconsistentEvidenceError", "IncompleteObservation",
    "IntervalCS", "IntervalPosterior", "InvalidEvidenceError", "OpinionSet", "PMF",
    "PreconditionError", "Query", "ResourceLimitError", "SoftEvidence", "ValidationError",
    "Variable", "VirtualEvidence", "absorb_all", "check_cpk", "cn_update_oracle",
    "conservative_update", "credal_logop", "cse_to_cve", "cse_update", "cve_to_cse", "cve_update",
    "gen_hard_instance", "idm_to_cve", "logop", "marginal", "posterior", "se_to_ve", "se_update",
    "shadow", "update", "validate_network", "ve_to_se", "ve_update",
]
