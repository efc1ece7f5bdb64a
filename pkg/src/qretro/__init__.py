"""Retrodicted pre-measurement states and measurement-quality metrics for optical detectors."""

__version__ = "0.1.0"

from .detectors import (
    ApdParams,
    HomodyneParams,
    apd_povm,
    hd_binned_povm,
    hd_povm_element,
    pnrd_povm,
    predictive_prob,
)
from .errors import NoConvergence, QRetroError, TruncationWarning
from .fock import (
    FockOperator,
    FockSpace,
    Povm,
    QuantumState,
    coherent_state,
    fidelity,
    fidelity_pure,
    fock_state,
    purity,
)
from .metrics import (
    effective_efficiency,
    fidelity_off,
    fidelity_on_profile,
    non_gaussianity,
    projectivity,
)
from .retrodiction import (
    ProbeEnsemble,
    bayes_retrodict,
    conditioned_state,
    premeasurement_state,
    tmsv,
)
from .tomography import lambda_propositions, maxlik_povm, qdt_retrodict, qst_premeasurement, simulate_counts
from .wigner import WignerGrid, negativity_on, negativity_threshold, wigner_on_closed, wigner_transform

__all__ = [name for name in dir() if not name.startswith("_")]
