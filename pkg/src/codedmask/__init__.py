"""Coded-aperture design toolkit.

Waterfilling LMMSE lower bounds, spectrally flat residue masks, and greedy
sign-cortege synthesis of near-optimal apertures, with numerically verified
design certificates.
"""

from .model import (
    Aperture,
    DesignCertificate,
    ImagingConfig,
    ScenePrior,
    best_random_onoff,
    lmmse,
    random_onoff,
    sample_prior,
)
from .spectra import basis_vector, beta, dft, m_bound
from .waterfill import lower_bound, optimal_rho, power_budget, waterfill
from .flatseq import (
    ResidueFamily,
    find_residue_lengths,
    flat_design,
    loss_factor,
    residue_sequence,
    worst_case_penalty,
)
from .nazarov import (
    DesignError,
    design_aperture,
    design_aperture_2d,
    greedy_cortege,
    potential,
)

__version__ = "0.1.0"
