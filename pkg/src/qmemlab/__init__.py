"""Simulation and numerical checks for conjugate coding against a memory-bounded receiver."""

from .bounds import (
    asymptotic_sweep,
    corollary_min_lengths,
    cross_norm_check,
    helstrom_pgm_guess,
    landau_pollak_check,
    tradeoff_check,
    tradeoff_for_strategy,
)
from .codebook import Decoder, DecoderFamily, natural_family, natural_z_family, validate
from .protocol import (
    Basis,
    BobStrategy,
    builtin_strategy,
    conditional_states,
    encode,
    epr_state,
    joint_conditional_state,
    posterior_distribution,
)

__version__ = "0.1.0"
