"""Ordered multiple testing with Adaptive SeqStep.

Submodules
----------
procedures
    BH, Storey-BH, Selective/Adaptive SeqStep and accumulation tests.
vct_model
    The varying-coefficient two-groups model and normal numerics.
asymptotic
    Critical fractions, stopping fractions and limiting power.
simulation
    Monte Carlo harness and figure reproductions.
"""

from .kernels import BACKEND
from .procedures import (
    AccumulationFn,
    PValueSequence,
    ProcedureKind,
    ProcedureSpec,
    RejectionOutcome,
    accumulation_test,
    adaptive_seqstep,
    apply_procedure,
    bh_procedure,
    selective_seqstep,
    storey_bh,
)
from .vct_model import AlternativeCDF, VCTParams, b_max, sample_vct

__version__ = "0.1.0"
