"""Positive l2-induced norm bounds for discrete-time LTI systems.

Upper bounds from copositive (PSD + NN) multipliers on lifted systems,
lower bounds from DNN relaxations with Perron rounding, and small-gain
stability certificates for ReLU recurrent networks.
"""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .lti import StateSpace, LiftedSystem, lift, simulate, pack_signal, unpack_signal
from .posnorm import (
    GainCertificate,
    BoundReport,
    hinf_norm,
    upper_bound_pos,
    lower_bound_pos,
    pos_matnorm_exact_small,
    verify_certificate,
    bound_sweep,
)
from .rnn import RnnModel, certify, region_sweep, paper_template
