"""Rotating Oseen resolvent toolkit: spectral solves, lattice arithmetic and a
resonant counterexample family with certified lower bounds."""

from .core import (ClosedFormField, GridField, Params, PhysicalBox, SpectralGrid, TPSeries,
                   apply_resolvent_operator, leray_project, lq_norm, rotation_term)
from .counterexample import blowup_ratio, build_item, divergence_probe
from .errors import (BandwidthUnknown, Infeasible, InfimumZero, IrrationalRatio, NotFound,
                     OseenLabError, SingularPoint, SmallS, ValidationError)
from .estimates import embedding_probe, resolvent_estimate_report, sobolev_exponents
from .resonance import (approx_below, classify_ratio, min_positive_element, odd_combination_in)
from .solver import assemble_tp, marcinkiewicz_probe, solve_aux_mode, solve_resolvent_rotating

__version__ = "0.1.0"
