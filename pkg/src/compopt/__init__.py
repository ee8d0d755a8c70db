"""Compositional optimization on undirected wiring diagrams."""
from .finset import FinFunction, Cospan, PushoutResult, compose, coproduct, identity, preimage, pushout
from .freevect import pullback_apply, pullback_matrix, pushforward_apply, pushforward_matrix
from .uwd import CONCAVE, CONVEX, UWD, identity_uwd, iso_check, permute_boxes, substitute, validate
from .opensys import FinsetAlgebra, OpenObject, closed, oapply
from .problems import (
    OPT, SADDLE, Objective, SaddleObjective, opt_act, opt_combine, opt_compose,
    quadratic, saddle_act, saddle_combine, saddle_compose,
)
from .dynamics import (
    DYNAM, DYNAM_D, NDD, NDD_D, DiscreteMap, SelectorField, VectorField,
    dynam_act, dynam_combine, dynam_d_act, euler, euler_ndd, ndd_act, ndd_combine,
    ndd_d_act, simulate, simulate_message_passing,
)
from .morphisms import (
    check_naturality, gad, gd, generate_solver, grad_flow, inf_objective, pd_subg,
    subgrad_flow, supergrad_flow,
)
from .flownet import (
    FLOWNET, FlowNetwork, QuadraticCost, dual_decomposition_hierarchical,
    dual_decomposition_standard, flownet_act, flownet_combine, incidence_matrix, netflow,
)

__version__ = "0.1.0"
