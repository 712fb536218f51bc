"""Joint transceiver and offset design for multi-color visible light communication.

Precoder, DC offset and equalizer design under input-dependent shot noise
and lighting constraints (dimming level, color ratio, non-negative LED
intensity), for point-to-point MIMO links and white-LED multi-user
downlink/uplink, with scaled ZF and SVD baselines, a robust design under
norm-bounded channel error and a Monte-Carlo SER simulator.
"""

from .baselines import svd_design, zf_design, zf_downlink_design
from .channel import Channel, CaseId, UncertaintyModel, case_channel, make_coc_matrix, make_overall_channel, \
    uncertainty_ball
from .mse import MultiUserDesign, P2PDesign
from .multiuser import duality_map, jtod_downlink, jtod_uplink, shot_duality_gap
from .optimizer import OptimizerConfig, jtod_p2p, min_dimming
from .robust import robust_jtod, worst_case_mse
from .signal import InfeasibleError, LightingConstraints, SystemParams, check_feasible, lighting_constraints

__version__ = "0.1.0"

__all__ = [
    "Channel",
    "CaseId",
    "UncertaintyModel",
    "case_channel",
    "make_coc_matrix",
    "make_overall_channel",
    "uncertainty_ball",
    "SystemParams",
    "LightingConstraints",
    "lighting_constraints",
    "check_feasible",
    "InfeasibleError",
    "P2PDesign",
    "MultiUserDesign",
    "OptimizerConfig",
    "jtod_p2p",
    "min_dimming",
    "zf_design",
    "svd_design",
    "zf_downlink_design",
    "jtod_downlink",
    "jtod_uplink",
    "duality_map",
    "shot_duality_gap",
    "robust_jtod",
    "worst_case_mse",
]
