"""Certified numerics for special flows over irrational rotations.

The package checks, by direct and error-bounded computation, the
quantitative steps behind the slow (parabolic) divergence of nearby orbits
in von Neumann flows: continued-fraction structure of the rotation, Birkhoff
cocycles of a roof with one jump, the three-case orbit classification, the
divergence windows, and the separation profiles of pairs of flow orbits.
"""
from .cfrac import (
    CFExpansion,
    OrbitPartition,
    expand,
    min_orbit_gap,
    orbit_partition,
    qn_alpha_norm,
    scale_index,
)
from .circle import Approx, Arc, CirclePoint, Dist, Verdict, arc_contains, dist_to_int, frac, shortest_arc
from .config import FlowSpec, load_config, loads_config
from .divergence import (
    Classification,
    Delta0Estimate,
    DivergenceWindows,
    PropCertificate,
    build_windows,
    classify_pair,
    delta0_estimate,
    sample_pair,
    verify_prop,
)
from .errors import *  # noqa: F401,F403
from .flow import CrossingSchedule, FlowPoint, SpecialFlow, crossing_schedule, flow_eval, flow_metric, make_flow
from .profile import (
    GridPartition,
    StepProfile,
    ScenarioPair,
    build_It,
    check_gamma_density,
    close_at_time_pair,
    closeness_profile,
    delta_threshold,
    hamming_distance,
)
from .roof import Roof, TrigPoly, birkhoff, birkhoff_prefix, c1_decay_estimate, hit_count, make_roof, normalize, \
    roof_bounds, roof_eval

__version__ = "0.1.0"
