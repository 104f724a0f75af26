"""funnelsim: simulation and verification toolkit for funnel control of
nonlinear systems with higher relative degree.
"""

from .bounds import (
    BoundsInput,
    BoundsResult,
    alpha_dagger,
    alpha_tilde,
    apriori_bounds,
    check_against_trajectory,
)
from .controller import (
    InitialCondition,
    RhoResult,
    baseline_control_r2,
    baseline_control_r3,
    build_info_vector,
    check_initial_condition,
    funnel_control,
    gamma,
    rho,
)
from .design import (
    AlphaFn,
    DesignParams,
    FunnelFn,
    SwitchingFn,
    mu0_on_grid,
    phi_values,
)
from .eigen import eigenvalues
from .errors import (
    ConfigError,
    ConvergenceError,
    DegenerateInput,
    DomainError,
    FunnelSimError,
    FunnelViolation,
    HistoryUnderflow,
    HypothesisMismatch,
    InitialConditionRejected,
    LookaheadError,
    MismatchedScenario,
    NoRelativeDegree,
    NumericalRankError,
    ParameterError,
    ShapeError,
    SingularMass,
    UnknownPreset,
)
from .linear_analysis import (
    BIForm,
    StateSpace,
    byrnes_isidori,
    relative_degree,
    sign_definiteness,
    zero_dynamics_stable,
)
from .operators import (
    History,
    InternalDynamicsOperator,
    LinearInternalOperator,
    OperatorT,
    PointDelayOperator,
    StaticOperator,
    identity_operator,
    zero_operator,
)
from .reference import (
    RefSignal,
    constant_reference,
    custom_reference,
    ref_preset,
    ref_values,
)
from .scenario import Scenario, build_scenario, load_scenario
from .sim import (
    BaselineR2Params,
    BaselineR3Params,
    SimConfig,
    Trajectory,
    derivative_consistency,
    simulate,
)
from .systems import (
    DeadZone,
    FunctionalSystem,
    dead_zone,
    dead_zone_example_system,
    integrator_chain,
    linear_to_functional,
    mass_on_car,
    mass_on_car_state_space,
    point_delay_operator,
    probe_example_system,
    robot_manipulator,
)
from .verify import (
    ChiProbe,
    Verdict,
    asymptotic_tracking_check,
    chi_estimate,
    compare_runs,
    funnel_margin,
    high_gain_verdict,
    refine_probe,
)

__version__ = "0.1.0"
