"""Simulation and verification of quantum Eddington clock-synchronization protocols."""
from .channel_algebra import (
    ChannelParams,
    ChoiOperator,
    CptpReport,
    PauliTransferMatrix,
    choi_of,
    compose,
    is_cptp,
    is_phase_covariant,
    make_channel,
    make_general_channel,
    project_equatorial,
    projected_channel_action,
)
from .estimation import (
    BitEstimate,
    ShotSampler,
    SyncEstimate,
    empirical_uncertainty,
    estimate_bit,
    estimate_offset,
    sample_shots,
)
from .protocols import (
    Kind,
    ProtocolOutcome,
    ProtocolSpec,
    analytic_expectation,
    fringe_probabilities,
    nominal_uncertainty,
    simulate_expectation,
)
from .state_engine import (
    DensityOperator,
    Frame,
    FrameOffset,
    PauliString,
    apply_channel_at,
    apply_gate,
    cat_state,
    frame_rotate,
    pauli_expectation,
    plus_state,
)

__version__ = "0.1.0"
