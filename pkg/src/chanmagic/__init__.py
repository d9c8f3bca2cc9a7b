"""Magic monotones and quasiprobability simulators for quantum channels."""
from .channels import KrausChannel, choi_of
from .monotones import (
    channel_robustness,
    choi_robustness,
    magic_capacity,
    r_cpr,
    robustness_of_magic,
)
from .pauli_tableau import PauliString, StabilizerTableau
from .simulators import CircuitSpec, dynamic_simulate, exact_expectation, precompute_static, static_simulate
from .stab_catalog import enumerate_states

__version__ = "0.1.0"
