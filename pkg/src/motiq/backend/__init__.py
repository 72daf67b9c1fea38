"""Circuit compilation and statevector simulation."""
from .encoding import SCALE_RANGES, SCHEMES, encode, encode_batch
from .gates import GateSpec, gell_mann_basis, gell_mann_unitary
from .program import (CircuitProgram, Operation, ParamGroup, compile_program, run,
                      state_to_csv, to_qasm)
from .registry import (CONV_ANSATZ_KEYS, POOL_ANSATZES, Registry, UnitaryMapping,
                       registry_default)
from .simulator import apply_unitary, basis_state, embed, expectation_z, norm, readout

__all__ = [
    "SCALE_RANGES", "SCHEMES", "encode", "encode_batch", "GateSpec", "gell_mann_basis",
    "gell_mann_unitary", "CircuitProgram", "Operation", "ParamGroup", "compile_program",
    "run", "state_to_csv", "to_qasm", "CONV_ANSATZ_KEYS", "POOL_ANSATZES", "Registry",
    "UnitaryMapping", "registry_default", "apply_unitary", "basis_state", "embed",
    "expectation_z", "norm", "readout",
]
