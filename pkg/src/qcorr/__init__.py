"""Quantum correlations on finite quantum spaces: construction and verification."""
from types import ModuleType as _ModuleType

from .correlation import (ClassicalTable, CorrelationTensor, Realization, classical_table,
                          correlation_from_realization, correlation_from_trace,
                          deterministic_realization, entangled_sync_value,
                          from_classical_table, is_nonsignalling, is_synchronous,
                          product_realization, sync_partial_sums, sync_sum)
from .cpmap import (BlockLinearMap, block_permutation_map, choi_blocks, identity_map,
                    is_star_homomorphism, is_tracial, is_ucp, kraus_map, state_map,
                    transpose_map)
from .errors import (DomainError, InternalConsistencyError, PreconditionError, QcorrError,
                     RankError, UnsatisfiableError, UnsupportedInputError)
from .qfamily import (POVMFamily, QuantumFamily, commutes_second_leg, merge_family,
                      multiplicity_solutions, onepoint_family, opposite_family,
                      pisier_decompose, pullback_family, random_family, random_povm_family,
                      slice_span, split_family, validate_family, validate_povm)
from .qspace import (AlgebraElement, EntangledVector, FiniteQuantumSpace, StateFunctional,
                     act_on_vector, is_positive, matrix_unit, maximally_entangled_vector,
                     tensor, tensor_space, tensor_unit_index, unit, zero)
from .sync_analysis import (SyncReport, algebra_closure, analyze_synchronous_realization,
                            gns_realization_from_trace, trace_check_on_algebra)

__all__ = [name for name, obj in dict(globals()).items()
           if not name.startswith("_") and not isinstance(obj, _ModuleType)]
