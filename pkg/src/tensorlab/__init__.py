"""Small-tensor rank tools: GF(2) orbit census and complex decompositions."""

from .core import (DenseTensor, SimpleTerm, Decomposition, GroupElement,
                   F2Code, outer_product, act, permute_directions, encode,
                   decode, evaluate, tensors_close)
from .decompose import (Tolerance, PencilRoot, numerical_rank,
                        hyperdeterminant, is_superdiagonal, rank_222,
                        decompose_222, jordan_3x3, decompose_332,
                        singularize_slice, one_edge_reduce, two_edge_reduce,
                        decompose_333, verify)
from .f2 import (CensusTables, OrbitRecord, LargeOrbitRecord,
                 gl3_f2_elements, spin_orbit, classify_all, build_link_array,
                 compute_ranks, merge_large_orbits, full_census, oracle_rank,
                 oracle_rank_table, emit_table, save_census, load_census)

__version__ = "0.1.0"
