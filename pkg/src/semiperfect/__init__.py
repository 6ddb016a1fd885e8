"""
Exact computations in topologically semiperfect rings.
"""
from .adic_core import AdicScalar, Backend, RingDescriptor, invert, residue, valuation
from .covers import (CoverResult, FgDiscreteModule, RadicalResult, Side,
                     generating_subfamily, projective_cover_fg,
                     projective_cover_fg_contramodule, projective_cover_simple,
                     radical_of_fg_discrete, relation_component,
                     relation_values)
from .duality import (Direction, DualityMatrix, FormalFamily, GeometricTail,
                      MatrixSide, apply_product_map, check_row_zero_convergent,
                      dual_matrix, eval_contraaction, flatten,
                      projector_duality, projector_duality_holds, then)
from .endo_topology import (Decision, EndoElement, InvertibilityResult,
                            OpenIdealDescriptor, SemisimpleElement,
                            TranslatedFamily, canonical_chain, compose,
                            decide_invertible, is_locally_split_mono,
                            is_zero_convergent, jacobson_membership,
                            project_to_semisimple, section_lift,
                            section_lift_family)
from .idempotent_calculus import (IdempotentFamily, certify_semiperfect,
                                  hensel_lift_idempotent, lift_convergent_family,
                                  lift_primitive_family,
                                  orthogonalize_finite_family,
                                  push_family_through_quotient, split_idempotent,
                                  validate_family)
from .matrices import Band, BlockMatrix, PatternMatrix
from .module_decomp import (DecomposedModule, LocalModule, hom_block_shape,
                            smith_decompose)

__version__ = "0.1.0"
