"""Exact probabilistic polynomials for small Boolean circuits."""

from .poly import (CapExceeded, MissingAssignment, ArityMismatch, Polynomial, compose, evaluate,
                   multilinear_extension, multiply, restrict)
from .circuits import Builder, Circuit, TruthTable, approx_majority, or_n, and_n, parity_n
from .probpoly import (ProbPoly, amplify_general, amplify_onesided_or, build_pseudo_majority,
                       circuit_to_probpoly, or_base, verify_pseudo_majority)
from .ppw import PPW, PPWSample, ppw_amplify, ppw_base_or, ppw_for_circuit, verify_witness_soundness
from .kwise import (Design, KWiseFamily, build_kwise, design_bound_check, fooling_gap_exact,
                    fooling_sweep, greedy_design, verify_kwise)
from .lblab import (Restriction, RestrictionTrace, anticoncentration_probe, apply, disjoint_terms,
                    err_level, is_good, run_restriction_process, sample_restriction,
                    verify_restriction_identity)

__version__ = "0.1.0"
