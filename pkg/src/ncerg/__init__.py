"""Numerical laboratory for square-function and mean ergodic inequalities on finite noncommutative L_p spaces."""
from .algebra import AlgebraShape, Element, func_calc, random_element
from .cz import cuculescu, cz_decompose, cz_verify
from .dyadic import DyadicInterval, OperatorSequence, bmo_norm, cond_expectation
from .ergodic import NestedSequence, ergodic_average, nested_split, square_stat, transference
from .lp import INF, lp_norm, weak_lp_quasinorm
from .operators import SuperOperator, YeadonTriple, make_power_bounded, make_unitary_conjugation, make_yeadon
from .rc import ElementSequence, khintchine_norm, rc_norm, rc_sum_oracle

__version__ = "0.1.0"

__all__ = [
    "AlgebraShape", "Element", "func_calc", "random_element",
    "cuculescu", "cz_decompose", "cz_verify",
    "DyadicInterval", "OperatorSequence", "bmo_norm", "cond_expectation",
    "NestedSequence", "ergodic_average", "nested_split", "square_stat", "transference",
    "INF", "lp_norm", "weak_lp_quasinorm",
    "SuperOperator", "YeadonTriple", "make_power_bounded", "make_unitary_conjugation", "make_yeadon",
    "ElementSequence", "khintchine_norm", "rc_norm", "rc_sum_oracle",
]
