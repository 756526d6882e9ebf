"""Type-checking kernel for LF with explicit substitutions and meta-variables."""
from .errors import CmttError, FuelExhausted, ParseError, TypeCheckError
from .evaluator import Fuel, normalize, whnf
from .frontend import parse_signature, parse_term, print_expression, resolve
from .syntax import (
    App, Cons, Const, Expression, KIND, Lam, MCons, MComp, MShift, MetaClo,
    MetaOnSub, MetaVar, Pi, Shift, Sort, SubClo, SubComp, TYPE, Universe, Var,
)

__version__ = "0.1.0"
