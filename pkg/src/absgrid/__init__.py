"""Domain abstraction of grid-structured answer set programs with quad-tree refinement."""
from .syntax import Atom, ParseError, Program, Rule, Var, parse_program
from .grounding import GroundProgram, ground
from .solver import Interpretation, SolveBudget, enumerate_answer_sets, is_answer_set, solve_minimize
from .domain import DomainMapping
from .quadtree import GridMapping, initial_mapping, identity_mapping, mapping_cost, split
from .abstraction import abstract_program
from .cegar import Strategy, LoopOptions, check_concreteness, run_loop

__version__ = "0.1.0"
