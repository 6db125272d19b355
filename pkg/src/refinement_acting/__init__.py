"""Hierarchical acting with refinement methods, rollout-based method selection and learned guidance."""
from .core import Domain, DomainError, Frame, MethodInstance, RefinementStack, State, Task, applicable
from .engine import PlannerSelector, PolicySelector, ReactiveSelector, RunReport, rae_run
from .planner import Planner, PlannerConfig, SelectionFailure, select_method
from .sim import Environment, Problem, Rng
from .utility import compose, efficiency

__version__ = "0.1.0"

__all__ = [
    "Domain", "DomainError", "Frame", "MethodInstance", "RefinementStack", "State", "Task", "applicable",
    "PlannerSelector", "PolicySelector", "ReactiveSelector", "RunReport", "rae_run",
    "Planner", "PlannerConfig", "SelectionFailure", "select_method",
    "Environment", "Problem", "Rng", "compose", "efficiency",
]
