"""Elicited progressive hedging for multistage stochastic variational inequalities."""

from .scenario_space import Policy, ScenarioSpace
from .model import FeasibleSet, SviProblem, TwoStageSlcp, affine
from .pha import PhaConfig, SolveReport, pha_solve

__all__ = [
    "Policy",
    "ScenarioSpace",
    "FeasibleSet",
    "SviProblem",
    "TwoStageSlcp",
    "affine",
    "PhaConfig",
    "SolveReport",
    "pha_solve",
]
