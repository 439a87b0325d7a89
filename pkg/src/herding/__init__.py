"""Mean-field analysis and simulation of score herding in a multi-player game."""

from herding.distributions import ProbSeq, make_prob_seq
from herding.meanfield import ModelParams
from herding.policies import (
    AsymptoticClass,
    CumulativeF,
    RatioPower,
    ScoreLinear,
    Uniform,
    WeightTable,
)

__all__ = [
    "AsymptoticClass",
    "CumulativeF",
    "ModelParams",
    "ProbSeq",
    "RatioPower",
    "ScoreLinear",
    "Uniform",
    "WeightTable",
    "make_prob_seq",
]
