"""Rank of sparse random matrices: asymptotic formula and exact verification."""

from __future__ import annotations

from ._backend import BACKEND
from .degree import (
    DegreeDistribution,
    FinitePmf,
    PointMass,
    TruncatedPoisson,
    make_distribution,
    parse_distribution,
)
from .formula import EnsembleSpec, RankPrediction, Tightness, max_phi, phi, rank_prediction, rho
from .linalg import FieldSpec, SparseMatrix, frozen_set, kernel_basis, nullity, rank

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "DegreeDistribution",
    "EnsembleSpec",
    "FieldSpec",
    "FinitePmf",
    "PointMass",
    "RankPrediction",
    "SparseMatrix",
    "Tightness",
    "TruncatedPoisson",
    "frozen_set",
    "kernel_basis",
    "make_distribution",
    "max_phi",
    "nullity",
    "parse_distribution",
    "phi",
    "rank",
    "rank_prediction",
    "rho",
]
