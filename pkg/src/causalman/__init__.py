"""Deterministic simulator of a press-fit production line as a structural causal model."""

from .line import LineConfig, build, node_census, preset
from .projection import Admg, d_separated, latent_project, m_separated
from .sampling import BatchConfig, Dataset, observe, sample_batch, sample_schedule
from .scm import (HardIntervention, NodeSpec, ScmGraph, SoftIntervention, intervene, parents,
                  topological_order, validate)
from .tasks import builtin_task, ground_truth_effect

__version__ = "0.1.0"

__all__ = [
    "Admg", "BatchConfig", "Dataset", "HardIntervention", "LineConfig", "NodeSpec", "ScmGraph",
    "SoftIntervention", "build", "builtin_task", "d_separated", "ground_truth_effect", "intervene",
    "latent_project", "m_separated", "node_census", "observe", "parents", "preset",
    "sample_batch", "sample_schedule", "topological_order", "validate",
]
