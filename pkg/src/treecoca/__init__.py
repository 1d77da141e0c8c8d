"""Distributed dual coordinate ascent over tree-structured worker networks.

Leaves run stochastic dual coordinate ascent on their data blocks, every
aggregating node averages its children's updates, and a simulated clock
charges computation and link delays so topologies and local-iteration counts
can be compared in wall-clock terms.
"""

from treecoca.data import CsvSchema, LabelModel, load_csv, synth_gaussian
from treecoca.delay import DelayScenario, optimal_h
from treecoca.losses import LossSpec, dual_objective, duality_gap, primal_objective
from treecoca.model import Dataset, DataPartition, TreeTopology, build_topology, partition_evenly
from treecoca.solver import run_root, tree_dual_method
from treecoca.theory import bound_curve_star, bound_curve_tree, rho_min

__version__ = "0.1.0"

__all__ = [
    "CsvSchema",
    "DataPartition",
    "Dataset",
    "DelayScenario",
    "LabelModel",
    "LossSpec",
    "TreeTopology",
    "bound_curve_star",
    "bound_curve_tree",
    "build_topology",
    "dual_objective",
    "duality_gap",
    "load_csv",
    "optimal_h",
    "partition_evenly",
    "primal_objective",
    "rho_min",
    "run_root",
    "synth_gaussian",
    "tree_dual_method",
]
