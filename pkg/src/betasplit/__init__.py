"""Critical beta-splitting random trees: samplers, exact recurrences, growth,
statistics, Newick I/O and a verification suite."""
from .splitcore import CONSTANTS, DomainError, harmonic, make_rng, sample_sizebias, sample_split, split_pmf
from .treemodel import (
    BudTree,
    CladeTree,
    TreeBatch,
    delete_leaf,
    prune,
    sample_batch,
    sample_ctcs,
    sample_dtcs,
    spanning_tree,
)
from .growth import grow, grow_step, kind_frequencies
from .chain import (
    depth_mean_recurrence,
    depth_second_moment_recurrence,
    fringe_up_pmf,
    hop_mean_recurrence,
    occupancy,
    simulate_paths,
)

__version__ = "0.1.0"

__all__ = [
    "CONSTANTS", "DomainError", "harmonic", "make_rng", "sample_sizebias", "sample_split", "split_pmf",
    "BudTree", "CladeTree", "TreeBatch", "delete_leaf", "prune", "sample_batch", "sample_ctcs", "sample_dtcs",
    "spanning_tree", "grow", "grow_step", "kind_frequencies", "depth_mean_recurrence",
    "depth_second_moment_recurrence", "fringe_up_pmf", "hop_mean_recurrence", "occupancy", "simulate_paths",
]
