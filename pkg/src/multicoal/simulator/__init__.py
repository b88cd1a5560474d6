from .ensemble import CountsAt, EnsembleSummary, FirstEventTime, TotalsAt, ensemble
from .jump import JumpChain, simulate_jump_chain
from .killing import KilledProjected, simulate_projected_with_killing
from .labelled import LabelledSimulator, simulate_labelled
from .partition import TypedPartition, project_partition
from .rng import RngSpec, derive_seed
from .trajectory import COLOUR_CHANGE, KILL, MERGER, Event, Trajectory, lump

__all__ = [
    "COLOUR_CHANGE", "KILL", "MERGER", "CountsAt", "EnsembleSummary", "Event",
    "FirstEventTime", "JumpChain", "KilledProjected", "LabelledSimulator", "RngSpec",
    "TotalsAt", "Trajectory", "TypedPartition", "derive_seed", "ensemble", "lump",
    "project_partition", "simulate_jump_chain", "simulate_labelled",
    "simulate_projected_with_killing",
]
