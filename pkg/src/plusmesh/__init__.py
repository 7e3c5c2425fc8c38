"""Deterministic 2D simulator of self-replicating machine strands that fold
into user-programmed polygons and self-assemble into meshes."""

from .engine import (Event, World, arbitrate, checkpoint, init_world, restore,
                     run, sever_bond, step)
from .geometry import Arm, MachineBody, Pose
from .physics import PhysicsParams, Rng
from .rules import Machine, RuleParams
from .seeds import (FoldPlan, SeedSpec, compile_shape, parse_seed,
                    predict_fold, validate_seed)

__all__ = [
    "Arm", "Event", "FoldPlan", "Machine", "MachineBody", "PhysicsParams",
    "Pose", "Rng", "RuleParams", "SeedSpec", "World", "arbitrate",
    "checkpoint", "compile_shape", "init_world", "parse_seed", "predict_fold",
    "restore", "run", "sever_bond", "step", "validate_seed",
]

__version__ = "0.1.0"
