"""Desk-scale embodied object-search laboratory.

Procedurally generated multi-room scenes, ObjectNav and Pick&Place tasks
with ray-based sensing, scripted and shortest-path demonstrators, a
teleoperation protocol for human demonstrations, recurrent policies
trained by behavior cloning or actor-critic RL, and trajectory metrics.
"""

__version__ = "0.1.0"

__all__ = [
    "world",
    "tasks",
    "demos",
    "policy",
    "train_bc",
    "train_rl",
    "metrics",
    "teleop",
    "cli",
]
