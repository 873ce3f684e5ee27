"""Python surface of the agora ensemble orchestration engine.

The heavy lifting lives in the compiled extension; this package re-exports
the main operations: the difficulty controller, TrueSkill updates, the
quality gate and buffer, and a one-call simulated experiment runner.
"""

from ._core import (
    ControllerState,
    EliteHistory,
    HQBuffer,
    InteractionRecord,
    Rating,
    TrueSkillParams,
    __version__,
    indicator,
    internal_surprise,
    pass_at_k,
    run_simulation,
    sft_loss,
    solve_probability,
    strict_majority,
    trueskill_update,
    update_difficulty,
    update_target,
)

__all__ = [
    "ControllerState",
    "EliteHistory",
    "HQBuffer",
    "InteractionRecord",
    "Rating",
    "TrueSkillParams",
    "__version__",
    "indicator",
    "internal_surprise",
    "pass_at_k",
    "run_simulation",
    "sft_loss",
    "solve_probability",
    "strict_majority",
    "trueskill_update",
    "update_difficulty",
    "update_target",
]
