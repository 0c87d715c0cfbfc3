"""Shared attention teacher selector."""

from .attention import (
    AdviceResult,
    AtsItem,
    AttentionConfig,
    SharedAttention,
    TeacherPacket,
    advise,
    ats_objective,
    attend_logits,
    attend_weights,
    draw_head_mask,
    export_shared,
    import_shared,
    update_ats,
)

__all__ = [
    "AdviceResult", "AtsItem", "AttentionConfig", "SharedAttention",
    "TeacherPacket", "advise", "ats_objective", "attend_logits",
    "attend_weights", "draw_head_mask", "export_shared", "import_shared",
    "update_ats",
]
