"""Interactive affordance benchmark engine (native core)."""

from ._affbench import (
    Agent,
    classify_error,
    EngineError,
    KnowledgeBase,
    LoadOptions,
    Session,
    Task,
    __version__,
    dpo_loss,
    eval_system_prompt,
    gen_trajectories,
    generate_kb,
    generate_tasks,
    load_kb,
    load_kb_file,
    load_tasks,
    load_tasks_file,
    make_agent,
    parse_action,
    qc_check,
    run_eval,
    sample_gold_triple,
    score_run,
    score_task,
    serialize_kb,
    serialize_tasks,
    sft_nll,
    validate_kb,
    verify_run,
)

__all__ = [
    "Agent",
    "classify_error",
    "EngineError",
    "KnowledgeBase",
    "LoadOptions",
    "Session",
    "Task",
    "__version__",
    "dpo_loss",
    "eval_system_prompt",
    "gen_trajectories",
    "generate_kb",
    "generate_tasks",
    "load_kb",
    "load_kb_file",
    "load_tasks",
    "load_tasks_file",
    "make_agent",
    "parse_action",
    "qc_check",
    "run_eval",
    "sample_gold_triple",
    "score_run",
    "score_task",
    "serialize_kb",
    "serialize_tasks",
    "sft_nll",
    "validate_kb",
    "verify_run",
]
