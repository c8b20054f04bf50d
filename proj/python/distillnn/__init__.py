"""Python access to the distillnn library: commands, metrics, data and checkpoints."""

from ._core import (
    ContractError,
    NumericError,
    ause,
    bald,
    distill,
    ece_classification,
    ece_regression,
    epistemic_variance,
    evaluate,
    gen_classification,
    gen_regression,
    js_distance,
    outlier_eval,
    print_defaults,
    ablate,
    student_predict,
    teacher_predict,
    total_variance,
    train_teacher,
    __version__,
)

__all__ = [
    "ContractError",
    "NumericError",
    "ablate",
    "ause",
    "bald",
    "distill",
    "ece_classification",
    "ece_regression",
    "epistemic_variance",
    "evaluate",
    "gen_classification",
    "gen_regression",
    "js_distance",
    "outlier_eval",
    "print_defaults",
    "student_predict",
    "teacher_predict",
    "total_variance",
    "train_teacher",
]
