from . import autodiff
from .autodiff import ShapeError, Tensor, no_grad
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .dropout import Dropout, DropoutPlan
from .optim import Adam, LRSchedule, ParameterStore, TrainingError, lr_schedule

__all__ = [
    "autodiff", "Tensor", "ShapeError", "no_grad", "ParameterStore", "Adam", "LRSchedule",
    "lr_schedule", "TrainingError", "Dropout", "DropoutPlan", "save_checkpoint", "load_checkpoint",
    "CheckpointError",
]
