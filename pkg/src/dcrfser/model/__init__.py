from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .network import (ModelConfig, forward, init_params, layer_summary, loss_and_grads,
                      param_count, param_shapes, predict, predict_proba)
from .optim import AdamState, adam_step

__all__ = [
    "AdamState", "Checkpoint", "ModelConfig", "adam_step", "forward", "init_params",
    "layer_summary", "load_checkpoint", "loss_and_grads", "param_count", "param_shapes",
    "predict", "predict_proba", "save_checkpoint",
]
