from .nets import (NetSpec, init_params, forward, backward, predict_proba,
                   input_kind)
from .training import (OptimizerConfig, NesterovSGD, bce, weighted_bce,
                       logit_gradient, train_net, TrainingDiverged)

__all__ = [
    "NetSpec", "init_params", "forward", "backward", "predict_proba",
    "input_kind", "OptimizerConfig", "NesterovSGD", "bce", "weighted_bce",
    "logit_gradient", "train_net", "TrainingDiverged",
]
