from .scripted import HarvesterPolicy, RandomPolicy, TraderPolicy, make_scripted
from .learning import (
    Learner,
    a2c_losses,
    n_step_returns,
    policy_loss,
    psi_weights,
    value_loss,
)
from .nets import PolicyValueNet, load_checkpoint, save_checkpoint

__all__ = [
    "HarvesterPolicy",
    "RandomPolicy",
    "TraderPolicy",
    "make_scripted",
    "Learner",
    "PolicyValueNet",
    "a2c_losses",
    "n_step_returns",
    "policy_loss",
    "psi_weights",
    "value_loss",
    "save_checkpoint",
    "load_checkpoint",
]
