"""Actor-critic network and portable checkpoint i/o.

The torso is a 1x1 convolution over the egocentric color field, a dense
layer, concatenation with the flattened non-visual observations, and an LSTM;
separate two-layer heads emit action logits and a (normalized) state value.

Checkpoints are plain .npz archives: one shape-tagged array per parameter
(``param/<name>``), optional Adam moments (``opt/<name>/...``), and a JSON
metadata blob under ``__meta__``.
"""

from __future__ import annotations

import json

import numpy as np
import torch
from torch import nn


class PolicyValueNet(nn.Module):
    def __init__(
        self,
        num_actions: int,
        nonvisual_size: int,
        conv_channels: int = 24,
        dense: int = 256,
        lstm: int = 128,
        head: int = 64,
        vision_hw: tuple[int, int] = (15, 15),
    ):
        super().__init__()
        self.num_actions = num_actions
        self.nonvisual_size = nonvisual_size
        h, w = vision_hw
        self.conv = nn.Conv2d(3, conv_channels, kernel_size=1, stride=1)
        self.vis_dense = nn.Linear(conv_channels * h * w, dense)
        self.core = nn.LSTMCell(dense + nonvisual_size, lstm)
        self.policy_head = nn.Sequential(
            nn.Linear(lstm, head), nn.ReLU(), nn.Linear(head, head), nn.ReLU()
        )
        self.policy_out = nn.Linear(head, num_actions)
        self.value_head = nn.Sequential(
            nn.Linear(lstm, head), nn.ReLU(), nn.Linear(head, head), nn.ReLU()
        )
        self.value_out = nn.Linear(head, 1)

    def initial_state(self, batch: int = 1) -> tuple[torch.Tensor, torch.Tensor]:
        size = self.core.hidden_size
        return (torch.zeros(batch, size), torch.zeros(batch, size))

    def forward(
        self,
        vision: torch.Tensor,     # (B, 15, 15, 3)
        nonvisual: torch.Tensor,  # (B, K)
        state: tuple[torch.Tensor, torch.Tensor],
    ) -> tuple[torch.Tensor, torch.Tensor, tuple[torch.Tensor, torch.Tensor]]:
        x = vision.permute(0, 3, 1, 2)
        x = torch.relu(self.conv(x))
        x = torch.relu(self.vis_dense(x.flatten(1)))
        x = torch.cat([x, nonvisual], dim=1)
        h, c = self.core(x, state)
        logits = self.policy_out(self.policy_head(h))
        value = self.value_out(self.value_head(h)).squeeze(-1)
        return logits, value, (h, c)

    def param_count(self) -> int:
        return sum(p.numel() for p in self.parameters())


def save_checkpoint(path, net: nn.Module, optimizer=None, meta: dict | None = None) -> None:
    arrays: dict[str, np.ndarray] = {}
    for name, p in net.state_dict().items():
        arrays[f"param/{name}"] = p.detach().cpu().numpy()
    if optimizer is not None:
        named = dict(net.named_parameters())
        for name, p in named.items():
            state = optimizer.state.get(p)
            if not state:
                continue
            arrays[f"opt/{name}/exp_avg"] = state["exp_avg"].cpu().numpy()
            arrays[f"opt/{name}/exp_avg_sq"] = state["exp_avg_sq"].cpu().numpy()
            arrays[f"opt/{name}/step"] = np.asarray(
                state["step"].item() if torch.is_tensor(state["step"]) else state["step"]
            )
    blob = json.dumps(meta or {}, sort_keys=True).encode()
    arrays["__meta__"] = np.frombuffer(blob, dtype=np.uint8)
    np.savez(path, **arrays)


def load_checkpoint(path, net: nn.Module, optimizer=None) -> dict:
    data = np.load(path)
    state = {}
    for key in data.files:
        if key.startswith("param/"):
            state[key[len("param/"):]] = torch.from_numpy(data[key].copy())
    net.load_state_dict(state)
    if optimizer is not None:
        named = dict(net.named_parameters())
        for name, p in named.items():
            avg_key = f"opt/{name}/exp_avg"
            if avg_key not in data.files:
                continue
            optimizer.state[p] = {
                "step": torch.tensor(float(data[f"opt/{name}/step"])),
                "exp_avg": torch.from_numpy(data[avg_key].copy()),
                "exp_avg_sq": torch.from_numpy(data[f"opt/{name}/exp_avg_sq"].copy()),
            }
    meta = bytes(data["__meta__"].tobytes()) if "__meta__" in data.files else b"{}"
    return json.loads(meta.decode() or "{}")
