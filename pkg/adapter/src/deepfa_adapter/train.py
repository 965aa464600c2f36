"""Fine-tuning loop: SGD with momentum and a learning rate decaying
linearly to zero over the epoch budget, mirroring the engine's schedule."""

from __future__ import annotations

import numpy as np
import torch
from torch import nn


def train_network(
    model: nn.Module,
    images: torch.Tensor,
    labels: torch.Tensor,
    *,
    epochs: int,
    lr: float,
    momentum: float,
    batch_size: int,
    seed: int,
) -> None:
    model.train()
    params = [p for p in model.parameters() if p.requires_grad]
    optimizer = torch.optim.SGD(params, lr=lr, momentum=momentum)
    loss_fn = nn.CrossEntropyLoss()
    rng = np.random.default_rng(seed)
    n = images.shape[0]
    for epoch in range(epochs):
        epoch_lr = lr * (1.0 - epoch / epochs)
        for group in optimizer.param_groups:
            group["lr"] = epoch_lr
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            batch = torch.from_numpy(order[start:start + batch_size].copy())
            optimizer.zero_grad()
            out = model(images[batch])
            loss = loss_fn(out, labels[batch])
            if not torch.isfinite(loss):
                raise RuntimeError(f"non-finite training loss at epoch {epoch}")
            loss.backward()
            optimizer.step()
    model.eval()


def predict_probabilities(model: nn.Module, images: torch.Tensor) -> np.ndarray:
    model.eval()
    with torch.no_grad():
        logits = model(images)
        probs = torch.softmax(logits, dim=1)
    return probs.numpy().astype(np.float64)
