"""Conversions between the numpy core types and NCHW torch tensors."""

from __future__ import annotations

import hashlib

import numpy as np
import torch
import torch.nn.functional as F

from app.core.samples import Image, LabelMap, SoftLabelMap


def image_to_tensor(image: Image, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    return torch.from_numpy(np.ascontiguousarray(image.data.transpose(2, 0, 1))).to(dtype).unsqueeze(0)


def labels_to_tensor(labels: LabelMap) -> torch.Tensor:
    return torch.from_numpy(np.ascontiguousarray(labels.data)).long().unsqueeze(0)


def soft_to_tensor(soft: SoftLabelMap, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    return torch.from_numpy(np.ascontiguousarray(soft.data.transpose(2, 0, 1))).to(dtype).unsqueeze(0)


def one_hot(labels: torch.Tensor, num_classes: int, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """(N, H, W) class ids -> (N, K, H, W) one-hot maps."""
    return F.one_hot(labels.long(), num_classes).permute(0, 3, 1, 2).to(dtype)


def tensor_to_image(tensor: torch.Tensor) -> Image:
    if tensor.dim() == 4:
        tensor = tensor[0]
    array = tensor.detach().cpu().double().numpy().transpose(1, 2, 0)
    return Image.clamped(array)


def tensor_to_soft(tensor: torch.Tensor) -> SoftLabelMap:
    if tensor.dim() == 4:
        tensor = tensor[0]
    return SoftLabelMap(tensor.detach().cpu().double().numpy().transpose(1, 2, 0))


def tensor_to_labels(tensor: torch.Tensor, num_classes: int) -> LabelMap:
    """(K, H, W) or (1, K, H, W) scores -> hard argmax LabelMap."""
    if tensor.dim() == 4:
        tensor = tensor[0]
    return LabelMap(tensor.detach().cpu().argmax(dim=0).numpy(), num_classes)


def state_checksum(module: torch.nn.Module) -> str:
    """SHA-256 over a module's state dict, for frozen-weights checks."""
    digest = hashlib.sha256()
    for name, tensor in sorted(module.state_dict().items()):
        digest.update(name.encode())
        digest.update(tensor.detach().cpu().contiguous().numpy().tobytes())
    return digest.hexdigest()
