"""Small image tensor helpers shared by the pipeline modules.

Images are H×W×3 float tensors. Storage range is [0, 1]; networks consume
the model range [-1, 1]. Masks are H×W floats in [0, 1].
"""

import math

import torch

# ITU-R BT.601 luminance weights, used wherever RGB collapses to gray.
LUMA_WEIGHTS = (0.299, 0.587, 0.114)


def to_model_range(image: torch.Tensor) -> torch.Tensor:
    """Map a [0, 1] storage-range image to the [-1, 1] model range."""
    return image * 2.0 - 1.0


def to_storage_range(image: torch.Tensor) -> torch.Tensor:
    """Map a [-1, 1] model-range image back to [0, 1], clamped."""
    return ((image + 1.0) * 0.5).clamp(0.0, 1.0)


def rgb_to_gray(image: torch.Tensor) -> torch.Tensor:
    """Collapse an H×W×3 image to H×W luminance. H×W input passes through."""
    if image.dim() == 2:
        return image
    w = torch.tensor(LUMA_WEIGHTS, dtype=image.dtype, device=image.device)
    return (image * w).sum(dim=-1)


def quantize_8bit(image: torch.Tensor) -> torch.Tensor:
    """Snap a [0, 1] image to the 8-bit representable grid (round-trip safe)."""
    return torch.round(image.clamp(0.0, 1.0) * 255.0) / 255.0


def flow_to_rgb(flow: torch.Tensor, max_radius: float | None = None) -> torch.Tensor:
    """Render an H×W×2 flow as an H×W×3 image (hue = direction, value = magnitude)."""
    dx, dy = flow[..., 0], flow[..., 1]
    mag = torch.sqrt(dx * dx + dy * dy)
    if max_radius is None:
        max_radius = float(mag.max().item())
    scale = mag / max_radius if max_radius > 1e-8 else torch.zeros_like(mag)
    hue = (torch.atan2(dy, dx) + math.pi) / (2.0 * math.pi)  # [0, 1)
    # inline HSV->RGB with s=1, v=scale
    h6 = (hue * 6.0) % 6.0
    i = torch.floor(h6)
    f = h6 - i
    p = torch.zeros_like(scale)
    q = scale * (1.0 - f)
    t = scale * f
    v = scale
    rgb = torch.zeros(flow.shape[0], flow.shape[1], 3, dtype=flow.dtype)
    for k, (r, g, b) in enumerate([(v, t, p), (q, v, p), (p, v, t),
                                   (p, q, v), (t, p, v), (v, p, q)]):
        sel = (i == k)
        rgb[..., 0] = torch.where(sel, r, rgb[..., 0])
        rgb[..., 1] = torch.where(sel, g, rgb[..., 1])
        rgb[..., 2] = torch.where(sel, b, rgb[..., 2])
    return rgb.clamp(0.0, 1.0)
