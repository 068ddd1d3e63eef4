"""Deterministic geometric primitives.

Conventions used throughout the pipeline:

* FlowField: H×W×2 tensor of per-output-pixel source offsets (dx, dy) in
  pixels, back-warping convention: output[y, x] samples the source image at
  (x + dx, y + dy).
* Bilinear sampling uses zero padding (out-of-bounds corners contribute 0)
  and is exact at integer coordinates, so zero flow is the identity bit for
  bit. Sampling is differentiable w.r.t. both the image and the flow.
* ControlGrid: paired source/target control points parameterizing a
  semi-rigid (moving-least-squares affine) deformation. Content located at
  the source points moves to the target points; the reverse deformation is
  obtained by swapping the two point sets.

All functions are pure; randomness enters only through explicit generators.
"""

from dataclasses import dataclass

import torch

from .errors import ContractViolation


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ContractViolation(msg)


# ---------------------------------------------------------------------------
# bilinear back-warping


def _base_grid(h: int, w: int, dtype, device) -> torch.Tensor:
    ys, xs = torch.meshgrid(
        torch.arange(h, dtype=dtype, device=device),
        torch.arange(w, dtype=dtype, device=device),
        indexing="ij",
    )
    return torch.stack((xs, ys), dim=-1)  # (H, W, 2) as (x, y)


def bilinear_sample(images: torch.Tensor, positions: torch.Tensor) -> torch.Tensor:
    """Sample batched images at absolute pixel positions with zero padding.

    images: (B, C, H, W); positions: (B, H', W', 2) holding (x, y) in pixels.
    Returns (B, C, H', W'). Corners falling outside the image contribute 0.
    """
    b, c, h, w = images.shape
    x = positions[..., 0]
    y = positions[..., 1]
    x0 = torch.floor(x)
    y0 = torch.floor(y)
    wx = x - x0
    wy = y - y0

    flat = images.reshape(b, c, h * w)
    out = torch.zeros(
        (b, c) + positions.shape[1:3], dtype=images.dtype, device=images.device
    )
    for oy, ox in ((0, 0), (0, 1), (1, 0), (1, 1)):
        xi = x0 + ox
        yi = y0 + oy
        weight = (wx if ox else 1.0 - wx) * (wy if oy else 1.0 - wy)
        inside = (xi >= 0) & (xi <= w - 1) & (yi >= 0) & (yi <= h - 1)
        idx = (yi.clamp(0, h - 1) * w + xi.clamp(0, w - 1)).long()
        vals = flat.gather(2, idx.reshape(b, 1, -1).expand(b, c, -1))
        vals = vals.reshape(b, c, *positions.shape[1:3])
        out = out + vals * (weight * inside.to(images.dtype)).unsqueeze(1)
    return out


def backward_warp(image: torch.Tensor, flow: torch.Tensor) -> torch.Tensor:
    """Back-warp an H×W or H×W×C image through an H×W×2 pixel-offset flow."""
    _require(flow.dim() == 3 and flow.shape[-1] == 2,
             f"flow must be H×W×2, got {tuple(flow.shape)}")
    _require(image.shape[:2] == flow.shape[:2],
             f"image {tuple(image.shape[:2])} and flow {tuple(flow.shape[:2])} disagree")
    _require(bool(torch.isfinite(flow).all()), "flow contains non-finite values")
    squeeze = image.dim() == 2
    img = image.unsqueeze(-1) if squeeze else image
    h, w = img.shape[:2]
    pos = _base_grid(h, w, flow.dtype, flow.device) + flow
    out = bilinear_sample(
        img.permute(2, 0, 1).unsqueeze(0), pos.unsqueeze(0)
    )[0].permute(1, 2, 0)
    return out[..., 0] if squeeze else out


def backward_warp_batch(images: torch.Tensor, flows: torch.Tensor) -> torch.Tensor:
    """Batched variant: images (B, C, H, W), flows (B, 2, H, W) -> (B, C, H, W)."""
    _require(images.shape[0] == flows.shape[0] and images.shape[2:] == flows.shape[2:],
             "images and flows disagree in batch or spatial dims")
    b, _, h, w = images.shape
    pos = _base_grid(h, w, flows.dtype, flows.device) + flows.permute(0, 2, 3, 1)
    return bilinear_sample(images, pos)


# ---------------------------------------------------------------------------
# flow regularization


def total_variation(field: torch.Tensor) -> torch.Tensor:
    """Mean absolute first difference of an H×W×C field, horizontal + vertical.

    Zero iff the field is constant. Flow fields are the C=2 case; the same
    measure regularizes predicted soft layouts.
    """
    _require(field.dim() == 3, f"expected H×W×C, got {tuple(field.shape)}")
    _require(bool(torch.isfinite(field).all()), "field contains non-finite values")
    dh = (field[:, 1:, :] - field[:, :-1, :]).abs()
    dv = (field[1:, :, :] - field[:-1, :, :]).abs()
    zero = field.sum() * 0.0  # keeps dtype/device and the autograd graph
    tv = zero
    if dh.numel():
        tv = tv + dh.mean()
    if dv.numel():
        tv = tv + dv.mean()
    return tv


# ---------------------------------------------------------------------------
# semi-rigid control-point deformation (moving-least-squares, affine)


@dataclass(frozen=True)
class ControlGrid:
    """Paired control points: content at `source` moves to `target`."""

    source: torch.Tensor  # (N, 2) or (P, P, 2), pixel coords (x, y)
    target: torch.Tensor

    def points(self) -> tuple[torch.Tensor, torch.Tensor]:
        return self.source.reshape(-1, 2), self.target.reshape(-1, 2)


def fit_semirigid(source_pts: torch.Tensor, target_pts: torch.Tensor) -> ControlGrid:
    """Build a semi-rigid deformation from matched control points (≥ 4 pairs)."""
    src = torch.as_tensor(source_pts, dtype=torch.float32)
    tgt = torch.as_tensor(target_pts, dtype=torch.float32)
    _require(src.shape == tgt.shape, "source and target point sets differ in shape")
    _require(src.reshape(-1, 2).shape[0] >= 4, "need at least 4 control points")
    flat = src.reshape(-1, 2)
    _require(bool((flat - flat[0]).abs().max() > 1e-9),
             "degenerate control grid: all source points coincide")
    return ControlGrid(source=src.clone(), target=tgt.clone())


def reverse_params(theta: ControlGrid) -> ControlGrid:
    """Exact reverse deformation: swap source and target control points."""
    return ControlGrid(source=theta.target, target=theta.source)


def regular_grid_points(extent: tuple[float, float, float, float], p: int = 5) -> torch.Tensor:
    """P×P control points covering (x0, y0, x1, y1), returned as (P, P, 2)."""
    x0, y0, x1, y1 = extent
    xs = torch.linspace(x0, x1, p)
    ys = torch.linspace(y0, y1, p)
    gy, gx = torch.meshgrid(ys, xs, indexing="ij")
    return torch.stack((gx, gy), dim=-1)


def _mls_affine_map(from_pts: torch.Tensor, to_pts: torch.Tensor,
                    h: int, w: int, eps: float = 1e-8) -> torch.Tensor:
    """Dense MLS-affine map fitted on (from -> to) pairs, evaluated per pixel.

    Returns (H, W, 2) absolute positions g(v). Inverse-square distance
    weights with `eps` keep the fit finite at the control points themselves.
    """
    a = from_pts.reshape(-1, 2).to(torch.float64)
    b_pts = to_pts.reshape(-1, 2).to(torch.float64)
    grid = _base_grid(h, w, torch.float64, a.device)  # (H, W, 2)

    diff = grid.unsqueeze(2) - a  # (H, W, N, 2)
    wgt = 1.0 / (diff.pow(2).sum(-1) + eps)  # (H, W, N)
    wsum = wgt.sum(-1, keepdim=True)
    a_star = (wgt.unsqueeze(-1) * a).sum(2) / wsum
    b_star = (wgt.unsqueeze(-1) * b_pts).sum(2) / wsum
    a_hat = a - a_star.unsqueeze(2)  # (H, W, N, 2)
    b_hat = b_pts - b_star.unsqueeze(2)

    cov = torch.einsum("hwn,hwni,hwnj->hwij", wgt, a_hat, a_hat)
    cross = torch.einsum("hwn,hwni,hwnj->hwij", wgt, a_hat, b_hat)
    try:
        m = torch.linalg.solve(cov, cross)
    except RuntimeError:
        # collinear control points: fall back to the weighted translation
        m = torch.eye(2, dtype=torch.float64).expand(h, w, 2, 2)
    pos = torch.einsum("hwi,hwij->hwj", grid - a_star, m) + b_star
    return pos


def control_deform_flow(theta: ControlGrid, h: int, w: int) -> torch.Tensor:
    """FlowField realizing θ on an H×W canvas, suitable for backward_warp.

    Backward warping needs, per output pixel, where to sample the input, so
    the MLS map is fitted in the target->source direction.
    """
    pos = _mls_affine_map(theta.target, theta.source, h, w)
    flow = pos - _base_grid(h, w, torch.float64, pos.device)
    return flow.to(torch.float32)


def apply_control_deform(mask: torch.Tensor, theta: ControlGrid) -> torch.Tensor:
    """Deform a mask (or image) by θ; output clamped to [0, 1] for masks."""
    h, w = mask.shape[:2]
    flow = control_deform_flow(theta, h, w).to(mask.dtype)
    return backward_warp(mask, flow).clamp(0.0, 1.0)


# ---------------------------------------------------------------------------
# random affine misalignment


def affine_shift_rotate(image: torch.Tensor, v: float) -> torch.Tensor:
    """Rotate by v degrees about the image center and translate by (v, v) px.

    The single scalar v drives both the rotation angle (degrees) and the
    translation (pixels on both axes). Resampling is bilinear with zero
    padding; v = 0 returns the image unchanged, exactly.
    """
    if v == 0.0:
        return image.clone()
    h, w = image.shape[:2]
    ang = torch.deg2rad(torch.as_tensor(float(v), dtype=torch.float64))
    cos, sin = torch.cos(ang), torch.sin(ang)
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    grid = _base_grid(h, w, torch.float64, image.device)
    # invert p' = R(p - c) + c + (v, v): sample input at R^T (p' - c - v) + c
    x = grid[..., 0] - cx - float(v)
    y = grid[..., 1] - cy - float(v)
    sx = cos * x + sin * y + cx
    sy = -sin * x + cos * y + cy
    flow = torch.stack((sx, sy), dim=-1) - grid
    return backward_warp(image, flow.to(image.dtype if image.is_floating_point() else torch.float32))


def random_affine(image: torch.Tensor, r: float, rng: torch.Generator) -> torch.Tensor:
    """Apply affine_shift_rotate with v drawn uniformly from [-r, r]."""
    _require(r >= 0.0, f"affine bound must be >= 0, got {r}")
    if r == 0.0:
        return image.clone()
    v = (torch.rand((), generator=rng, dtype=torch.float64) * 2.0 - 1.0) * r
    return affine_shift_rotate(image, float(v))


# ---------------------------------------------------------------------------
# mask degeneration


def degenerate_mask(mask: torch.Tensor, h_alpha: int = 100, w_alpha: int = 75) -> torch.Tensor:
    """Blur a mask's boundary by area-resizing down to (h_alpha, w_alpha) and
    back up, then binarize at 0.5. Constant masks are invariant."""
    _require(mask.dim() == 2, f"mask must be H×W, got {tuple(mask.shape)}")
    h, w = mask.shape
    _require(h_alpha > 0 and w_alpha > 0,
             f"degeneration target dims must be positive, got ({h_alpha}, {w_alpha})")
    _require(h_alpha <= h and w_alpha <= w,
             f"degeneration dims ({h_alpha}, {w_alpha}) exceed mask dims ({h}, {w})")
    x = mask.unsqueeze(0).unsqueeze(0)
    down = torch.nn.functional.adaptive_avg_pool2d(x, (h_alpha, w_alpha))
    up = torch.nn.functional.interpolate(down, size=(h, w), mode="area")
    return (up[0, 0] >= 0.5).to(mask.dtype)
