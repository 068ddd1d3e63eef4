"""Learnable building blocks.

Layout conventions: network tensors are (B, C, H, W); flows predicted by the
estimator are (B, 2, H, W) in pixel units at their own pyramid resolution.
Flattened feature codes for attention are (B, HW, C).
"""

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import ContractViolation

EPS_NORM = 1e-8


# ---------------------------------------------------------------------------
# correlation attention (weight-free pieces, used by the Tri-Level block)


def correlation_matrix(x_c: torch.Tensor, x_p: torch.Tensor) -> torch.Tensor:
    """Cosine similarity between channel-centralized codes.

    x_c, x_p: (HW, C) or (B, HW, C). Each position's feature has its channel
    mean subtracted first; entry (u, v) is the cosine of clothes position u
    against pose position v, with a 1e-8 denominator guard.
    """
    squeeze = x_c.dim() == 2
    if squeeze:
        x_c, x_p = x_c.unsqueeze(0), x_p.unsqueeze(0)
    c_hat = x_c - x_c.mean(dim=-1, keepdim=True)
    p_hat = x_p - x_p.mean(dim=-1, keepdim=True)
    num = torch.bmm(c_hat, p_hat.transpose(1, 2))
    denom = c_hat.norm(dim=-1).unsqueeze(2) * p_hat.norm(dim=-1).unsqueeze(1) + EPS_NORM
    corr = num / denom
    return corr[0] if squeeze else corr


def attention_transform(corr: torch.Tensor, x_c: torch.Tensor, alpha: float) -> torch.Tensor:
    """Re-weighted long-range transform: softmax_v(alpha * corr) @ x_c.

    Each output row is a convex combination of clothes features.
    """
    if alpha <= 0:
        raise ContractViolation(f"alpha must be positive, got {alpha}")
    squeeze = corr.dim() == 2
    if squeeze:
        corr, x_c = corr.unsqueeze(0), x_c.unsqueeze(0)
    weights = torch.softmax(alpha * corr, dim=-1)
    out = torch.bmm(weights, x_c)
    return out[0] if squeeze else out


# ---------------------------------------------------------------------------
# Tri-Level block: gated residual streams + SFT modulation of the parsing code


class TriLevelBlock(nn.Module):
    """Joint update of clothes / pose / parsing feature codes.

    The parsing code gates the residual convolutions of the other two
    streams; the attention-transformed clothes code drives a spatial
    feature transform (scale/shift) of the parsing code.
    """

    def __init__(self, channels: int, alpha: float = 100.0):
        super().__init__()
        self.alpha = alpha
        self.gate_c = nn.Conv2d(channels, channels, 3, padding=1)
        self.gate_p = nn.Conv2d(channels, channels, 3, padding=1)
        self.conv_c = nn.Conv2d(channels, channels, 3, padding=1)
        self.conv_p = nn.Conv2d(channels, channels, 3, padding=1)
        self.sft_gamma = nn.Conv2d(channels, channels, 3, padding=1)
        self.sft_beta = nn.Conv2d(channels, channels, 3, padding=1)

    def gating_masks(self, f_s: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """Local gating masks from the parsing code, each in (0, 1)."""
        return torch.sigmoid(self.gate_c(f_s)), torch.sigmoid(self.gate_p(f_s))

    def forward(self, f_c, f_p, f_s):
        b, c, h, w = f_c.shape
        m_c, m_p = self.gating_masks(f_s)
        flat_c = f_c.flatten(2).transpose(1, 2)  # (B, HW, C)
        flat_p = f_p.flatten(2).transpose(1, 2)
        corr = correlation_matrix(flat_c, flat_p)
        xbar = attention_transform(corr, flat_c, self.alpha)
        fbar_c = xbar.transpose(1, 2).reshape(b, c, h, w)
        new_c = m_c * self.conv_c(f_c) + f_c
        new_p = m_p * self.conv_p(f_p) + f_p
        new_s = self.sft_gamma(fbar_c) * f_s + self.sft_beta(fbar_c)
        return new_c, new_p, new_s


# ---------------------------------------------------------------------------
# MaskNorm + SPADE modulation


def masknorm_standardize(h: torch.Tensor, region: torch.Tensor,
                         eps: float = 1e-5) -> torch.Tensor:
    """Standardize activations per sample/channel separately inside and
    outside a binary region mask.

    h: (B, C, H, W); region: (B, 1, H, W) with values in {0, 1}. Regions with
    fewer than 2 pixels fall back to whole-image statistics.
    """
    b, c = h.shape[:2]
    whole_mu = h.mean(dim=(2, 3), keepdim=True)
    whole_var = h.var(dim=(2, 3), unbiased=False, keepdim=True)

    out = torch.zeros_like(h)
    for reg in (region, 1.0 - region):
        cnt = reg.sum(dim=(2, 3), keepdim=True)  # (B, 1, 1, 1)
        safe = cnt.clamp(min=1.0)
        mu = (h * reg).sum(dim=(2, 3), keepdim=True) / safe
        var = (((h - mu) ** 2) * reg).sum(dim=(2, 3), keepdim=True) / safe
        use_whole = (cnt < 2.0).to(h.dtype)
        mu = use_whole * whole_mu + (1.0 - use_whole) * mu
        var = use_whole * whole_var + (1.0 - use_whole) * var
        out = out + reg * (h - mu) / torch.sqrt(var + eps)
    return out


class SpadeMaskNorm(nn.Module):
    """Region-aware normalization modulated by the semantic layout.

    The activation is standardized with heterogeneous statistics (inside vs
    outside the degenerated clothes mask), then scaled and shifted by
    per-pixel gamma/beta convolved from the layout.
    """

    def __init__(self, channels: int, layout_channels: int, hidden: int = 32):
        super().__init__()
        self.shared = nn.Conv2d(layout_channels, hidden, 3, padding=1)
        self.gamma = nn.Conv2d(hidden, channels, 3, padding=1)
        self.beta = nn.Conv2d(hidden, channels, 3, padding=1)
        nn.init.ones_(self.gamma.bias)  # start close to plain standardization

    def forward(self, h, layout, region):
        size = h.shape[2:]
        if layout.shape[2:] != size:
            layout = F.interpolate(layout, size=size, mode="nearest")
        if region.shape[2:] != size:
            region = F.interpolate(region, size=size, mode="nearest")
        region = (region >= 0.5).to(h.dtype)
        normalized = masknorm_standardize(h, region)
        shared = F.relu(self.shared(layout))
        return self.gamma(shared) * normalized + self.beta(shared)


class SpadeResBlock(nn.Module):
    """Residual block of two SPADE/MaskNorm + conv stages."""

    def __init__(self, in_ch: int, out_ch: int, layout_channels: int):
        super().__init__()
        mid = min(in_ch, out_ch)
        self.norm0 = SpadeMaskNorm(in_ch, layout_channels)
        self.conv0 = nn.Conv2d(in_ch, mid, 3, padding=1)
        self.norm1 = SpadeMaskNorm(mid, layout_channels)
        self.conv1 = nn.Conv2d(mid, out_ch, 3, padding=1)
        self.skip = nn.Conv2d(in_ch, out_ch, 1) if in_ch != out_ch else None

    def forward(self, x, layout, region):
        h = self.conv0(F.leaky_relu(self.norm0(x, layout, region), 0.2))
        h = self.conv1(F.leaky_relu(self.norm1(h, layout, region), 0.2))
        s = self.skip(x) if self.skip is not None else x
        return h + s


# ---------------------------------------------------------------------------
# Gumbel-softmax discretization


def gumbel_softmax(logits: torch.Tensor, tau: float, rng: torch.Generator | None = None,
                   hard: bool = False, dim: int = -1) -> torch.Tensor:
    """Differentiable sample from softmax((logits + Gumbel noise) / tau).

    `hard` returns a straight-through one-hot (forward hard, soft gradient).
    """
    if tau <= 0:
        raise ContractViolation(f"temperature must be positive, got {tau}")
    u = torch.rand(logits.shape, generator=rng, dtype=logits.dtype, device=logits.device)
    noise = -torch.log(-torch.log(u + 1e-20) + 1e-20)
    y = torch.softmax((logits + noise) / tau, dim=dim)
    if hard:
        index = y.argmax(dim=dim, keepdim=True)
        y_hard = torch.zeros_like(y).scatter_(dim, index, 1.0)
        y = (y_hard - y).detach() + y
    return y


def gumbel_discretize(logits: torch.Tensor, tau: float, rng: torch.Generator | None = None,
                      hard: bool = False) -> torch.Tensor:
    """H×W×K logits -> per-pixel class distribution (channel-last)."""
    return gumbel_softmax(logits, tau, rng=rng, hard=hard, dim=-1)


# ---------------------------------------------------------------------------
# modulated convolution + coarse-to-fine flow estimator


class ModulatedConv2d(nn.Module):
    """Conv whose weights are scaled per-sample by a style vector, then
    demodulated to unit fan-in norm."""

    def __init__(self, in_ch: int, out_ch: int, kernel: int, style_dim: int,
                 demodulate: bool = True):
        super().__init__()
        self.weight = nn.Parameter(torch.randn(out_ch, in_ch, kernel, kernel)
                                   / (in_ch * kernel * kernel) ** 0.5)
        self.bias = nn.Parameter(torch.zeros(out_ch))
        self.style = nn.Linear(style_dim, in_ch)
        nn.init.zeros_(self.style.weight)
        nn.init.ones_(self.style.bias)
        self.demodulate = demodulate
        self.padding = kernel // 2

    def forward(self, x, style):
        b, in_ch, h, w = x.shape
        out_ch = self.weight.shape[0]
        s = self.style(style).reshape(b, 1, in_ch, 1, 1)
        weight = self.weight.unsqueeze(0) * s
        if self.demodulate:
            d = torch.rsqrt(weight.pow(2).sum(dim=(2, 3, 4)) + 1e-8)
            weight = weight * d.reshape(b, out_ch, 1, 1, 1)
        out = F.conv2d(x.reshape(1, b * in_ch, h, w),
                       weight.reshape(b * out_ch, in_ch, *self.weight.shape[2:]),
                       padding=self.padding, groups=b)
        return out.reshape(b, out_ch, h, w) + self.bias.reshape(1, -1, 1, 1)


class _FlowHead(nn.Module):
    def __init__(self, in_ch: int, style_dim: int, width: int):
        super().__init__()
        self.conv0 = ModulatedConv2d(in_ch, width, 3, style_dim)
        self.conv1 = ModulatedConv2d(width, 2, 3, style_dim, demodulate=False)
        with torch.no_grad():  # start near zero flow
            self.conv1.weight.mul_(0.01)

    def forward(self, x, style):
        return self.conv1(F.leaky_relu(self.conv0(x, style), 0.2), style)


class FlowEstimator(nn.Module):
    """Coarse-to-fine flow pyramid driven by modulated convolutions.

    The conditioning maps are concatenated channel-wise; a global style code
    (MLP over the spatially pooled conditioning) modulates every conv. Each
    level doubles the resolution of the previous flow (values scaled with
    the resolution, pixel units) and adds a predicted residual. Returns the
    pyramid coarse-to-fine; the last entry is at input resolution.
    """

    def __init__(self, cond_channels: int, levels: int = 4, width: int = 32,
                 style_dim: int = 64):
        super().__init__()
        self.levels = levels
        self.width = width
        self.stem = nn.Conv2d(cond_channels, width, 3, padding=1)
        self.down = nn.ModuleList(
            [nn.Conv2d(width, width, 3, stride=2, padding=1) for _ in range(levels - 1)]
        )
        self.style_mlp = nn.Sequential(
            nn.Linear(cond_channels, style_dim), nn.LeakyReLU(0.2),
            nn.Linear(style_dim, style_dim),
        )
        self.heads = nn.ModuleList()
        for lvl in range(levels):
            in_ch = width + (0 if lvl == 0 else 2)
            self.heads.append(_FlowHead(in_ch, style_dim, width))

    def zero_residual_heads(self) -> None:
        """Zero all residual-head parameters (diagnostic: forces zero flow)."""
        with torch.no_grad():
            for head in self.heads:
                for p in head.parameters():
                    p.zero_()
            # style bias of 0 keeps modulation inert too; weights are zero anyway

    def forward(self, cond_maps: list[torch.Tensor]) -> list[torch.Tensor]:
        cond = torch.cat(cond_maps, dim=1)
        h, w = cond.shape[2:]
        scale = 2 ** (self.levels - 1)
        if h % scale or w % scale:
            raise ContractViolation(
                f"resolution {h}×{w} not divisible by 2^{self.levels - 1}")
        style = self.style_mlp(cond.mean(dim=(2, 3)))
        feats = [F.leaky_relu(self.stem(cond), 0.2)]
        for down in self.down:
            feats.append(F.leaky_relu(down(feats[-1]), 0.2))
        feats = feats[::-1]  # coarse -> fine

        flows: list[torch.Tensor] = []
        flow = None
        for lvl, feat in enumerate(feats):
            if flow is None:
                flow = self.heads[lvl](feat, style)
            else:
                up = F.interpolate(flow, scale_factor=2, mode="bilinear",
                                   align_corners=False) * 2.0
                flow = up + self.heads[lvl](torch.cat([feat, up], dim=1), style)
            flows.append(flow)
        return flows


# ---------------------------------------------------------------------------
# multi-scale patch discriminator


class _PatchScale(nn.Module):
    def __init__(self, in_ch: int, width: int, depth: int):
        super().__init__()
        layers = []
        ch = in_ch
        for i in range(depth):
            out = min(width * 2 ** i, 4 * width)
            block = [nn.Conv2d(ch, out, 4, stride=2, padding=1)]
            if i > 0:
                block.insert(1, nn.InstanceNorm2d(out))
            block.append(nn.LeakyReLU(0.2))
            layers.append(nn.Sequential(*block))
            ch = out
        self.blocks = nn.ModuleList(layers)
        self.score = nn.Conv2d(ch, 1, 3, padding=1)

    def forward(self, x):
        feats = []
        for block in self.blocks:
            x = block(x)
            feats.append(x)
        return self.score(x), feats


class PatchDiscriminator(nn.Module):
    """Two-scale patch discriminator (full and half resolution).

    forward(image, condition) returns, per scale, a real-valued score grid
    of spatial size input/2^depth plus the intermediate feature list used by
    the feature-matching loss.
    """

    def __init__(self, image_channels: int, condition_channels: int,
                 width: int = 32, depth: int = 3, scales: int = 2):
        super().__init__()
        self.depth = depth
        in_ch = image_channels + condition_channels
        self.scales = nn.ModuleList(
            [_PatchScale(in_ch, width, depth) for _ in range(scales)]
        )

    def forward(self, image, condition):
        x = torch.cat([image, condition], dim=1)
        out = []
        for i, scale in enumerate(self.scales):
            inp = x if i == 0 else F.avg_pool2d(x, 2 ** i)
            out.append(scale(inp))
        return out


# ---------------------------------------------------------------------------
# fixed multi-scale feature extractor (perceptual / Fréchet features)


class FeatureExtractor(nn.Module):
    """Frozen 3-stage strided conv stack with deterministic seed-0 weights.

    A pretrained classifier can be dropped in anywhere an extractor is
    accepted; this one removes the external-download dependency while still
    separating images by multi-scale structure.
    """

    VERSION = "rfe-v1-seed0"
    CHANNELS = (16, 32, 64)

    def __init__(self, seed: int = 0):
        super().__init__()
        gen = torch.Generator().manual_seed(seed)
        chans = (3,) + self.CHANNELS
        convs = []
        for cin, cout in zip(chans[:-1], chans[1:]):
            conv = nn.Conv2d(cin, cout, 3, stride=2, padding=1)
            with torch.no_grad():
                conv.weight.copy_(torch.randn(conv.weight.shape, generator=gen)
                                  / (cin * 9) ** 0.5)
                conv.bias.copy_(torch.randn(conv.bias.shape, generator=gen) * 0.1)
            convs.append(conv)
        self.convs = nn.ModuleList(convs)
        for p in self.parameters():
            p.requires_grad_(False)

    def forward(self, image: torch.Tensor) -> list[torch.Tensor]:
        feats = []
        x = image
        for conv in self.convs:
            x = F.leaky_relu(conv(x), 0.2)
            feats.append(x)
        return feats


_default_extractor: FeatureExtractor | None = None


def default_feature_extractor() -> FeatureExtractor:
    """Shared frozen extractor instance (weights immutable after build)."""
    global _default_extractor
    if _default_extractor is None:
        _default_extractor = FeatureExtractor()
        _default_extractor.eval()
    return _default_extractor
