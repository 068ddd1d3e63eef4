"""Procedural synthetic fashion dataset.

Each sample is a parametric "person" (head, hair, arms, torso, top with
variable sleeve/hem geometry, bottom clothes) rendered together with its
exact semantic layout, pose keypoints, and, in paired mode, the same top
flattened on an in-shop canvas plus the analytic person->in-shop flow.

The on-model top is constructed as the affine preimage of the in-shop top,
one affine per compositional part (torso, left sleeve, right sleeve), and
both canvases share one analytic color function. That makes the stored flow
exact: back-warping the in-shop rendering through it reproduces the worn
top up to resampling.

Geometry is rasterized at 4x supersampling; images are box-downsampled
(anti-aliasing) and layouts take the per-block majority class, so layouts
stay hard one-hot while image edges are smooth.
"""

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .errors import ContractViolation, DataError

CLASSES = ("background", "hair", "face", "torso_skin", "upper_clothes",
           "bottom_clothes", "left_arm", "right_arm")
BACKGROUND, HAIR, FACE, SKIN, UPPER, BOTTOM, LEFT_ARM, RIGHT_ARM = range(8)
NUM_CLASSES = len(CLASSES)
NUM_KEYPOINTS = 18
HEATMAP_SIGMA = 3.0

PALETTE = [
    (0, 0, 0), (139, 84, 33), (255, 219, 172), (224, 172, 105),
    (200, 30, 30), (30, 60, 200), (40, 180, 80), (200, 40, 200),
]

PART_NAMES = ("torso", "left_sleeve", "right_sleeve")
STYLES = ("tucked", "untucked", "overlong", "asymmetric")

FLOW_MAGIC = b"BVFL"
_SS = 4  # supersampling factor


@dataclass
class SampleRecord:
    """One dataset element. Images are H×W×3 in [0, 1]; masks H×W."""

    id: str
    seed: int
    mode: str    # "paired" | "unpaired"
    style: str
    person: torch.Tensor          # (H, W, 3)
    layout: torch.Tensor          # (H, W, 8) one-hot
    keypoints: torch.Tensor       # (18, 2) as (x, y)
    part_masks: torch.Tensor      # (3, H, W) torso / left sleeve / right sleeve
    inshop: torch.Tensor | None = None          # (H, W, 3)
    inshop_part_masks: torch.Tensor | None = None
    gt_flow: torch.Tensor | None = None         # (H, W, 2) person -> in-shop

    def class_mask(self, cls: int) -> torch.Tensor:
        return self.layout[..., cls]

    def heatmaps(self, sigma: float = HEATMAP_SIGMA) -> torch.Tensor:
        """(H, W, 18) Gaussian keypoint heatmaps, derived from keypoints."""
        h, w = self.person.shape[:2]
        return pose_heatmaps(self.keypoints, (h, w), sigma)


def pose_heatmaps(keypoints: torch.Tensor, size: tuple[int, int],
                  sigma: float = HEATMAP_SIGMA) -> torch.Tensor:
    h, w = size
    ys = torch.arange(h, dtype=torch.float32).reshape(h, 1, 1)
    xs = torch.arange(w, dtype=torch.float32).reshape(1, w, 1)
    kx = keypoints[:, 0].reshape(1, 1, -1)
    ky = keypoints[:, 1].reshape(1, 1, -1)
    d2 = (xs - kx) ** 2 + (ys - ky) ** 2
    return torch.exp(-d2 / (2.0 * sigma * sigma))


# ---------------------------------------------------------------------------
# analytic shape helpers (evaluated on arbitrary coordinate arrays)


def _rect(px, py, x0, y0, x1, y1):
    return (px >= x0) & (px <= x1) & (py >= y0) & (py <= y1)


def _ellipse(px, py, cx, cy, rx, ry):
    return ((px - cx) / rx) ** 2 + ((py - cy) / ry) ** 2 <= 1.0


def _capsule(px, py, origin, direction, length, halfwidth):
    dx, dy = direction
    rx = px - origin[0]
    ry = py - origin[1]
    t = rx * dx + ry * dy
    r = -rx * dy + ry * dx
    return (t >= 0.0) & (t <= length) & (np.abs(r) <= halfwidth)


class _Affine:
    """2D affine map p -> M p + t, vectorized over coordinate arrays."""

    def __init__(self, m, t):
        self.m = np.asarray(m, dtype=np.float64)
        self.t = np.asarray(t, dtype=np.float64)

    def __call__(self, px, py):
        qx = self.m[0, 0] * px + self.m[0, 1] * py + self.t[0]
        qy = self.m[1, 0] * px + self.m[1, 1] * py + self.t[1]
        return qx, qy


def _frame_affine(src_origin, src_axis, dst_origin, dst_axis, s_along, s_across):
    """Affine mapping the (origin, axis) frame of the source onto the
    destination frame with separate along/across scales."""
    u = np.asarray(src_axis, dtype=np.float64)
    n = np.array([-u[1], u[0]])
    v = np.asarray(dst_axis, dtype=np.float64)
    m_dst = np.array([-v[1], v[0]])
    basis_src = np.stack([u, n], axis=1)        # local = basis_src^T (p - o)
    basis_dst = np.stack([v * s_along, m_dst * s_across], axis=1)
    m = basis_dst @ basis_src.T
    t = np.asarray(dst_origin, dtype=np.float64) - m @ np.asarray(src_origin, dtype=np.float64)
    return _Affine(m, t)


# ---------------------------------------------------------------------------
# sample generation


def _hsv_color(rng, s_range=(0.5, 0.9), v_range=(0.5, 0.95)):
    h = rng.uniform(0.0, 1.0)
    s = rng.uniform(*s_range)
    v = rng.uniform(*v_range)
    i = int(h * 6.0) % 6
    f = h * 6.0 - int(h * 6.0)
    p, q, t = v * (1 - s), v * (1 - s * f), v * (1 - s * (1 - f))
    rgb = [(v, t, p), (q, v, p), (p, v, t), (p, q, v), (t, p, v), (v, p, q)][i]
    return np.array(rgb, dtype=np.float64)


def _majority_downsample(labels: np.ndarray, num: int) -> np.ndarray:
    h4, w4 = labels.shape
    h, w = h4 // _SS, w4 // _SS
    counts = np.zeros((num, h, w), dtype=np.int32)
    blocks = labels.reshape(h, _SS, w, _SS)
    for c in range(num):
        counts[c] = (blocks == c).sum(axis=(1, 3))
    return counts.argmax(axis=0).astype(np.uint8)


def _box_downsample(img: np.ndarray) -> np.ndarray:
    h4, w4 = img.shape[:2]
    h, w = h4 // _SS, w4 // _SS
    return img.reshape(h, _SS, w, _SS, -1).mean(axis=(1, 3))


def _quantize(img: np.ndarray) -> np.ndarray:
    return np.round(np.clip(img, 0.0, 1.0) * 255.0) / 255.0


def generate_sample(seed: int, mode: str, resolution: tuple[int, int] = (128, 96),
                    sample_id: str | None = None) -> SampleRecord:
    """Render one deterministic sample. Paired mode adds the in-shop canvas
    and the exact person->in-shop flow."""
    if mode not in ("paired", "unpaired"):
        raise ContractViolation(f"unknown mode '{mode}'")
    h, w = resolution
    if h % 8 or w % 8 or h <= 0 or w <= 0:
        raise ContractViolation(f"resolution {h}×{w} must be positive and divisible by 8")

    rng = np.random.default_rng(seed)
    style = STYLES[rng.integers(0, len(STYLES))]
    sleeves_long = bool(rng.random() < 0.5)

    # hi-res evaluation grid in base-pixel coordinates
    xs = (np.arange(w * _SS) + 0.5) / _SS - 0.5
    ys = (np.arange(h * _SS) + 0.5) / _SS - 0.5
    gx, gy = np.meshgrid(xs, ys)

    # ----- body geometry -----
    cx = w * (0.5 + rng.uniform(-0.04, 0.04))
    head_r = h * rng.uniform(0.055, 0.068)
    head_cy = h * 0.13
    shoulder_y = h * 0.25
    bw2 = w * rng.uniform(0.14, 0.18)
    waist_y = h * rng.uniform(0.50, 0.56)
    hip_y = h * 0.62
    long_hair = bool(rng.random() < 0.5)

    arm = {}
    for side, sgn in (("left", -1.0), ("right", 1.0)):
        phi = np.deg2rad(rng.uniform(8.0, 24.0))
        arm[side] = {
            "origin": np.array([cx + sgn * bw2, shoulder_y + h * 0.012]),
            "dir": np.array([sgn * np.sin(phi), np.cos(phi)]),
            "len": h * rng.uniform(0.30, 0.36),
            "halfw": w * rng.uniform(0.024, 0.032),
        }

    # ----- in-shop top geometry (shop canvas shares the resolution) -----
    scx = w * 0.5
    sw2 = w * rng.uniform(0.19, 0.23)
    st_y = h * 0.20
    hem_base = {
        "tucked": rng.uniform(0.34, 0.38),
        "untucked": rng.uniform(0.42, 0.48),
        "overlong": rng.uniform(0.55, 0.62),
        "asymmetric": rng.uniform(0.42, 0.50),
    }[style] * h
    hem_slant = (h * 0.12 * (1.0 if rng.random() < 0.5 else -1.0)
                 if style == "asymmetric" else 0.0)
    notch_rx, notch_ry = sw2 * 0.45, h * 0.045
    psi = np.deg2rad(38.0)
    shop_sleeve_len = h * (rng.uniform(0.24, 0.30) if sleeves_long
                           else rng.uniform(0.10, 0.14))
    shop_sleeve_halfw = w * rng.uniform(0.042, 0.055)
    shop_attach = {
        "left": np.array([scx - sw2, st_y + h * 0.02]),
        "right": np.array([scx + sw2, st_y + h * 0.02]),
    }
    shop_axis = {
        "left": np.array([-np.sin(psi), np.cos(psi)]),
        "right": np.array([np.sin(psi), np.cos(psi)]),
    }

    def shop_hem(px):
        return st_y + hem_base + hem_slant * (px - (scx - sw2)) / (2.0 * sw2)

    def shop_torso_mask(px, py):
        base = (np.abs(px - scx) <= sw2) & (py >= st_y) & (py <= shop_hem(px))
        return base & ~_ellipse(px, py, scx, st_y, notch_rx, notch_ry)

    def shop_sleeve_mask(side, px, py):
        return _capsule(px, py, shop_attach[side], shop_axis[side],
                        shop_sleeve_len, shop_sleeve_halfw)

    # clothes texture: smooth (band-limited) stripes survive resampling checks
    c1 = _hsv_color(rng)
    striped = bool(rng.random() < 0.6)
    c2 = _hsv_color(rng) if striped else c1
    period = rng.uniform(10.0, 16.0)

    def shop_color(px, py):
        ramp = 0.88 + 0.20 * np.clip((px - (scx - sw2)) / (2.0 * sw2), 0.0, 1.0)
        if striped:
            a = 0.5 + 0.5 * np.sin(2.0 * np.pi * py / period)
            base = a[..., None] * c1 + (1.0 - a[..., None]) * c2
        else:
            base = np.broadcast_to(c1, px.shape + (3,)).copy()
        return np.clip(base * ramp[..., None], 0.0, 1.0)

    # ----- wearing maps: one affine per part, person canvas -> shop canvas -----
    tw2 = bw2 * 1.12
    sy_t = rng.uniform(0.95, 1.05)
    torso_map = _Affine(np.array([[sw2 / tw2, 0.0], [0.0, sy_t]]),
                        np.array([scx - sw2 - (cx - tw2) * sw2 / tw2,
                                  st_y - (shoulder_y - h * 0.01) * sy_t]))
    sleeve_map = {}
    for side in ("left", "right"):
        a = arm[side]
        sleeve_map[side] = _frame_affine(
            src_origin=a["origin"], src_axis=a["dir"],
            dst_origin=shop_attach[side], dst_axis=shop_axis[side],
            s_along=rng.uniform(0.95, 1.05),
            s_across=shop_sleeve_halfw / (a["halfw"] * 1.5),
        )
    part_maps = {"torso": torso_map, "left_sleeve": sleeve_map["left"],
                 "right_sleeve": sleeve_map["right"]}

    # ----- rasterize person layout at 4x -----
    labels = np.full(gx.shape, BACKGROUND, dtype=np.uint8)

    neck_hw = head_r * 0.32
    labels[_rect(gx, gy, cx - neck_hw, head_cy, cx + neck_hw, shoulder_y + h * 0.02)] = SKIN
    labels[_rect(gx, gy, cx - bw2, shoulder_y, cx + bw2, hip_y)] = SKIN
    for side, cls in (("left", LEFT_ARM), ("right", RIGHT_ARM)):
        a = arm[side]
        labels[_capsule(gx, gy, a["origin"], a["dir"], a["len"], a["halfw"])] = cls

    bot_x0, bot_x1 = cx - bw2 * 1.05, cx + bw2 * 1.05
    bot_y1 = h * rng.uniform(0.88, 0.94)
    bottom_mask_hi = _rect(gx, gy, bot_x0, waist_y, bot_x1, bot_y1)

    worn = {}
    for name, amap in part_maps.items():
        qx, qy = amap(gx, gy)
        if name == "torso":
            worn[name] = shop_torso_mask(qx, qy)
        else:
            worn[name] = shop_sleeve_mask(name.split("_")[0], qx, qy)

    parts_hi = np.zeros(gx.shape, dtype=np.uint8)  # 0 none, 1..3 per part
    if style == "tucked":
        for i, name in enumerate(PART_NAMES):
            labels[worn[name]] = UPPER
            parts_hi[worn[name]] = i + 1
        labels[bottom_mask_hi] = BOTTOM
    else:
        labels[bottom_mask_hi] = BOTTOM
        for i, name in enumerate(PART_NAMES):
            labels[worn[name]] = UPPER
            parts_hi[worn[name]] = i + 1

    hair_mask = _ellipse(gx, gy, cx, head_cy - head_r * 0.15,
                         head_r * 1.18, head_r * 1.28)
    if long_hair:
        lock_w = head_r * 0.45
        lock_end = shoulder_y + rng.uniform(2.0, 9.0)
        for sgn in (-1.0, 1.0):
            hair_mask |= _rect(gx, gy, cx + sgn * head_r * 0.95 - lock_w / 2,
                               head_cy, cx + sgn * head_r * 0.95 + lock_w / 2,
                               lock_end)
    labels[hair_mask] = HAIR
    labels[_ellipse(gx, gy, cx, head_cy, head_r * 0.78, head_r)] = FACE
    parts_hi[labels != UPPER] = 0

    # ----- person image at 4x -----
    bg = rng.uniform(0.55, 0.92, size=3)
    skin = np.array([0.92, 0.75, 0.62]) * rng.uniform(0.75, 1.05)
    hair_c = _hsv_color(rng, s_range=(0.3, 0.8), v_range=(0.15, 0.5))
    bottom_c = _hsv_color(rng)
    shade = (1.0 - 0.08 * (gy / h - 0.5))[..., None]

    img = np.empty(gx.shape + (3,), dtype=np.float64)
    img[:] = bg
    img[labels == SKIN] = skin
    img[labels == LEFT_ARM] = skin * 0.96
    img[labels == RIGHT_ARM] = skin * 0.96
    bpix = labels == BOTTOM
    bramp = 0.85 + 0.3 * np.clip((gy - waist_y) / (bot_y1 - waist_y), 0, 1)
    img[bpix] = np.clip(bottom_c * bramp[bpix, None], 0, 1)
    for name, amap in part_maps.items():
        sel = worn[name] & (labels == UPPER)
        qx, qy = amap(gx, gy)
        img[sel] = shop_color(qx[sel], qy[sel])
    img[labels == HAIR] = hair_c
    img[labels == FACE] = np.clip(skin * 1.06, 0, 1)
    img = np.clip(img * shade, 0.0, 1.0)

    person = _box_downsample(img)
    layout_idx = _majority_downsample(labels, NUM_CLASSES)

    # background noise (base res, background pixels only)
    noise = rng.uniform(-0.02, 0.02, size=person.shape)
    person = np.where((layout_idx == BACKGROUND)[..., None], person + noise, person)
    person = _quantize(person)

    # visible per-part masks at base res (majority over the part map)
    part_counts = np.zeros((len(PART_NAMES), h, w), dtype=np.int32)
    blocks = parts_hi.reshape(h, _SS, w, _SS)
    for i in range(len(PART_NAMES)):
        part_counts[i] = (blocks == i + 1).sum(axis=(1, 3))
    upper_base = layout_idx == UPPER
    winner = part_counts.argmax(axis=0)
    part_masks = np.zeros((len(PART_NAMES), h, w), dtype=np.float32)
    for i in range(len(PART_NAMES)):
        part_masks[i] = (upper_base & (winner == i)).astype(np.float32)

    # ----- keypoints -----
    kp = np.zeros((NUM_KEYPOINTS, 2), dtype=np.float64)
    la, ra = arm["left"], arm["right"]
    kp[0] = (cx, head_cy)
    kp[1] = (cx, shoulder_y)
    kp[2] = ra["origin"]
    kp[3] = ra["origin"] + 0.55 * ra["len"] * ra["dir"]
    kp[4] = ra["origin"] + ra["len"] * ra["dir"]
    kp[5] = la["origin"]
    kp[6] = la["origin"] + 0.55 * la["len"] * la["dir"]
    kp[7] = la["origin"] + la["len"] * la["dir"]
    kp[8] = (cx + bw2 * 0.6, hip_y)
    kp[9] = (cx + bw2 * 0.55, h * 0.78)
    kp[10] = (cx + bw2 * 0.5, h * 0.96)
    kp[11] = (cx - bw2 * 0.6, hip_y)
    kp[12] = (cx - bw2 * 0.55, h * 0.78)
    kp[13] = (cx - bw2 * 0.5, h * 0.96)
    kp[14] = (cx + head_r * 0.3, head_cy - head_r * 0.15)
    kp[15] = (cx - head_r * 0.3, head_cy - head_r * 0.15)
    kp[16] = (cx + head_r * 0.7, head_cy)
    kp[17] = (cx - head_r * 0.7, head_cy)

    layout = np.zeros((h, w, NUM_CLASSES), dtype=np.float32)
    np.put_along_axis(layout, layout_idx[..., None].astype(np.int64), 1.0, axis=-1)

    record = SampleRecord(
        id=sample_id if sample_id is not None else f"{mode[0]}{seed:08d}",
        seed=seed, mode=mode, style=style,
        person=torch.from_numpy(person.astype(np.float32)),
        layout=torch.from_numpy(layout),
        keypoints=torch.from_numpy(kp.astype(np.float32)),
        part_masks=torch.from_numpy(part_masks),
    )
    if mode != "paired":
        return record

    # ----- in-shop canvas + exact flow -----
    shop_labels = np.zeros(gx.shape, dtype=np.uint8)  # 0 bg, 1..3 parts
    shop_labels[shop_torso_mask(gx, gy)] = 1
    shop_labels[shop_sleeve_mask("left", gx, gy)] = 2
    shop_labels[shop_sleeve_mask("right", gx, gy)] = 3

    shop_img = np.empty(gx.shape + (3,), dtype=np.float64)
    shop_img[:] = np.array([0.93, 0.93, 0.93])
    sel = shop_labels > 0
    shop_img[sel] = shop_color(gx[sel], gy[sel])

    inshop = _box_downsample(shop_img)
    shop_idx = _majority_downsample(shop_labels, 4)
    shop_noise = rng.uniform(-0.015, 0.015, size=inshop.shape)
    inshop = np.where((shop_idx == 0)[..., None], inshop + shop_noise, inshop)
    inshop = _quantize(inshop)

    inshop_parts = np.stack([(shop_idx == i + 1) for i in range(3)]).astype(np.float32)

    bx, by = np.meshgrid(np.arange(w, dtype=np.float64),
                         np.arange(h, dtype=np.float64))
    flow = np.zeros((h, w, 2), dtype=np.float32)
    for i, name in enumerate(PART_NAMES):
        qx, qy = part_maps[name](bx, by)
        sel = part_masks[i] > 0.5
        flow[sel, 0] = (qx - bx)[sel]
        flow[sel, 1] = (qy - by)[sel]

    record.inshop = torch.from_numpy(inshop.astype(np.float32))
    record.inshop_part_masks = torch.from_numpy(inshop_parts)
    record.gt_flow = torch.from_numpy(flow)
    return record


# ---------------------------------------------------------------------------
# flow file format: 16-byte header (magic, H, W, C) + planar float32 LE


def write_flow_file(path, flow: torch.Tensor) -> None:
    arr = flow.detach().cpu().numpy().astype("<f4")
    h, w, c = arr.shape
    with open(path, "wb") as f:
        f.write(FLOW_MAGIC)
        f.write(struct.pack("<III", h, w, c))
        f.write(arr.transpose(2, 0, 1).tobytes())


def read_flow_file(path) -> torch.Tensor:
    with open(path, "rb") as f:
        head = f.read(16)
        if len(head) != 16 or head[:4] != FLOW_MAGIC:
            raise DataError(f"{path}: not a flow file (bad magic)")
        h, w, c = struct.unpack("<III", head[4:])
        payload = f.read()
    expected = h * w * c * 4
    if len(payload) != expected:
        raise DataError(f"{path}: expected {expected} payload bytes, got {len(payload)}")
    arr = np.frombuffer(payload, dtype="<f4").reshape(c, h, w).transpose(1, 2, 0)
    return torch.from_numpy(arr.copy())


# ---------------------------------------------------------------------------
# dataset directory IO


def _save_image(path, img: torch.Tensor) -> None:
    arr = (img.numpy() * 255.0).round().astype(np.uint8)
    Image.fromarray(arr).save(path)


def _load_image(path) -> torch.Tensor:
    arr = np.asarray(Image.open(path).convert("RGB"), dtype=np.float32) / 255.0
    return torch.from_numpy(arr)


def _save_mask(path, mask: torch.Tensor) -> None:
    arr = (mask.numpy() > 0.5).astype(np.uint8) * 255
    Image.fromarray(arr, mode="L").save(path)


def _load_mask(path) -> torch.Tensor:
    arr = np.asarray(Image.open(path).convert("L"), dtype=np.float32) / 255.0
    return torch.from_numpy((arr > 0.5).astype(np.float32))


def _save_layout(path, layout: torch.Tensor) -> None:
    idx = layout.argmax(dim=-1).numpy().astype(np.uint8)
    im = Image.fromarray(idx, mode="P")
    flat = []
    for rgb in PALETTE:
        flat.extend(rgb)
    im.putpalette(flat + [0] * (768 - len(flat)))
    im.save(path)


def _load_layout(path) -> torch.Tensor:
    im = Image.open(path)
    if im.mode != "P":
        raise DataError(f"{path}: layout must be an indexed image")
    idx = np.asarray(im, dtype=np.int64)
    if idx.max() >= NUM_CLASSES:
        raise DataError(f"{path}: layout index {idx.max()} out of range")
    layout = np.zeros(idx.shape + (NUM_CLASSES,), dtype=np.float32)
    np.put_along_axis(layout, idx[..., None], 1.0, axis=-1)
    return torch.from_numpy(layout)


def write_dataset(n: int, mode: str, out_dir, base_seed: int,
                  resolution: tuple[int, int] = (128, 96)) -> Path:
    """Generate n samples and write them under out_dir. Returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for i in range(n):
        seed = base_seed + i
        rec = generate_sample(seed, mode, resolution,
                              sample_id=f"{mode[0]}{i:04d}")
        sub = out / rec.id
        sub.mkdir(exist_ok=True)
        _save_image(sub / "person.png", rec.person)
        _save_layout(sub / "layout.png", rec.layout)
        with open(sub / "keypoints.txt", "w") as f:
            for x, y in rec.keypoints.tolist():
                f.write(f"{x!r} {y!r}\n")
        for name, m in zip(PART_NAMES, rec.part_masks):
            _save_mask(sub / f"part_{name}.png", m)
        if rec.mode == "paired":
            _save_image(sub / "inshop.png", rec.inshop)
            for name, m in zip(PART_NAMES, rec.inshop_part_masks):
                _save_mask(sub / f"inshop_part_{name}.png", m)
            write_flow_file(sub / "flow.bvfl", rec.gt_flow)
        rows.append((rec.id, rec.id, rec.mode, rec.style, seed))

    with open(out / "palette.txt", "w") as f:
        for name, rgb in zip(CLASSES, PALETTE):
            f.write(f"{name}\t{rgb[0]},{rgb[1]},{rgb[2]}\n")
    with open(out / "manifest.tsv", "w") as f:
        f.write("id\tpath\tmode\tstyle\tseed\n")
        for row in rows:
            f.write("\t".join(str(v) for v in row) + "\n")
    return out / "manifest.tsv"


def load_dataset(dataset_dir) -> list[SampleRecord]:
    """Load and validate every sample listed in the directory manifest."""
    root = Path(dataset_dir)
    manifest = root / "manifest.tsv"
    if not manifest.is_file():
        raise DataError(f"no manifest.tsv in {root}")
    with open(manifest) as f:
        lines = f.read().splitlines()
    if not lines or lines[0].split("\t") != ["id", "path", "mode", "style", "seed"]:
        raise DataError(f"{manifest}: bad or missing header")

    records = []
    for ln, line in enumerate(lines[1:], start=2):
        fields = line.split("\t")
        if len(fields) != 5:
            raise DataError(f"{manifest}:{ln}: expected 5 fields, got {len(fields)}")
        sid, rel, mode, style, seed = fields
        if mode not in ("paired", "unpaired") or style not in STYLES:
            raise DataError(f"{manifest}:{ln}: bad mode/style '{mode}'/'{style}'")
        sub = root / rel
        try:
            person = _load_image(sub / "person.png")
            layout = _load_layout(sub / "layout.png")
            with open(sub / "keypoints.txt") as f:
                kp = [[float(v) for v in row.split()] for row in f.read().split("\n") if row]
            parts = torch.stack([_load_mask(sub / f"part_{n}.png") for n in PART_NAMES])
        except OSError as exc:
            raise DataError(f"sample {sid}: missing or unreadable file: {exc}") from exc
        if len(kp) != NUM_KEYPOINTS:
            raise DataError(f"sample {sid}: expected {NUM_KEYPOINTS} keypoints, got {len(kp)}")
        if person.shape[:2] != layout.shape[:2]:
            raise DataError(f"sample {sid}: person/layout shape mismatch")
        upper = layout[..., UPPER]
        if bool((parts.sum(dim=0) > upper + 1e-6).any()):
            raise DataError(f"sample {sid}: part masks leak outside the clothes mask")

        rec = SampleRecord(
            id=sid, seed=int(seed), mode=mode, style=style, person=person,
            layout=layout,
            keypoints=torch.tensor(kp, dtype=torch.float32),
            part_masks=parts,
        )
        if mode == "paired":
            try:
                rec.inshop = _load_image(sub / "inshop.png")
                rec.inshop_part_masks = torch.stack(
                    [_load_mask(sub / f"inshop_part_{n}.png") for n in PART_NAMES])
                rec.gt_flow = read_flow_file(sub / "flow.bvfl")
            except OSError as exc:
                raise DataError(f"sample {sid}: paired files missing: {exc}") from exc
            if rec.gt_flow.shape[:2] != person.shape[:2] or rec.gt_flow.shape[2] != 2:
                raise DataError(f"sample {sid}: flow shape {tuple(rec.gt_flow.shape)}")
        records.append(rec)
    return records


def file_checksum(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        digest.update(f.read())
    return digest.hexdigest()
