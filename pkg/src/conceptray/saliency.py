"""Per-pixel saliency maps: gradient-CAM, systematic occlusion, and CSV import.

The in-repo techniques are deterministic stand-ins for external
perturbation/gradient explainers; externally produced maps (any float grid)
enter through ``import_saliency`` and flow through the same evaluation
machinery. Maps are [0, 1] grids whose max is 1 unless the map is all-zero.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from ._kernels import bilinear_resize
from .corpus import ImageTensor, save_image_png
from .errors import SaliencyError


@dataclass(frozen=True)
class SaliencyMap:
    """Importance grid for one image/target, source-agnostic."""

    values: np.ndarray
    technique: str
    case_id: str = ""
    target: str = ""

    def __post_init__(self):
        v = self.values
        if v.ndim != 2:
            raise SaliencyError(f"saliency map must be 2-D, got shape {v.shape}")
        if v.size and (float(v.min()) < 0.0 or float(v.max()) > 1.0):
            raise SaliencyError("saliency values must lie in [0, 1]")
        if v.size and float(v.max()) not in (0.0, 1.0):
            raise SaliencyError("saliency max must be 1 unless the map is all-zero")


@dataclass(frozen=True)
class MaskFraction:
    """Percentage of pixels selected by a top-fraction mask."""

    n: float

    def __post_init__(self):
        if not (0.0 < self.n <= 100.0):
            raise SaliencyError(f"mask fraction must be in (0, 100], got {self.n}")


def _max_normalize(raw: np.ndarray) -> np.ndarray:
    raw = np.maximum(raw, 0.0)
    peak = float(raw.max()) if raw.size else 0.0
    return raw / peak if peak > 0.0 else np.zeros_like(raw)


def _as_pixels(image) -> np.ndarray:
    pixels = image.pixels if isinstance(image, ImageTensor) else np.asarray(image)
    return np.ascontiguousarray(pixels, dtype=np.float32)


def gradient_cam(model, image, target_index: int, case_id: str = "") -> SaliencyMap:
    """Gradient-weighted class activation map for one target output.

    Channel weights are the spatial means of the target-score gradients at
    the model's final convolutional activations; the map is the positive
    part of the weighted activation sum, bilinearly upsampled to image size
    and max-normalized. An all-zero map means no positive evidence.
    """
    import torch

    net = getattr(model, "net", model)
    cam_layer = getattr(net, "cam_layer", None)
    if cam_layer is None:
        raise SaliencyError("model does not expose convolutional features (no cam_layer)")

    pixels = _as_pixels(image)
    captured: dict[str, torch.Tensor] = {}

    def fwd_hook(_module, _inp, out):
        captured["act"] = out

    def bwd_hook(_module, _grad_in, grad_out):
        captured["grad"] = grad_out[0]

    h1 = cam_layer.register_forward_hook(fwd_hook)
    h2 = cam_layer.register_full_backward_hook(bwd_hook)
    try:
        net.eval()
        x = torch.from_numpy(pixels).unsqueeze(0).unsqueeze(0)
        logits = net(x)
        if not (0 <= target_index < logits.shape[1]):
            raise SaliencyError(f"target index {target_index} outside model outputs")
        net.zero_grad(set_to_none=True)
        logits[0, target_index].backward()
    finally:
        h1.remove()
        h2.remove()

    act = captured["act"].detach()[0]  # (C, h, w)
    grad = captured["grad"].detach()[0]
    weights = grad.mean(dim=(1, 2), keepdim=True)
    cam = torch.relu((weights * act).sum(dim=0)).numpy().astype(np.float64)
    upsampled = bilinear_resize(cam, pixels.shape[0], pixels.shape[1])
    target = (
        model.concept_ids[target_index]
        if hasattr(model, "concept_ids")
        else str(target_index)
    )
    return SaliencyMap(_max_normalize(upsampled), "gradcam", case_id=case_id, target=target)


def _patch_positions(extent: int, patch: int, stride: int) -> list[int]:
    positions = list(range(0, extent - patch + 1, stride))
    tail = extent - patch
    if positions[-1] != tail:
        positions.append(tail)  # guarantee full coverage
    return positions


def occlusion_saliency(
    score_fn: Callable[[np.ndarray], np.ndarray],
    image,
    patch_size: int,
    stride: int,
    fill_value: float,
    case_id: str = "",
    target: str = "",
    batch_size: int = 128,
) -> SaliencyMap:
    """Systematic-occlusion saliency.

    ``score_fn`` maps an (N, H, W) stack to N scalar scores. Each patch
    position contributes ``max(0, score(original) - score(occluded))`` to
    every pixel it covers; contributions are averaged per pixel over the
    covering patches, then max-normalized. ``fill_value`` should be the
    training-set mean intensity.
    """
    pixels = _as_pixels(image).astype(np.float64)
    h, w = pixels.shape
    if patch_size > min(h, w):
        raise SaliencyError(f"patch_size {patch_size} exceeds image size {h}x{w}")
    if stride < 1:
        raise SaliencyError(f"stride must be >= 1, got {stride}")

    base = float(np.asarray(score_fn(pixels[None, ...])).ravel()[0])
    positions = [
        (y, x)
        for y in _patch_positions(h, patch_size, stride)
        for x in _patch_positions(w, patch_size, stride)
    ]
    contrib = np.zeros((h, w), dtype=np.float64)
    count = np.zeros((h, w), dtype=np.float64)
    for start in range(0, len(positions), batch_size):
        chunk = positions[start : start + batch_size]
        stack = np.repeat(pixels[None, ...], len(chunk), axis=0)
        for i, (y, x) in enumerate(chunk):
            stack[i, y : y + patch_size, x : x + patch_size] = fill_value
        drops = np.maximum(0.0, base - np.asarray(score_fn(stack), dtype=np.float64).ravel())
        for (y, x), drop in zip(chunk, drops):
            contrib[y : y + patch_size, x : x + patch_size] += drop
            count[y : y + patch_size, x : x + patch_size] += 1.0
    averaged = np.divide(contrib, count, out=np.zeros_like(contrib), where=count > 0)
    return SaliencyMap(_max_normalize(averaged), "occlusion", case_id=case_id, target=target)


def concept_score_fn(model, target_index: int) -> Callable[[np.ndarray], np.ndarray]:
    """Batched scorer for one concept output of a ConceptModel."""
    def fn(batch: np.ndarray) -> np.ndarray:
        return model.predict_batch(batch)[:, target_index]

    return fn


def mask_pixel_count(shape: tuple[int, int], frac: MaskFraction | float) -> int:
    """Pixels selected at fraction n: round(n/100 * H*W), half away from zero, min 1."""
    n = frac.n if isinstance(frac, MaskFraction) else MaskFraction(float(frac)).n
    total = shape[0] * shape[1]
    k = int(np.floor(n / 100.0 * total + 0.5))
    return max(1, min(k, total))


def top_fraction_mask(smap: SaliencyMap, frac: MaskFraction | float) -> np.ndarray:
    """Boolean mask of the n% highest-valued pixels; ties broken row-major.

    Nested by construction: the mask at n1 <= n2 is a subset of the mask at
    n2, because both are prefixes of one stable ordering.
    """
    values = smap.values
    k = mask_pixel_count(values.shape, frac)
    order = np.argsort(-values.ravel(), kind="stable")
    mask = np.zeros(values.size, dtype=bool)
    mask[order[:k]] = True
    return mask.reshape(values.shape)


def import_saliency(
    path: str | Path,
    expected_dims: tuple[int, int],
    technique: str = "imported",
    case_id: str = "",
    target: str = "",
) -> SaliencyMap:
    """Read a CSV float grid, min-max normalize to [0, 1], and check dims."""
    path = Path(path)
    if not path.exists():
        raise SaliencyError(f"saliency file not found: {path}")
    rows: list[list[float]] = []
    with path.open(encoding="utf-8") as fh:
        for r, row in enumerate(csv.reader(fh)):
            if not row:
                continue
            parsed = []
            for c, cell in enumerate(row):
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise SaliencyError(
                        f"{path}: non-numeric cell at row {r + 1}, column {c + 1}: {cell!r}"
                    ) from None
            rows.append(parsed)
    if not rows or any(len(r) != len(rows[0]) for r in rows):
        raise SaliencyError(f"{path}: ragged or empty CSV grid")
    grid = np.asarray(rows, dtype=np.float64)
    if grid.shape != tuple(expected_dims):
        raise SaliencyError(
            f"{path}: grid is {grid.shape[0]}x{grid.shape[1]}, "
            f"expected {expected_dims[0]}x{expected_dims[1]}"
        )
    lo, hi = float(grid.min()), float(grid.max())
    values = (grid - lo) / (hi - lo) if hi > lo else np.zeros_like(grid)
    return SaliencyMap(values, technique, case_id=case_id, target=target)


def export_saliency_csv(smap: SaliencyMap, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        for row in smap.values:
            writer.writerow([f"{v:.9g}" for v in row])


def export_mask_png(mask: np.ndarray, path: str | Path) -> None:
    """Binary mask as a 0/255 PNG for visual audit."""
    save_image_png(mask.astype(np.float64), path)
