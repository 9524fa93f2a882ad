"""Concatenates the images of one record into a single composite.

Samples carrying more than ``max_images`` images are rejected outright, and
the orientation (horizontal vs vertical strip) is chosen to minimize the
aspect-ratio extremeness max(W/H, H/W) of the result. Tiles are only ever
downscaled: the common edge is the minimum height (horizontal) or minimum
width (vertical) of the sources, so no pixel data is upsampled.
"""

from __future__ import annotations

from dataclasses import dataclass

from PIL import Image

from .records import SourceRecord

LAYOUTS = ("single", "horizontal", "vertical")

_RESAMPLE = {
    "nearest": Image.Resampling.NEAREST,
    "bilinear": Image.Resampling.BILINEAR,
}

REJECT_TOO_MANY = "TooManyImages"
REJECT_TOO_EXTREME = "TooExtreme"
REJECT_TOO_SMALL = "TooSmall"
REJECT_UNREADABLE = "ImageUnreadable"


class TooManyImages(Exception):
    pass


class TooExtreme(Exception):
    pass


class TooSmall(Exception):
    pass


class DimensionMismatch(Exception):
    pass


@dataclass(frozen=True)
class CompositionPolicy:
    max_images: int = 4
    max_extremeness: float = 3.0
    min_edge_px: int = 32
    resize_filter: str = "bilinear"

    def __post_init__(self) -> None:
        if self.max_images < 1:
            raise ValueError("max_images >= 1")
        if self.max_extremeness < 1.0:
            raise ValueError("max_extremeness >= 1")
        if self.min_edge_px < 1:
            raise ValueError("min_edge_px >= 1")
        if self.resize_filter not in _RESAMPLE:
            raise ValueError(f"resize_filter in {tuple(_RESAMPLE)}")


@dataclass(frozen=True)
class LayoutDecision:
    layout: str
    target_common_edge: int
    extremeness: float
    width: int
    height: int
    source_dims: tuple[tuple[int, int], ...]
    tile_dims: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class CompositeImage:
    width: int
    height: int
    layout: str
    source_count: int
    image: Image.Image

    def __post_init__(self) -> None:
        if not 1 <= self.source_count <= 4:
            raise ValueError("source_count in [1, 4]")
        if self.width < 1 or self.height < 1:
            raise ValueError("width, height >= 1")
        if (self.layout == "single") != (self.source_count == 1):
            raise ValueError("layout single iff source_count = 1")


@dataclass(frozen=True)
class Rejection:
    reason: str
    detail: str = ""


def _round_px(x: float) -> int:
    # Round half up, never below one pixel.
    return max(1, int(x + 0.5))


def _extremeness(width: int, height: int) -> float:
    return max(width / height, height / width)


def _candidate(dims: list[tuple[int, int]], layout: str) -> tuple[int, int, int, list[tuple[int, int]]]:
    """Planned (W, H, common_edge, tiles) for one orientation."""
    if layout == "horizontal":
        common = min(h for _, h in dims)
        tiles = [(_round_px(w * common / h), common) for w, h in dims]
        return sum(w for w, _ in tiles), common, common, tiles
    common = min(w for w, _ in dims)
    tiles = [(common, _round_px(h * common / w)) for w, h in dims]
    return common, sum(h for _, h in tiles), common, tiles


def plan_layout(dims: list[tuple[int, int]], policy: CompositionPolicy) -> LayoutDecision:
    """Choose the concatenation orientation for images of the given sizes.

    Raises TooManyImages / TooExtreme / TooSmall when the record cannot be
    composed under the policy (checked in that order).
    """
    if not dims:
        raise ValueError("dims non-empty")
    if len(dims) > policy.max_images:
        raise TooManyImages(f"{len(dims)} images > max {policy.max_images}")

    if len(dims) == 1:
        w, h = dims[0]
        layout, width, height, common, tiles = "single", w, h, h, [dims[0]]
    else:
        hw, hh, hcommon, htiles = _candidate(dims, "horizontal")
        vw, vh, vcommon, vtiles = _candidate(dims, "vertical")
        # Ties break to horizontal (typical figure-panel reading order).
        if _extremeness(hw, hh) <= _extremeness(vw, vh):
            layout, width, height, common, tiles = "horizontal", hw, hh, hcommon, htiles
        else:
            layout, width, height, common, tiles = "vertical", vw, vh, vcommon, vtiles

    extremeness = _extremeness(width, height)
    if extremeness > policy.max_extremeness:
        raise TooExtreme(f"extremeness {extremeness:.3f} > {policy.max_extremeness}")
    if any(min(tw, th) < policy.min_edge_px for tw, th in tiles):
        raise TooSmall(f"scaled edge below {policy.min_edge_px}px")

    return LayoutDecision(
        layout=layout,
        target_common_edge=common,
        extremeness=extremeness,
        width=width,
        height=height,
        source_dims=tuple(dims),
        tile_dims=tuple(tiles),
    )


def compose(images: list[Image.Image], decision: LayoutDecision, policy: CompositionPolicy) -> CompositeImage:
    """Concatenate ``images`` per an earlier plan_layout decision.

    Source order is preserved left-to-right (horizontal) or top-to-bottom
    (vertical); a single image passes through pixel-identical.
    """
    if tuple(im.size for im in images) != decision.source_dims:
        raise DimensionMismatch(
            f"images {[im.size for im in images]} do not match planned {decision.source_dims}"
        )

    if decision.layout == "single":
        canvas = images[0].convert("RGB")
    else:
        resample = _RESAMPLE[policy.resize_filter]
        canvas = Image.new("RGB", (decision.width, decision.height))
        offset = 0
        for img, tile in zip(images, decision.tile_dims):
            scaled = img.convert("RGB")
            if scaled.size != tile:
                scaled = scaled.resize(tile, resample)
            if decision.layout == "horizontal":
                canvas.paste(scaled, (offset, 0))
                offset += tile[0]
            else:
                canvas.paste(scaled, (0, offset))
                offset += tile[1]

    return CompositeImage(
        width=decision.width,
        height=decision.height,
        layout=decision.layout,
        source_count=len(images),
        image=canvas,
    )


def apply_policy(
    record: SourceRecord, images: list[Image.Image], policy: CompositionPolicy
) -> CompositeImage | Rejection:
    """Compose the record's images, or explain why the record is excluded."""
    if len(images) != len(record.image_paths):
        raise ValueError("images must correspond 1:1 with record.image_paths")
    dims = [im.size for im in images]
    try:
        decision = plan_layout(dims, policy)
    except TooManyImages as exc:
        return Rejection(REJECT_TOO_MANY, str(exc))
    except TooExtreme as exc:
        return Rejection(REJECT_TOO_EXTREME, str(exc))
    except TooSmall as exc:
        return Rejection(REJECT_TOO_SMALL, str(exc))
    return compose(images, decision, policy)
