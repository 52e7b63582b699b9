"""Per-joint range-of-motion image sets."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import UnknownJoint
from ..mjcf import JointDescriptor, RobotModel
from .render import FULL_SIZE, ZOOM_SIZE, Camera, RasterImage, render_pose

SAMPLES = ("negative", "default", "positive")
VIEWS = ("full", "zoom")
SAMPLE_FRACTION = 0.5


def sample_values(joint: JointDescriptor) -> dict[str, float]:
    """Default and default +/- half of the half-range, clipped into limits."""
    offset = SAMPLE_FRACTION * (joint.limit_max - joint.limit_min) / 2.0
    d = joint.default_value
    return {
        "negative": joint.clip(d - offset),
        "default": d,
        "positive": joint.clip(d + offset),
    }


@dataclass
class JointVisuals:
    joint: str
    values: dict[str, float]
    images: dict[tuple[str, str], RasterImage] = field(default_factory=dict)

    @property
    def degenerate(self) -> list[str]:
        """Samples that clipping collapsed onto the default value."""
        return [s for s in ("negative", "positive") if self.values[s] == self.values["default"]]

    def image_list(self, include_zoom: bool = True) -> list[tuple[str, RasterImage]]:
        return [
            (f"{self.joint}_{s}_{v}", self.images[(s, v)])
            for s in SAMPLES
            for v in VIEWS
            if (s, v) in self.images and (include_zoom or v != "zoom")
        ]


@dataclass
class VisualDataset:
    model_name: str
    entries: dict[str, JointVisuals]

    def __getitem__(self, joint: str) -> JointVisuals:
        try:
            return self.entries[joint]
        except KeyError:
            raise UnknownJoint(joint) from None

    def __len__(self) -> int:
        return len(self.entries)

    def image_count(self) -> int:
        return sum(len(e.images) for e in self.entries.values())

    def write(self, directory: str | Path) -> Path:
        """Write PNGs plus a ``manifest.json`` (joint -> values -> image paths)."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        manifest = {"model": self.model_name, "joints": {}}
        for name, entry in self.entries.items():
            paths = {}
            for (sample, view), img in sorted(entry.images.items()):
                rel = f"{name}_{sample}_{view}.png"
                img.save(directory / rel)
                paths.setdefault(sample, {})[view] = rel
            manifest["joints"][name] = {
                "values": entry.values,
                "degenerate": entry.degenerate,
                "images": paths,
            }
        path = directory / "manifest.json"
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        return path


def _render_joint(model: RobotModel, joint: JointDescriptor, camera: Camera, sizes) -> JointVisuals:
    values = sample_values(joint)
    i = model.joint_index(joint.name)
    images = {}
    for sample, value in values.items():
        pose = model.default_array()
        pose[i] = value
        label = f"{joint.name} = {value:+.3f}"
        images[(sample, "full")] = render_pose(model, pose, "full", size=sizes[0], camera=camera, label=label)
        images[(sample, "zoom")] = render_pose(model, pose, "zoom", joint.name, size=sizes[1], camera=camera, label=label)
    return JointVisuals(joint.name, values, images)


def build_visual_dataset(
    model: RobotModel,
    *,
    camera: Camera = Camera(),
    full_size: int = FULL_SIZE,
    zoom_size: int = ZOOM_SIZE,
    render: bool = True,
    max_workers: int | None = None,
) -> VisualDataset:
    """Three poses x two views per joint; other joints stay at default.

    Rendering may run in a thread pool; entries keep joint order regardless.
    """
    if not render:
        return VisualDataset(model.name, {j.name: JointVisuals(j.name, sample_values(j)) for j in model.joints})
    sizes = (full_size, zoom_size)
    if max_workers and max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            done = list(pool.map(lambda j: _render_joint(model, j, camera, sizes), model.joints))
    else:
        done = [_render_joint(model, j, camera, sizes) for j in model.joints]
    return VisualDataset(model.name, {e.joint: e for e in done})
