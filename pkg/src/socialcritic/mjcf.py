"""MJCF parsing into an immutable kinematic model.

Supported subset: ``mujoco``, ``compiler`` (angle, eulerseq), ``worldbody``,
``body``, ``joint`` (hinge and slide), ``geom`` (sphere, capsule, cylinder,
box) and ``keyframe/key``. Other elements (actuators, sensors, assets,
defaults, ...) are ignored. Geoms of other types are skipped with a warning.
"""

from __future__ import annotations

import hashlib
import logging
import math
import re
import xml.etree.ElementTree as ET
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import (
    DuplicateName,
    InvalidGeom,
    InvalidRange,
    MalformedModel,
    MalformedXml,
    MissingRange,
    UnknownJoint,
    UnsupportedJoint,
)

logger = logging.getLogger(__name__)

JOINT_KINDS = ("hinge", "slide")
GEOM_KINDS = ("sphere", "capsule", "cylinder", "box")
WORLD = "world"

_IDENTITY_QUAT = (1.0, 0.0, 0.0, 0.0)
_SKIPPED_GEOMS = {"plane", "mesh", "ellipsoid", "hfield", "sdf"}
_GEOM_SIZE_COUNT = {"sphere": 1, "capsule": 2, "cylinder": 2, "box": 3}


@dataclass(frozen=True)
class GeomPrimitive:
    kind: str
    size: tuple[float, ...]
    position: tuple[float, float, float] = (0.0, 0.0, 0.0)
    orientation: tuple[float, float, float, float] = _IDENTITY_QUAT

    def bounding_radius(self) -> float:
        """Radius of a sphere about the geom origin enclosing the geom."""
        if self.kind == "sphere":
            return self.size[0]
        if self.kind in ("capsule", "cylinder"):
            return self.size[0] + self.size[1]
        return math.sqrt(sum(s * s for s in self.size))


@dataclass(frozen=True)
class JointDescriptor:
    name: str
    kind: str
    body: str
    axis: tuple[float, float, float]
    limit_min: float
    limit_max: float
    default_value: float = 0.0
    position: tuple[float, float, float] = (0.0, 0.0, 0.0)

    @property
    def span(self) -> float:
        return self.limit_max - self.limit_min

    @property
    def half_range(self) -> float:
        return (self.limit_max - self.limit_min) / 2.0

    def clip(self, value: float) -> float:
        return min(max(float(value), self.limit_min), self.limit_max)


@dataclass(frozen=True)
class BodyNode:
    name: str
    parent: str | None
    local_position: tuple[float, float, float] = (0.0, 0.0, 0.0)
    local_orientation: tuple[float, float, float, float] = _IDENTITY_QUAT
    geoms: tuple[GeomPrimitive, ...] = ()
    attached_joints: tuple[str, ...] = ()


@dataclass(frozen=True)
class MorphologySummary:
    text: str
    dof_per_group: dict[str, int]


@dataclass(frozen=True)
class RobotModel:
    """Parsed kinematic tree.

    ``bodies`` is in document (pre-)order, so every parent precedes its
    children and ``bodies[0]`` is the world root.
    """

    name: str
    bodies: tuple[BodyNode, ...]
    joints: tuple[JointDescriptor, ...]
    default_pose: tuple[float, ...]
    source_hash: str = field(default="", compare=False)

    @property
    def joint_names(self) -> list[str]:
        return [j.name for j in self.joints]

    @property
    def n_joints(self) -> int:
        return len(self.joints)

    def joint(self, name: str) -> JointDescriptor:
        for j in self.joints:
            if j.name == name:
                return j
        raise UnknownJoint(name)

    def joint_index(self, name: str) -> int:
        for i, j in enumerate(self.joints):
            if j.name == name:
                return i
        raise UnknownJoint(name)

    def has_joint(self, name: str) -> bool:
        return any(j.name == name for j in self.joints)

    def body(self, name: str) -> BodyNode:
        for b in self.bodies:
            if b.name == name:
                return b
        raise KeyError(name)

    def subtree(self, body_name: str) -> list[str]:
        """Names of ``body_name`` and all of its descendants, in tree order."""
        keep = {body_name}
        out = []
        for b in self.bodies:
            if b.name == body_name or b.parent in keep:
                keep.add(b.name)
                out.append(b.name)
        return out

    def limits_array(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.array([j.limit_min for j in self.joints], dtype=float)
        hi = np.array([j.limit_max for j in self.joints], dtype=float)
        return lo, hi

    def default_array(self) -> np.ndarray:
        return np.array(self.default_pose, dtype=float)


# --- parsing -------------------------------------------------------------------


def _floats(text: str | None, what: str) -> list[float]:
    if text is None:
        return []
    try:
        return [float(tok) for tok in text.split()]
    except ValueError:
        raise MalformedModel(f"cannot parse numbers in {what}: {text!r}") from None


def _vec3(text: str | None, default, what: str) -> tuple[float, float, float]:
    if text is None:
        return tuple(float(v) for v in default)
    vals = _floats(text, what)
    if len(vals) != 3:
        raise MalformedModel(f"{what} needs 3 values, got {text!r}")
    return tuple(vals)


def _unit(v, what: str) -> tuple[float, float, float]:
    arr = np.asarray(v, dtype=float)
    n = float(np.linalg.norm(arr))
    if n < 1e-12:
        raise MalformedModel(f"{what} has zero length")
    return tuple(float(x) for x in arr / n)


def _wxyz(rot: Rotation) -> tuple[float, float, float, float]:
    x, y, z, w = rot.as_quat()
    q = np.array([w, x, y, z])
    q /= np.linalg.norm(q)
    if q[0] < 0:
        q = -q
    return tuple(float(v) for v in q)


def _z_to(direction) -> tuple[float, float, float, float]:
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    z = np.array([0.0, 0.0, 1.0])
    c = float(np.dot(z, d))
    if c > 1.0 - 1e-12:
        return _IDENTITY_QUAT
    if c < -1.0 + 1e-12:
        return (0.0, 1.0, 0.0, 0.0)
    axis = np.cross(z, d)
    axis /= np.linalg.norm(axis)
    return _wxyz(Rotation.from_rotvec(axis * math.acos(c)))


class _Compiler:
    def __init__(self, root: ET.Element):
        # MuJoCo's compiler defaults: degrees, intrinsic xyz
        self.degrees = True
        self.eulerseq = "xyz"
        for comp in root.iter("compiler"):
            angle = comp.get("angle")
            if angle is not None:
                if angle not in ("degree", "radian"):
                    raise MalformedModel(f"compiler angle must be degree or radian, got {angle!r}")
                self.degrees = angle == "degree"
            seq = comp.get("eulerseq")
            if seq is not None:
                if len(seq) != 3 or set(seq.lower()) - set("xyz"):
                    raise MalformedModel(f"bad eulerseq {seq!r}")
                self.eulerseq = seq

    def angle(self, value: float) -> float:
        return math.radians(value) if self.degrees else value

    def orientation(self, el: ET.Element, what: str) -> tuple[float, float, float, float]:
        given = [k for k in ("quat", "axisangle", "euler", "xyaxes", "zaxis") if el.get(k) is not None]
        if len(given) > 1:
            raise MalformedModel(f"{what} specifies several orientations: {given}")
        if not given:
            return _IDENTITY_QUAT
        key = given[0]
        vals = _floats(el.get(key), f"{what} {key}")
        if key == "quat":
            if len(vals) != 4:
                raise MalformedModel(f"{what} quat needs 4 values")
            q = np.array(vals)
            n = np.linalg.norm(q)
            if n < 1e-12:
                raise MalformedModel(f"{what} quat has zero norm")
            q = q / n
            return tuple(float(v) for v in q)
        if key == "axisangle":
            if len(vals) != 4:
                raise MalformedModel(f"{what} axisangle needs 4 values")
            axis = np.array(_unit(vals[:3], f"{what} axisangle"))
            return _wxyz(Rotation.from_rotvec(axis * self.angle(vals[3])))
        if key == "euler":
            if len(vals) != 3:
                raise MalformedModel(f"{what} euler needs 3 values")
            # MuJoCo: lowercase = axes move with the frame; scipy uses the opposite case
            seq = self.eulerseq.swapcase()
            return _wxyz(Rotation.from_euler(seq, [self.angle(v) for v in vals]))
        if key == "zaxis":
            if len(vals) != 3:
                raise MalformedModel(f"{what} zaxis needs 3 values")
            return _z_to(_unit(vals, f"{what} zaxis"))
        if len(vals) != 6:
            raise MalformedModel(f"{what} xyaxes needs 6 values")
        x = np.array(_unit(vals[:3], f"{what} xyaxes"))
        y = np.array(vals[3:])
        y = y - np.dot(y, x) * x
        y = np.array(_unit(y, f"{what} xyaxes"))
        z = np.cross(x, y)
        return _wxyz(Rotation.from_matrix(np.column_stack([x, y, z])))


def _parse_geom(el: ET.Element, body: str, compiler: _Compiler) -> GeomPrimitive | None:
    kind = el.get("type", "sphere")
    label = f"geom {el.get('name') or '<unnamed>'} in body {body!r}"
    if kind in _SKIPPED_GEOMS:
        # floors are routine in MJCF files and irrelevant to the robot's own shape
        log = logger.debug if kind == "plane" else logger.warning
        log("skipping unsupported %s geom (%s)", kind, label)
        return None
    if kind not in GEOM_KINDS:
        raise InvalidGeom(f"{label}: unknown geom type {kind!r}")
    size = _floats(el.get("size"), f"{label} size")
    pos = _vec3(el.get("pos"), (0, 0, 0), f"{label} pos")
    quat = compiler.orientation(el, label) if el.get("fromto") is None else None
    fromto = el.get("fromto")
    if fromto is not None:
        if kind not in ("capsule", "cylinder"):
            raise InvalidGeom(f"{label}: fromto is only supported for capsule and cylinder")
        ft = _floats(fromto, f"{label} fromto")
        if len(ft) != 6:
            raise InvalidGeom(f"{label}: fromto needs 6 values")
        a, b = np.array(ft[:3]), np.array(ft[3:])
        length = float(np.linalg.norm(b - a))
        if length < 1e-12:
            raise InvalidGeom(f"{label}: fromto endpoints coincide")
        if not size:
            raise InvalidGeom(f"{label}: missing radius")
        size = [size[0], length / 2.0]
        pos = tuple(float(v) for v in (a + b) / 2.0)
        quat = _z_to(b - a)
    need = _GEOM_SIZE_COUNT[kind]
    if len(size) < need:
        raise InvalidGeom(f"{label}: {kind} needs {need} size values, got {len(size)}")
    size = size[:need]
    if any(s <= 0 for s in size):
        raise InvalidGeom(f"{label}: sizes must be strictly positive, got {size}")
    return GeomPrimitive(kind=kind, size=tuple(float(s) for s in size), position=pos, orientation=quat)


def parse_mjcf(xml_text: str | bytes) -> RobotModel:
    """Parse MJCF text into a :class:`RobotModel`.

    Raises MalformedXml, UnsupportedJoint, MissingRange, InvalidRange,
    DuplicateName, InvalidGeom or MalformedModel.
    """
    raw = xml_text.encode("utf-8") if isinstance(xml_text, str) else bytes(xml_text)
    try:
        root = ET.fromstring(raw)
    except ET.ParseError as exc:
        raise MalformedXml(f"XML parse error: {exc}", line=exc.position[0]) from None
    if root.tag != "mujoco":
        raise MalformedModel(f"root element must be <mujoco>, got <{root.tag}>")
    worldbody = root.find("worldbody")
    if worldbody is None:
        raise MalformedModel("missing <worldbody>")

    compiler = _Compiler(root)

    bodies: OrderedDict[str, BodyNode] = OrderedDict()
    joints: list[JointDescriptor] = []
    refs: list[float] = []
    joint_names: set[str] = set()
    auto_id = 0

    def joint_from(el: ET.Element, body: str) -> JointDescriptor:
        name = el.get("name")
        kind = el.get("type", "hinge")
        if not name:
            raise MalformedModel(f"{kind} joint in body {body!r} has no name")
        if kind in ("ball", "free"):
            raise UnsupportedJoint(name, kind)
        if kind not in JOINT_KINDS:
            raise MalformedModel(f"joint {name!r} has unknown type {kind!r}")
        if name in joint_names:
            raise DuplicateName("joint", name)
        joint_names.add(name)
        rng = el.get("range")
        if rng is None:
            raise MissingRange(name)
        vals = _floats(rng, f"joint {name!r} range")
        if len(vals) != 2:
            raise MalformedModel(f"joint {name!r} range needs 2 values")
        lo, hi = vals
        ref = float(el.get("ref", "0"))
        if kind == "hinge":
            lo, hi, ref = compiler.angle(lo), compiler.angle(hi), compiler.angle(ref)
        if not lo < hi:
            raise InvalidRange(name, lo, hi)
        refs.append(ref)
        return JointDescriptor(
            name=name,
            kind=kind,
            body=body,
            axis=_unit(_vec3(el.get("axis"), (0, 0, 1), f"joint {name!r} axis"), f"joint {name!r} axis"),
            limit_min=lo,
            limit_max=hi,
            position=_vec3(el.get("pos"), (0, 0, 0), f"joint {name!r} pos"),
        )

    def walk(el: ET.Element, name: str, parent: str | None) -> None:
        nonlocal auto_id
        geoms = []
        attached = []
        children = []
        for child in el:
            if child.tag == "geom":
                g = _parse_geom(child, name, compiler)
                if g is not None:
                    geoms.append(g)
            elif child.tag == "joint":
                jd = joint_from(child, name)
                joints.append(jd)
                attached.append(jd.name)
            elif child.tag == "freejoint":
                raise UnsupportedJoint(child.get("name") or f"<freejoint in {name}>", "free")
            elif child.tag == "body":
                children.append(child)
        if parent is None:
            pos, quat = (0.0, 0.0, 0.0), _IDENTITY_QUAT
        else:
            pos = _vec3(el.get("pos"), (0, 0, 0), f"body {name!r} pos")
            quat = compiler.orientation(el, f"body {name!r}")
        bodies[name] = BodyNode(
            name=name,
            parent=parent,
            local_position=pos,
            local_orientation=quat,
            geoms=tuple(geoms),
            attached_joints=tuple(attached),
        )
        for child in children:
            cname = child.get("name")
            if not cname:
                auto_id += 1
                cname = f"body{auto_id}"
            if cname in bodies or cname == WORLD:
                raise DuplicateName("body", cname)
            # reserve the name before recursing so siblings collide correctly
            bodies[cname] = None  # type: ignore[assignment]
            walk(child, cname, name)

    bodies[WORLD] = None  # type: ignore[assignment]
    walk(worldbody, WORLD, None)

    lo = np.array([j.limit_min for j in joints])
    hi = np.array([j.limit_max for j in joints])
    default = np.array(refs, dtype=float)
    key = root.find("keyframe/key")
    if key is not None and key.get("qpos") is not None:
        qpos = _floats(key.get("qpos"), "keyframe qpos")
        if len(qpos) != len(joints):
            raise MalformedModel(f"keyframe qpos has {len(qpos)} values for {len(joints)} joints")
        default = np.array(qpos, dtype=float)
    if len(joints):
        default = np.clip(default, lo, hi)
    joints = [
        JointDescriptor(**{**j.__dict__, "default_value": float(v)}) for j, v in zip(joints, default)
    ]

    # bodies were inserted parent-before-child, but placeholders were reserved
    # ahead of their contents; rebuild in pre-order
    ordered = _preorder(bodies)
    return RobotModel(
        name=root.get("model", "robot"),
        bodies=tuple(ordered),
        joints=tuple(joints),
        default_pose=tuple(float(v) for v in default),
        source_hash=hashlib.sha256(raw).hexdigest(),
    )


def _preorder(bodies: dict[str, BodyNode]) -> list[BodyNode]:
    kids: dict[str | None, list[BodyNode]] = {}
    for b in bodies.values():
        kids.setdefault(b.parent, []).append(b)
    out = []
    stack = list(reversed(kids.get(None, [])))
    while stack:
        b = stack.pop()
        out.append(b)
        stack.extend(reversed(kids.get(b.name, [])))
    return out


def load_mjcf(path: str | Path) -> RobotModel:
    return parse_mjcf(Path(path).read_bytes())


# --- queries -------------------------------------------------------------------


def extract_joint_set(model: RobotModel) -> list[JointDescriptor]:
    return list(model.joints)


def joint_limits(model: RobotModel, joint_name: str) -> tuple[float, float]:
    j = model.joint(joint_name)
    return j.limit_min, j.limit_max


_TRAILING = re.compile(r"_[^_]+$")


def joint_group(model: RobotModel, joint_name: str) -> str:
    """Limb group of a joint: the name minus its last ``_`` segment.

    Names without an underscore fall back to the model name with trailing
    digits removed (``arm3`` -> ``arm``).
    """
    if "_" in joint_name.strip("_"):
        return _TRAILING.sub("", joint_name)
    return re.sub(r"[\d_\-]+$", "", model.name) or model.name


def summarize_morphology(model: RobotModel) -> MorphologySummary:
    groups: OrderedDict[str, list[JointDescriptor]] = OrderedDict()
    for j in model.joints:
        groups.setdefault(joint_group(model, j.name), []).append(j)
    dof = {g: len(js) for g, js in groups.items()}

    n = model.n_joints
    lines = [
        f"The robot '{model.name}' has {n} degree{'s' if n != 1 else ''} of freedom"
        + (f" in {len(groups)} limb group{'s' if len(groups) != 1 else ''}." if groups else ".")
    ]
    for g, js in groups.items():
        kinds = sorted({j.kind for j in js})
        detail = ", ".join(
            f"{j.name} ({j.kind}, {j.limit_min:.3g} to {j.limit_max:.3g} {'rad' if j.kind == 'hinge' else 'm'})"
            for j in js
        )
        lines.append(f"The {g} has {len(js)}-DOF ({'/'.join(kinds)}): {detail}.")
    links = [f"{b.parent} -> {b.name}" for b in model.bodies if b.parent is not None]
    if links:
        lines.append("Body connectivity: " + "; ".join(links) + ".")
    return MorphologySummary(text=" ".join(lines), dof_per_group=dict(dof))
