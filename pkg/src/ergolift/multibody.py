"""Floating-base kinematic trees parametrized by link hardware.

A ``Model`` is an ordered list of links connected by 1-DoF joints, plus
named attachment frames (hands, feet, grasp points).  Link geometry and
inertia are functions of the per-link hardware (density, length
multiplier); scaling a link's length multiplier also slides every child
joint and attachment frame mounted along its growth axis.

Velocity convention is mixed/world-aligned: the base twist is the world
linear velocity of the base origin stacked with the world angular
velocity, and frame Jacobians map ``nu = [v_base; w_base; s_dot]`` to
the same kind of frame twist.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Mapping, Optional

import numpy as np

from . import fad
from .shapes import (LinkHardware, Shape, shape_com, shape_dims,
                     shape_inertia_origin, shape_mass)
from .spatial import (GRAVITY, assemble_spatial_inertia, ensure_rotation,
                      exp_so3, skew)

E3 = np.array([0.0, 0.0, 1.0])

ROLE_LEFT_FOOT = "left_foot"
ROLE_RIGHT_FOOT = "right_foot"
ROLE_LEFT_HAND = "left_hand"
ROLE_RIGHT_HAND = "right_hand"
ROLE_GRASP = "grasp"

_FOOT_ROLES = (ROLE_LEFT_FOOT, ROLE_RIGHT_FOOT)


class ModelError(ValueError):
    """Raised when a model violates a structural invariant."""


class UnknownFrameError(KeyError):
    """Raised when a named frame or link does not exist."""


@dataclass(frozen=True, eq=False)
class Joint:
    """1-DoF joint attaching a link to its parent.

    ``offset`` is expressed in the parent frame (its z component rides
    the parent's growth axis), ``rpy`` is the fixed rotation applied
    after the offset, and ``axis`` is the motion axis in the child
    frame.
    """

    kind: str  # "revolute" | "prismatic"
    axis: np.ndarray
    offset: np.ndarray
    rpy: np.ndarray
    limits: tuple

    def __post_init__(self):
        if self.kind not in ("revolute", "prismatic"):
            raise ModelError(f"unknown joint kind {self.kind!r}")
        axis = np.asarray(self.axis, dtype=float)
        n = np.linalg.norm(axis)
        if not np.isfinite(n) or n < 1e-12:
            raise ModelError("joint axis must be a nonzero vector")
        object.__setattr__(self, "axis", axis / n)
        object.__setattr__(self, "rpy", np.asarray(self.rpy, dtype=float))
        lo, hi = self.limits
        if not lo < hi:
            raise ModelError("joint limits must satisfy lo < hi")
        object.__setattr__(self, "limits", (float(lo), float(hi)))


@dataclass(frozen=True, eq=False)
class Link:
    name: str
    shape: Shape
    hardware: LinkHardware
    parent: int = -1
    joint: Optional[Joint] = None


@dataclass(frozen=True, eq=False)
class FrameDef:
    """Named frame rigidly attached to a link.

    The offset z component rides the link's growth axis and scales with
    its length multiplier.
    """

    name: str
    link: int
    offset: np.ndarray
    rpy: np.ndarray
    role: Optional[str] = None


@dataclass(frozen=True, eq=False)
class ParamGroup:
    """Links sharing one (density, length multiplier) decision pair."""

    name: str
    links: tuple


@dataclass(frozen=True, eq=False)
class HardwareBounds:
    length_multiplier: tuple = (0.5, 2.0)
    density: tuple = (500.0, 8000.0)


@dataclass(frozen=True, eq=False)
class Model:
    """Kinematic tree: links[0] is the floating base."""

    name: str
    links: tuple
    frames: tuple = ()
    groups: tuple = ()
    bounds: HardwareBounds = field(default_factory=HardwareBounds)

    @property
    def n_joints(self):
        return len(self.links) - 1

    @cached_property
    def _frame_map(self):
        return {f.name: f for f in self.frames}

    @cached_property
    def _link_map(self):
        return {l.name: i for i, l in enumerate(self.links)}

    @cached_property
    def joint_names(self):
        return tuple(l.name for l in self.links[1:])

    @cached_property
    def _paths(self):
        """Per link, the dof indices from the base down to that link."""
        paths = [()]
        for i, link in enumerate(self.links[1:], start=1):
            paths.append(paths[link.parent] + (i - 1,))
        return paths

    def link_index(self, name):
        try:
            return self._link_map[name]
        except KeyError:
            raise UnknownFrameError(f"unknown link {name!r}") from None

    def frame(self, name):
        try:
            return self._frame_map[name]
        except KeyError:
            raise UnknownFrameError(f"unknown frame {name!r}") from None

    def frames_with_role(self, role):
        return tuple(f.name for f in self.frames if f.role == role)

    def joint_limits(self):
        lo = np.array([l.joint.limits[0] for l in self.links[1:]])
        hi = np.array([l.joint.limits[1] for l in self.links[1:]])
        return lo, hi

    def total_mass(self):
        return float(sum(fad.value(shape_mass(l.shape, l.hardware))
                         for l in self.links))

    def group_hardware(self):
        """Nominal (density, length multiplier) per optimization group."""
        out = {}
        for g in self.groups:
            hw = self.links[self.link_index(g.links[0])].hardware
            out[g.name] = (hw.density, hw.length_multiplier)
        return out

    def validate(self):
        if not self.links:
            raise ModelError("model has no links")
        if self.links[0].parent != -1 or self.links[0].joint is not None:
            raise ModelError("links[0] must be the base (no parent, no joint)")
        seen = set()
        for i, link in enumerate(self.links):
            if link.name in seen:
                raise ModelError(f"duplicate link name {link.name!r}")
            seen.add(link.name)
            if i == 0:
                continue
            if link.joint is None:
                raise ModelError(f"link {link.name!r} has no joint")
            if not 0 <= link.parent < i:
                raise ModelError(
                    f"link {link.name!r} parent must precede it in the tree")
            if any(d <= 0 for d in shape_dims(link.shape)):
                raise ModelError(f"link {link.name!r}: dimensions must be positive")
        for link in self.links:
            if link.hardware.density <= 0:
                raise ModelError(f"link {link.name!r}: density must be positive")
            if link.hardware.length_multiplier <= 0:
                raise ModelError(
                    f"link {link.name!r}: length multiplier must be positive")
        fseen = set()
        for f in self.frames:
            if f.name in fseen:
                raise ModelError(f"duplicate frame name {f.name!r}")
            fseen.add(f.name)
            if not 0 <= f.link < len(self.links):
                raise ModelError(f"frame {f.name!r} references a missing link")
        for g in self.groups:
            for name in g.links:
                if name not in self._link_map:
                    raise ModelError(
                        f"group {g.name!r} references unknown link {name!r}")
        return self


@dataclass(frozen=True, eq=False)
class Configuration:
    """Floating-base pose plus joint positions."""

    base_pos: object
    base_rot: object
    s: object

    @staticmethod
    def neutral(model: Model):
        return Configuration(np.zeros(3), np.eye(3), np.zeros(model.n_joints))


@dataclass(frozen=True, eq=False)
class SystemVelocity:
    """Mixed base twist plus joint velocities."""

    base: np.ndarray
    s_dot: np.ndarray

    def as_vector(self):
        return np.concatenate([self.base, self.s_dot])


# ---------------------------------------------------------------------------
# hardware application


def _scale_z(offset, ratio):
    if isinstance(ratio, float) and ratio == 1.0:
        return offset
    return fad.stack([offset[0], offset[1], offset[2] * ratio])


def apply_hardware(model: Model, params: Mapping[str, LinkHardware],
                   validate: bool = True) -> Model:
    """Model with new hardware and consistently rescaled mounting offsets.

    Offsets of child joints and attachment frames slide along the scaled
    link's growth axis by the ratio of new to old length multiplier.
    Links absent from ``params`` keep their nominal values bit for bit.
    """
    if not params:
        return model
    for name in params:
        if name not in model._link_map:
            raise UnknownFrameError(f"unknown link {name!r} in hardware params")
    if validate:
        lo_lm, hi_lm = model.bounds.length_multiplier
        lo_rho, hi_rho = model.bounds.density
        for name, hw in params.items():
            if isinstance(hw.density, (int, float)) and not (
                    lo_rho <= hw.density <= hi_rho):
                raise ValueError(
                    f"density for {name!r} outside bounds [{lo_rho}, {hi_rho}]")
            if isinstance(hw.length_multiplier, (int, float)) and not (
                    lo_lm <= hw.length_multiplier <= hi_lm):
                raise ValueError(
                    f"length multiplier for {name!r} outside bounds "
                    f"[{lo_lm}, {hi_lm}]")

    ratios = {}
    for name, hw in params.items():
        old = model.links[model.link_index(name)].hardware
        same = (hw.length_multiplier is old.length_multiplier
                or (isinstance(hw.length_multiplier, (int, float))
                    and hw.length_multiplier == old.length_multiplier))
        ratios[model.link_index(name)] = (
            1.0 if same else hw.length_multiplier / old.length_multiplier)

    new_links = []
    for i, link in enumerate(model.links):
        hw = params.get(link.name, link.hardware)
        joint = link.joint
        if joint is not None and ratios.get(link.parent, 1.0) != 1.0:
            joint = replace(joint,
                            offset=_scale_z(joint.offset, ratios[link.parent]))
        if hw is not link.hardware or joint is not link.joint:
            link = replace(link, hardware=hw, joint=joint)
        new_links.append(link)
    new_frames = []
    for f in model.frames:
        if ratios.get(f.link, 1.0) != 1.0:
            f = replace(f, offset=_scale_z(f.offset, ratios[f.link]))
        new_frames.append(f)
    return Model(name=model.name, links=tuple(new_links),
                 frames=tuple(new_frames), groups=model.groups,
                 bounds=model.bounds)


def group_params(model: Model, values: Mapping[str, tuple]) -> dict:
    """Expand per-group (density, multiplier) pairs to per-link hardware."""
    out = {}
    for g in model.groups:
        if g.name not in values:
            continue
        rho, lm = values[g.name]
        for name in g.links:
            out[name] = LinkHardware(density=rho, length_multiplier=lm)
    return out


# ---------------------------------------------------------------------------
# kinematics


def _rot_axis(axis, angle):
    """Rodrigues rotation about a fixed unit axis, dual-safe in the angle."""
    K = skew(axis)
    K2 = K @ K
    return np.eye(3) + fad.sin(angle) * K + (1.0 - fad.cos(angle)) * K2


def _rpy_const(rpy):
    rpy = np.asarray(rpy, dtype=float)
    if not rpy.any():
        return np.eye(3)
    return fad.rpy_matrix(rpy[0], rpy[1], rpy[2])


@dataclass(eq=False)
class KinTree:
    """World poses of every link plus per-joint world axes and pivots."""

    model: Model
    q: Configuration
    rot: list
    pos: list
    axis_w: list
    pivot_w: list

    def frame_pose(self, name):
        f = self.model.frame(name)
        R = self.rot[f.link]
        p = self.pos[f.link] + R @ f.offset
        return R @ _rpy_const(f.rpy), p

    def link_com_w(self, i):
        link = self.model.links[i]
        c = shape_com(link.shape, link.hardware)
        return self.pos[i] + self.rot[i] @ c


def kinematics(model: Model, q: Configuration) -> KinTree:
    rot = [q.base_rot]
    pos = [q.base_pos]
    axis_w = []
    pivot_w = []
    for i, link in enumerate(model.links[1:], start=1):
        j = link.joint
        Rp, pp = rot[link.parent], pos[link.parent]
        p_joint = pp + Rp @ j.offset
        R_pre = Rp @ _rpy_const(j.rpy)
        sj = q.s[i - 1]
        if j.kind == "revolute":
            R_i = R_pre @ _rot_axis(j.axis, sj)
            p_i = p_joint
        else:
            R_i = R_pre
            p_i = p_joint + R_pre @ (j.axis * sj)
        rot.append(R_i)
        pos.append(p_i)
        axis_w.append(R_pre @ j.axis)
        pivot_w.append(p_joint)
    return KinTree(model=model, q=q, rot=rot, pos=pos,
                   axis_w=axis_w, pivot_w=pivot_w)


def forward_kinematics(model: Model, q: Configuration, frame: str):
    """World (rotation, position) of a named frame, or of a link frame."""
    tree = kinematics(model, q)
    if frame in model._frame_map:
        return tree.frame_pose(frame)
    if frame in model._link_map:
        i = model.link_index(frame)
        return tree.rot[i], tree.pos[i]
    raise UnknownFrameError(f"unknown frame {frame!r}")


def _point_jacobian(model, tree, link_idx, point_w):
    """Mixed Jacobian of a point riding a given link."""
    n = model.n_joints
    zeros3 = np.zeros(3)
    lin_cols = [None] * (6 + n)
    ang_cols = [None] * (6 + n)
    d = point_w - tree.pos[0]
    Sd = skew(d)
    eye = np.eye(3)
    for k in range(3):
        lin_cols[k] = eye[:, k]
        ang_cols[k] = zeros3
        lin_cols[3 + k] = -Sd[:, k]
        ang_cols[3 + k] = eye[:, k]
    on_path = set(model._paths[link_idx])
    for j in range(n):
        if j not in on_path:
            lin_cols[6 + j] = zeros3
            ang_cols[6 + j] = zeros3
            continue
        link = model.links[j + 1]
        a = tree.axis_w[j]
        if link.joint.kind == "revolute":
            lin_cols[6 + j] = fad.cross3(a, point_w - tree.pivot_w[j])
            ang_cols[6 + j] = a
        else:
            lin_cols[6 + j] = a
            ang_cols[6 + j] = zeros3
    return fad.concatenate([fad.stack(lin_cols, axis=1),
                            fad.stack(ang_cols, axis=1)], axis=0)


def frame_jacobian(model: Model, q: Configuration, frame: str,
                   tree: Optional[KinTree] = None):
    """Mixed 6x(n+6) Jacobian mapping nu to the frame's world twist."""
    if tree is None:
        tree = kinematics(model, q)
    if frame in model._frame_map:
        f = model.frame(frame)
        link_idx = f.link
        _, p = tree.frame_pose(frame)
    elif frame in model._link_map:
        link_idx = model.link_index(frame)
        p = tree.pos[link_idx]
    else:
        raise UnknownFrameError(f"unknown frame {frame!r}")
    return _point_jacobian(model, tree, link_idx, p)


def link_jacobian(model: Model, q: Configuration, link_idx: int,
                  tree: Optional[KinTree] = None):
    if tree is None:
        tree = kinematics(model, q)
    return _point_jacobian(model, tree, link_idx, tree.pos[link_idx])


# ---------------------------------------------------------------------------
# dynamics at zero velocity


def _link_inertial(link: Link):
    m = shape_mass(link.shape, link.hardware)
    c = shape_com(link.shape, link.hardware)
    I0 = shape_inertia_origin(link.shape, link.hardware)
    return m, c, I0


def _mixed_spatial_inertia(link, R):
    """6x6 inertia about the link origin, world axes."""
    m, c, I0 = _link_inertial(link)
    m = float(fad.value(m))
    c_w = fad.value(R) @ fad.value(c)
    I_w = fad.value(R) @ fad.value(I0) @ fad.value(R).T
    return assemble_spatial_inertia(m, c_w, I_w)


def mass_matrix(model: Model, q: Configuration) -> np.ndarray:
    """Composite rigid-body mass matrix in mixed coordinates."""
    tree = kinematics(model, q)
    L = len(model.links)
    comp = [
        _mixed_spatial_inertia(link, tree.rot[i])
        for i, link in enumerate(model.links)
    ]
    pos = [fad.value(p) for p in tree.pos]
    # accumulate composite inertia up the tree
    for i in range(L - 1, 0, -1):
        par = model.links[i].parent
        d = pos[i] - pos[par]
        V = np.eye(6)
        V[:3, 3:] = -skew(d)
        comp[par] = comp[par] + V.T @ comp[i] @ V

    n = model.n_joints
    M = np.zeros((6 + n, 6 + n))
    M[:6, :6] = comp[0]

    def motion_vector(j):
        link = model.links[j + 1]
        a = fad.value(tree.axis_w[j])
        if link.joint.kind == "revolute":
            return np.concatenate([np.zeros(3), a])
        return np.concatenate([a, np.zeros(3)])

    for j in range(n):
        i = j + 1
        phi = motion_vector(j)
        F = comp[i] @ phi
        M[6 + j, 6 + j] = phi @ F
        origin = pos[i]
        k = model.links[i].parent
        while True:
            # move the wrench reference point to the ancestor origin
            F = F.copy()
            F[3:] += np.cross(origin - pos[k], F[:3])
            origin = pos[k]
            if k == 0:
                M[:6, 6 + j] = F
                M[6 + j, :6] = F
                break
            M[6 + (k - 1), 6 + j] = motion_vector(k - 1) @ F
            M[6 + j, 6 + (k - 1)] = M[6 + (k - 1), 6 + j]
            k = model.links[k].parent
    return M


def gravity_vector(model: Model, q: Configuration,
                   tree: Optional[KinTree] = None):
    """Generalized gravity g(q): static equilibrium reads g = B tau + J^T f.

    Computed from subtree mass moments, so it is cheap and dual-safe.
    """
    if tree is None:
        tree = kinematics(model, q)
    L = len(model.links)
    masses = []
    moments = []
    for i, link in enumerate(model.links):
        m, c, _ = _link_inertial(link)
        com_w = tree.pos[i] + tree.rot[i] @ c
        masses.append(m)
        moments.append(m * com_w)
    msub = list(masses)
    csub = list(moments)
    for i in range(L - 1, 0, -1):
        par = model.links[i].parent
        msub[par] = msub[par] + msub[i]
        csub[par] = csub[par] + csub[i]

    zero = msub[0] * 0.0
    lin = fad.stack([zero, zero, GRAVITY * msub[0]])
    ang = GRAVITY * fad.cross3(csub[0] - msub[0] * tree.pos[0], E3)
    rows = [lin, ang]
    joint_rows = []
    for j in range(model.n_joints):
        i = j + 1
        link = model.links[i]
        if link.joint.kind == "revolute":
            u = csub[i] - msub[i] * tree.pivot_w[j]
            a = tree.axis_w[j]
            # z component of a x u only
            joint_rows.append(GRAVITY * (a[0] * u[1] - a[1] * u[0]))
        else:
            joint_rows.append(GRAVITY * msub[i] * tree.axis_w[j][2])
    if joint_rows:
        rows.append(fad.stack(joint_rows))
    return fad.concatenate(rows)


def com(model: Model, q: Configuration, tree: Optional[KinTree] = None):
    """World center of mass and total mass."""
    if tree is None:
        tree = kinematics(model, q)
    total = 0.0
    moment = np.zeros(3)
    for i, link in enumerate(model.links):
        m, c, _ = _link_inertial(link)
        total = total + m
        moment = moment + m * (tree.pos[i] + tree.rot[i] @ c)
    return moment / total, total


def com_height_null_config(model: Model,
                           params: Optional[Mapping] = None):
    """Whole-body CoM height at zero joint positions, feet on the ground.

    With foot frames present the base is lowered so the mean sole height
    is zero (the two are equal for symmetric models); without feet the
    base frame itself sits on the ground plane.
    """
    scaled = apply_hardware(model, params, validate=False) if params else model
    q0 = Configuration(np.zeros(3), np.eye(3),
                       np.zeros(scaled.n_joints))
    tree = kinematics(scaled, q0)
    c, _ = com(scaled, q0, tree)
    feet = [scaled.frame(n) for role in _FOOT_ROLES
            for n in scaled.frames_with_role(role)]
    if not feet:
        return c[2]
    sole = [tree.frame_pose(f.name)[1][2] for f in feet]
    ground = sum(sole) / len(sole)
    return c[2] - ground


# ---------------------------------------------------------------------------
# test helpers


def perturb_configuration(q: Configuration, delta) -> Configuration:
    """Apply a mixed-coordinates displacement [dp, dw, ds] to q."""
    delta = np.asarray(delta, dtype=float)
    return Configuration(
        base_pos=q.base_pos + delta[:3],
        base_rot=exp_so3(delta[3:6]) @ q.base_rot,
        s=q.s + delta[6:],
    )


def random_configuration(model: Model, rng, pos_scale=0.5) -> Configuration:
    lo, hi = model.joint_limits()
    s = rng.uniform(lo, hi)
    w = rng.normal(size=3) * 0.3
    return Configuration(
        base_pos=rng.normal(size=3) * pos_scale,
        base_rot=ensure_rotation(exp_so3(w)),
        s=s,
    )
