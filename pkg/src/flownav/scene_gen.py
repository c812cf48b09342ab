"""Procedural generation of desk-scale semantic scenes and instructions.

Scenes are carved out of a solid wall canvas: a main room, side rooms
anchored on its perimeter, and L-shaped corridors joining room centers,
with rectangular targetable objects placed in the free space. Each object
keeps a free clearance ring around itself, which guarantees it is
reachable and keeps the free space connected.

Instructions are templated text paired with the machine-readable goal spec,
so downstream annotation never parses language. The template grammar is
fixed and reversible: :func:`parse_instruction` recovers the goal spec from
the text.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, SceneGenerationError, TargetNotFoundError
from .field_gen import GoalSpec, SIDES
from .grid_core import LabelMapping, ObjectInstance, SemanticMap

LABEL_FREE = 0
LABEL_WALL = 1

DEFAULT_LABEL_NAMES = {2: "chair", 3: "table", 4: "sofa", 5: "box", 6: "plant", 7: "cabinet"}

VERBS = ("Navigate to", "Move toward", "Go to", "Head to", "Walk to")
ORDINALS = ("first", "second", "third", "fourth", "fifth", "sixth", "seventh", "eighth", "ninth", "tenth")
ANCHORS = ("left", "top")

# Free clearance kept around every placed object. Gaps between obstacles
# must stay wide relative to the rollout query-grid cell (224 / 100 px):
# in narrow gaps, bilinear blending of the opposing unit-speed escape
# vectors from both sides creates spurious equilibria that stall rollouts.
_OBJECT_CLEARANCE = 8
_PLACEMENT_RETRIES = 400


@dataclass
class SceneSpec:
    width: int = 224
    height: int = 224
    n_rooms: int = 2
    n_objects: int = 4
    corridor_width: int = 10
    object_label_pool: tuple = tuple(sorted(DEFAULT_LABEL_NAMES))
    rng_seed: int = 0

    def __post_init__(self):
        if self.width < 32 or self.height < 32:
            raise ConfigurationError("scene dimensions must be at least 32 pixels")
        if self.corridor_width < 3:
            raise ConfigurationError("corridor_width must be at least 3")
        if self.n_rooms < 1:
            raise ConfigurationError("n_rooms must be at least 1")
        if self.n_objects < 0:
            raise ConfigurationError("n_objects must be nonnegative")
        if self.n_objects and not self.object_label_pool:
            raise ConfigurationError("object_label_pool is empty but objects were requested")


@dataclass
class Instruction:
    text: str
    spec: GoalSpec


def gen_scene(spec: SceneSpec):
    """Generate one scene. Returns (SemanticMap, LabelMapping).

    Deterministic per seed: the same spec always produces the same labels
    and instance list.
    """
    rng = np.random.default_rng(spec.rng_seed)
    w, h = spec.width, spec.height
    labels = np.full((h, w), LABEL_WALL, dtype=np.int64)

    rooms = _carve_rooms(labels, spec, rng)
    _carve_corridors(labels, rooms, spec)
    instances = _place_objects(labels, spec, rng)

    mapping = LabelMapping(
        free_labels=frozenset({LABEL_FREE}),
        obstacle_labels=frozenset({LABEL_WALL} | set(spec.object_label_pool)),
        targetable_labels=frozenset(spec.object_label_pool),
    )
    return SemanticMap(labels=labels, instances=instances), mapping


def _carve_rooms(labels, spec, rng):
    """One main room plus smaller side rooms overlapping its boundary.

    Rooms are confined to a central cluster window so start-goal geodesics
    stay short relative to the fixed rollout horizon; side rooms are
    anchored on the main room's perimeter, which keeps the union connected
    through wide openings rather than narrow doorways.
    """
    h, w = labels.shape
    margin = 4
    cluster = min(w, h) * 9 // 16
    cx0, cy0 = (w - cluster) // 2, (h - cluster) // 2

    main_lo, main_hi = cluster * 5 // 8, cluster * 7 // 8
    mw = int(rng.integers(main_lo, main_hi + 1))
    mh = int(rng.integers(main_lo, main_hi + 1))
    mx = cx0 + int(rng.integers(0, cluster - mw + 1))
    my = cy0 + int(rng.integers(0, cluster - mh + 1))
    labels[my:my + mh, mx:mx + mw] = LABEL_FREE
    rooms = [(mx, my, mw, mh)]

    side_lo = max(spec.corridor_width + 2, cluster // 4)
    side_hi = max(side_lo + 1, cluster * 3 // 8)
    for _ in range(spec.n_rooms - 1):
        rw = int(rng.integers(side_lo, side_hi + 1))
        rh = int(rng.integers(side_lo, side_hi + 1))
        # Center the side room on a point of the main room's perimeter.
        perim = rng.random()
        if perim < 0.25:
            px, py = mx, my + int(rng.integers(0, mh))
        elif perim < 0.5:
            px, py = mx + mw - 1, my + int(rng.integers(0, mh))
        elif perim < 0.75:
            px, py = mx + int(rng.integers(0, mw)), my
        else:
            px, py = mx + int(rng.integers(0, mw)), my + mh - 1
        x0 = int(np.clip(px - rw // 2, margin, w - margin - rw))
        y0 = int(np.clip(py - rh // 2, margin, h - margin - rh))
        labels[y0:y0 + rh, x0:x0 + rw] = LABEL_FREE
        rooms.append((x0, y0, rw, rh))
    return rooms


def _carve_corridors(labels, rooms, spec):
    half = spec.corridor_width // 2
    lo = spec.corridor_width - half  # asymmetric split keeps exact width
    h, w = labels.shape
    for (ax0, ay0, aw, ah), (bx0, by0, bw, bh) in zip(rooms, rooms[1:]):
        ax, ay = ax0 + aw // 2, ay0 + ah // 2
        bx, by = bx0 + bw // 2, by0 + bh // 2
        # Horizontal leg at ay, then vertical leg at bx.
        x_lo, x_hi = sorted((ax, bx))
        labels[max(ay - half, 0):min(ay + lo, h), max(x_lo - half, 0):min(x_hi + lo, w)] = LABEL_FREE
        y_lo, y_hi = sorted((ay, by))
        labels[max(y_lo - half, 0):min(y_hi + lo, h), max(bx - half, 0):min(bx + lo, w)] = LABEL_FREE
    # Keep the outer wall closed regardless of corridor clipping.
    labels[0, :] = LABEL_WALL
    labels[-1, :] = LABEL_WALL
    labels[:, 0] = LABEL_WALL
    labels[:, -1] = LABEL_WALL


def _place_objects(labels, spec, rng):
    h, w = labels.shape
    gap = _OBJECT_CLEARANCE
    lo_side = max(5, min(w, h) // 28)
    hi_side = max(lo_side + 1, min(w, h) // 14)
    instances = []
    for obj_i in range(spec.n_objects):
        label = int(rng.choice(np.asarray(spec.object_label_pool)))
        placed = False
        for _ in range(_PLACEMENT_RETRIES):
            ow = int(rng.integers(lo_side, hi_side + 1))
            oh = int(rng.integers(lo_side, hi_side + 1))
            x0 = int(rng.integers(1, w - ow - 1))
            y0 = int(rng.integers(1, h - oh - 1))
            ring = labels[max(y0 - gap, 0):y0 + oh + gap, max(x0 - gap, 0):x0 + ow + gap]
            if (ring == LABEL_FREE).all() and ring.shape == (oh + 2 * gap, ow + 2 * gap):
                labels[y0:y0 + oh, x0:x0 + ow] = label
                instances.append(ObjectInstance(
                    label=label,
                    bbox=(x0, y0, x0 + ow, y0 + oh),
                    center=((x0 + x0 + ow) // 2, (y0 + y0 + oh) // 2),
                ))
                placed = True
                break
        if not placed:
            raise SceneGenerationError(
                f"could not place object {obj_i} with a {gap}px free clearance ring "
                f"after {_PLACEMENT_RETRIES} attempts"
            )
    return instances


# ---------------------------------------------------------------------------
# Instruction templating
# ---------------------------------------------------------------------------


def gen_instruction(smap: SemanticMap, mapping: LabelMapping, rng_seed,
                    label_names=None) -> Instruction:
    """Sample a templated instruction and its machine-readable goal spec.

    When several instances share the chosen label, an ordinal descriptor
    ("the second chair from the left") disambiguates and the spec's
    instance index is set.
    """
    names = dict(DEFAULT_LABEL_NAMES if label_names is None else label_names)
    rng = np.random.default_rng(rng_seed)
    targetable = [i for i in smap.instances if i.label in mapping.targetable_labels]
    if not targetable:
        raise TargetNotFoundError("map has no targetable instance")

    inst = targetable[int(rng.integers(len(targetable)))]
    same = [i for i in smap.instances if i.label == inst.label]
    verb = VERBS[int(rng.integers(len(VERBS)))]
    side = None
    if rng.random() < 0.5:
        side = SIDES[int(rng.integers(len(SIDES)))]

    name = names.get(inst.label, f"object{inst.label}")
    if len(same) > 1:
        anchor = ANCHORS[int(rng.integers(len(ANCHORS)))]
        order = _anchored_order(same, anchor)
        rank = order.index(same.index(inst))
        target_phrase = f"the {ORDINALS[rank]} {name} from the {anchor}"
        instance_index = same.index(inst)
    else:
        target_phrase = f"the {name}"
        instance_index = None

    if side is not None:
        text = f"{verb} the {side} side of {target_phrase}"
    else:
        text = f"{verb} {target_phrase}"
    return Instruction(text=text, spec=GoalSpec(target_label=inst.label,
                                               instance_index=instance_index, side=side))


_INSTRUCTION_RE = re.compile(
    r"^(?P<verb>.+?) "
    r"(?:the (?P<side>left|right|top|bottom) side of )?"
    r"the (?:(?P<ordinal>\w+) )?(?P<name>\w+?)"
    r"(?: from the (?P<anchor>left|top))?$"
)


def parse_instruction(text: str, smap: SemanticMap, mapping: LabelMapping,
                      label_names=None) -> GoalSpec:
    """Recover the goal spec from templated instruction text."""
    names = dict(DEFAULT_LABEL_NAMES if label_names is None else label_names)
    by_name = {v: k for k, v in names.items()}
    m = _INSTRUCTION_RE.match(text.strip())
    if not m or m.group("verb") not in VERBS:
        raise ValueError(f"instruction does not match the template grammar: {text!r}")
    name = m.group("name")
    if name not in by_name:
        raise ValueError(f"unknown target name {name!r}")
    label = by_name[name]

    instance_index = None
    if m.group("ordinal"):
        if m.group("ordinal") not in ORDINALS or not m.group("anchor"):
            raise ValueError(f"malformed ordinal descriptor in {text!r}")
        rank = ORDINALS.index(m.group("ordinal"))
        same = [i for i in smap.instances if i.label == label]
        order = _anchored_order(same, m.group("anchor"))
        if rank >= len(order):
            raise ValueError(f"ordinal {m.group('ordinal')!r} exceeds the {len(order)} instances of {name!r}")
        instance_index = order[rank]
    return GoalSpec(target_label=label, instance_index=instance_index, side=m.group("side"))


def _anchored_order(instances, anchor):
    """Indices into ``instances`` sorted by center x (anchor 'left') or
    center y (anchor 'top'), with deterministic tie-breaking."""
    def key(i):
        cx, cy = instances[i].center
        return (cx, cy, i) if anchor == "left" else (cy, cx, i)
    return sorted(range(len(instances)), key=key)
