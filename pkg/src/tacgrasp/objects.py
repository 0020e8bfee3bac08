"""Synthetic object set for grasp simulation.

Objects are built deterministically from four primitive families (sphere,
box, cylinder, edge) with size tiers, each defining the contact primitive
pressed into each of the three fingertips plus the overhead footprint the
depth camera sees.  The thumb contact is quantized to tier *pairs*: two
adjacent tiers of the same family press the same shape into the thumb and
only differ on the other two fingers.  That gives the sensor-subset
experiments something real to measure -- a thumb-only network cannot
separate such a pair, while two- and three-sensor networks can.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import InvalidInputError
from .sensor import ContactPrimitive

FAMILIES = ("sphere", "box", "cylinder", "edge")


@dataclass(frozen=True)
class SimObject:
    """One graspable object: per-finger contact geometry plus tray presence."""

    class_id: int
    name: str
    finger_contacts: tuple  # 3 ContactPrimitive templates (indentation 0)
    graspability: float  # (0, 1], scales grasp success probability
    aspect_ratio: float  # overhead major/minor extent, >= 1
    footprint: tuple  # (minor_mm, major_mm) overhead extent
    height: float  # mm proud of the tray

    def __post_init__(self):
        if not 0.0 < self.graspability <= 1.0:
            raise InvalidInputError("graspability must be in (0, 1]")
        if self.aspect_ratio < 1.0:
            raise InvalidInputError("aspect_ratio must be >= 1")
        if len(self.finger_contacts) != 3:
            raise InvalidInputError("an object needs exactly 3 finger contacts")


def _family_dims(family: str, tier: int) -> tuple:
    if family == "sphere":
        return (5.0 + 1.5 * tier,)
    if family == "box":
        return (8.0 + 2.0 * tier, 14.0 + 3.0 * tier)
    if family == "cylinder":
        return (4.0 + 1.2 * tier, 26.0 + 4.0 * tier)
    return (14.0 + 4.0 * tier,)  # edge ridge length


def _primitive(family: str, tier: int, pose) -> ContactPrimitive:
    return ContactPrimitive(family, _family_dims(family, tier), pose)


def build_object(class_id: int) -> SimObject:
    family = FAMILIES[class_id % 4]
    tier = class_id // 4
    thumb_tier = (tier // 2) * 2  # tier pairs share the thumb contact
    thumb = _primitive(family, thumb_tier, (0.0, 0.0, 0.0))
    finger2 = _primitive(family, tier, (3.0 + 0.8 * tier, -1.5, 0.45))
    finger3 = _primitive(family, tier, (-3.0 - 0.8 * tier, 1.5, -0.3))

    if family == "sphere":
        r = _family_dims(family, tier)[0]
        footprint = (2.0 * r + 14.0, 2.0 * r + 14.0)
    elif family == "box":
        w, length = _family_dims(family, tier)
        footprint = (w + 16.0, 2.2 * length)
    elif family == "cylinder":
        r, length = _family_dims(family, tier)
        footprint = (2.0 * r + 10.0, 3.6 * length)
    else:
        length = _family_dims(family, tier)[0]
        footprint = (8.0, 5.0 * length + 30.0)
    minor, major = min(footprint), max(footprint)
    aspect = major / minor

    return SimObject(
        class_id=class_id,
        name=f"{family}_{tier:02d}",
        finger_contacts=(thumb, finger2, finger3),
        graspability=0.97 - 0.015 * (class_id % 7),
        aspect_ratio=aspect,
        footprint=(minor, major),
        height=20.0 + 4.0 * tier,
    )


def build_object_set(n_classes: int) -> list:
    """The first ``n_classes`` objects of the deterministic catalogue."""
    if n_classes < 1:
        raise InvalidInputError("need at least one object class")
    return [build_object(i) for i in range(n_classes)]


def novel_object(class_id: int = 1000) -> SimObject:
    """An object outside the training catalogue (for held-out sweeps)."""
    contact = ContactPrimitive("sphere", (7.3,), (0.0, 0.0, 0.0))
    return SimObject(
        class_id=class_id,
        name="sphere_novel",
        finger_contacts=(
            contact,
            ContactPrimitive("sphere", (7.3,), (2.4, -1.1, 0.2)),
            ContactPrimitive("sphere", (7.3,), (-2.4, 1.1, -0.2)),
        ),
        graspability=0.95,
        aspect_ratio=1.0,
        footprint=(28.6, 28.6),
        height=26.0,
    )
