"""Microcantilever specimen catalog: geometry, material, aspect ratios.

The built-in catalog holds the ST1 family of in-plane bending
polysilicon microcantilevers, each in a nominal (as-designed) and a
measured (profilometer) variant.  Orientation convention: the beam bends
in the wafer plane, so ``thickness_t`` is the bending-direction dimension
and ``width_w`` is the out-of-plane electrode depth.  The bending second
moment of area is therefore I = w * t**3 / 12.

All stored values are SI; file I/O converts from the micrometre/GPa
field names of the specimen file format.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

from .errors import SpecimenFormatError

NOMINAL = "nominal"
MEASURED = "measured"
_DIMENSION_SOURCES = (NOMINAL, MEASURED)

# Behaviour-classification thresholds on the aspect ratios.  Chosen as the
# simple round values that separate the catalog into its three behaviour
# groups for both the nominal and the measured dimension sets.
PLATE_RATIO_THRESHOLD = 0.10          # r1 = w/l at or above: beam theory suspect
LARGE_DISPLACEMENT_THRESHOLD = 0.15   # r2 = g/l at or above: expect large deflection
HIGH_COMPLIANCE_THRESHOLD = 0.005     # r3 = t/l at or below: very compliant beam


@dataclass(frozen=True)
class Material:
    """Isotropic elastic material.

    ``label`` is descriptive metadata; two materials with the same elastic
    constants compare equal regardless of it (the specimen file format does
    not carry labels).
    """

    young_modulus: float  # Pa
    poisson_ratio: float
    label: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        if not self.young_modulus > 0.0:
            raise ValueError(f"young_modulus must be > 0 (got {self.young_modulus})")
        if not 0.0 <= self.poisson_ratio < 0.5:
            raise ValueError(f"poisson_ratio must be in [0, 0.5) (got {self.poisson_ratio})")


@dataclass(frozen=True)
class Specimen:
    """One cantilever/counter-electrode pair.

    Lengths are metres: ``length_l`` along the beam, ``width_w`` out of
    plane, ``thickness_t`` in the bending direction, ``gap_g`` the
    undeformed electrode separation.  ``tolerances`` carries optional
    measurement ranges (metres, keyed by field name) as metadata only;
    solvers consume the central values.
    """

    id: str
    length_l: float
    width_w: float
    thickness_t: float
    gap_g: float
    material: Material
    dimension_source: str
    tolerances: Mapping[str, float] | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        for name in ("length_l", "width_w", "thickness_t", "gap_g"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be strictly positive (got {getattr(self, name)})")
        if not self.thickness_t < self.length_l:
            raise ValueError(
                f"thickness_t must be smaller than length_l for a cantilever "
                f"(t={self.thickness_t}, l={self.length_l})"
            )
        if not self.gap_g < self.length_l:
            raise ValueError(
                f"gap_g must be smaller than length_l for a cantilever "
                f"(g={self.gap_g}, l={self.length_l})"
            )
        if self.dimension_source not in _DIMENSION_SOURCES:
            raise ValueError(
                f"dimension_source must be one of {_DIMENSION_SOURCES} "
                f"(got {self.dimension_source!r})"
            )

    @property
    def bending_inertia(self) -> float:
        """Second moment of area for in-plane bending, I = w t^3 / 12 (m^4)."""
        return self.width_w * self.thickness_t**3 / 12.0

    @property
    def section_area(self) -> float:
        """Cross-section area w * t (m^2)."""
        return self.width_w * self.thickness_t

    def with_young_modulus(self, young_modulus: float) -> "Specimen":
        """Copy of this specimen with a different Young's modulus."""
        return replace(self, material=replace(self.material, young_modulus=young_modulus))


@dataclass(frozen=True)
class AspectRatios:
    """Dimensionless geometry quotients r1 = w/l, r2 = g/l, r3 = t/l, r4 = t/w."""

    r1: float
    r2: float
    r3: float
    r4: float


@dataclass(frozen=True)
class BehaviourFlags:
    """Modelling-regime warnings derived from the aspect ratios."""

    plate_model_warning: bool
    large_displacement_warning: bool
    high_compliance: bool


_POLYSILICON = Material(young_modulus=166e9, poisson_ratio=0.23, label="epitaxial polysilicon")

# (id, l, w, t, g) in micrometres, as designed.
_NOMINAL_UM = (
    ("ST1-1", 100.0, 15.0, 2.0, 5.0),
    ("ST1-2", 100.0, 15.0, 2.0, 10.0),
    ("ST1-3", 100.0, 15.0, 2.0, 20.0),
    ("ST1-4", 200.0, 15.0, 2.0, 10.0),
    ("ST1-5", 200.0, 15.0, 2.0, 20.0),
    ("ST1-6", 800.0, 15.0, 2.0, 40.0),
    ("ST1-7", 800.0, 15.0, 2.0, 200.0),
    ("ST1-8", 800.0, 15.0, 2.0, 400.0),
)

# (id, l, tol_l, t, tol_t, g, tol_g) in micrometres, profilometer values.
# Width was process-imposed at 15 um and carries no tolerance of its own.
_MEASURED_UM = (
    ("ST1-1", 101.0, 0.1, 1.8, 0.02, 5.0, 0.3),
    ("ST1-2", 101.0, 0.1, 1.8, 0.02, 10.0, 0.3),
    ("ST1-3", 101.0, 0.1, 1.8, 0.02, 20.1, 0.3),
    ("ST1-4", 205.0, 0.2, 1.9, 0.02, 10.0, 0.3),
    ("ST1-5", 205.0, 0.2, 1.9, 0.02, 20.0, 0.3),
    ("ST1-6", 805.0, 0.5, 2.7, 0.04, 39.6, 0.3),
    ("ST1-7", 805.0, 0.5, 2.7, 0.04, 200.0, 0.5),
    ("ST1-8", 805.0, 0.5, 2.7, 0.04, 400.0, 0.5),
)

_UM = 1e-6


def builtin_catalog() -> list[Specimen]:
    """The 16 built-in specimens: 8 nominal layouts plus their measured variants."""
    specimens: list[Specimen] = []
    for sid, l, w, t, g in _NOMINAL_UM:
        specimens.append(
            Specimen(
                id=sid,
                length_l=l * _UM,
                width_w=w * _UM,
                thickness_t=t * _UM,
                gap_g=g * _UM,
                material=_POLYSILICON,
                dimension_source=NOMINAL,
            )
        )
    for sid, l, tol_l, t, tol_t, g, tol_g in _MEASURED_UM:
        specimens.append(
            Specimen(
                id=sid,
                length_l=l * _UM,
                width_w=15.0 * _UM,
                thickness_t=t * _UM,
                gap_g=g * _UM,
                material=_POLYSILICON,
                dimension_source=MEASURED,
                tolerances={
                    "length_l": tol_l * _UM,
                    "thickness_t": tol_t * _UM,
                    "gap_g": tol_g * _UM,
                },
            )
        )
    return specimens


def aspect_ratios(spec: Specimen) -> AspectRatios:
    """The four geometry quotients of a specimen."""
    return AspectRatios(
        r1=spec.width_w / spec.length_l,
        r2=spec.gap_g / spec.length_l,
        r3=spec.thickness_t / spec.length_l,
        r4=spec.thickness_t / spec.width_w,
    )


def classify(ratios: AspectRatios) -> BehaviourFlags:
    """Map aspect ratios to modelling-regime warnings.

    Pure function: identical ratios always produce identical flags.
    """
    return BehaviourFlags(
        plate_model_warning=ratios.r1 >= PLATE_RATIO_THRESHOLD,
        large_displacement_warning=ratios.r2 >= LARGE_DISPLACEMENT_THRESHOLD,
        high_compliance=ratios.r3 <= HIGH_COMPLIANCE_THRESHOLD,
    )


def select_specimen(
    specimens: Iterable[Specimen], specimen_id: str, dimension_source: str
) -> Specimen:
    """The unique specimen with the given id and dimension source.

    Raises KeyError when no (or no unique) match exists.
    """
    matches = [
        s for s in specimens if s.id == specimen_id and s.dimension_source == dimension_source
    ]
    if not matches:
        raise KeyError(f"no specimen {specimen_id!r} with {dimension_source} dimensions")
    if len(matches) > 1:
        raise KeyError(f"specimen selector {specimen_id!r}/{dimension_source} is ambiguous")
    return matches[0]


_FILE_FIELDS = (
    "id",
    "length_um",
    "width_um",
    "thickness_um",
    "gap_um",
    "young_modulus_gpa",
    "poisson_ratio",
    "dimension_source",
)

# file field -> Specimen field, for diagnostics
_FIELD_MAP = {
    "length_um": "length_l",
    "width_um": "width_w",
    "thickness_um": "thickness_t",
    "gap_um": "gap_g",
}


def load_specimens(path: str) -> list[Specimen]:
    """Parse a specimen file (JSON, micrometre/GPa units) into Specimen values.

    Raises SpecimenFormatError with the offending entry and field named.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SpecimenFormatError(f"{path}: not valid JSON: {exc}") from exc

    if not isinstance(doc, dict) or "specimens" not in doc:
        raise SpecimenFormatError(f"{path}: top-level object must contain a 'specimens' array")
    entries = doc["specimens"]
    if not isinstance(entries, list):
        raise SpecimenFormatError(f"{path}: 'specimens' must be an array")

    specimens: list[Specimen] = []
    for i, entry in enumerate(entries):
        where = f"{path}: specimens[{i}]"
        if not isinstance(entry, dict):
            raise SpecimenFormatError(f"{where}: entry must be an object")
        for name in _FILE_FIELDS:
            if name not in entry:
                internal = _FIELD_MAP.get(name)
                alias = f" ({internal})" if internal else ""
                raise SpecimenFormatError(f"{where}: missing field '{name}'{alias}")
        extra = set(entry) - set(_FILE_FIELDS)
        if extra:
            raise SpecimenFormatError(f"{where}: unknown field(s) {sorted(extra)}")
        try:
            material = Material(
                young_modulus=float(entry["young_modulus_gpa"]) * 1e9,
                poisson_ratio=float(entry["poisson_ratio"]),
            )
            specimens.append(
                Specimen(
                    id=str(entry["id"]),
                    length_l=float(entry["length_um"]) * _UM,
                    width_w=float(entry["width_um"]) * _UM,
                    thickness_t=float(entry["thickness_um"]) * _UM,
                    gap_g=float(entry["gap_um"]) * _UM,
                    material=material,
                    dimension_source=str(entry["dimension_source"]),
                )
            )
        except (TypeError, ValueError) as exc:
            raise SpecimenFormatError(f"{where}: {exc}") from exc
    return specimens


def save_specimens(path: str, specimens: Iterable[Specimen]) -> None:
    """Write specimens in the file format accepted by load_specimens."""
    doc = {
        "specimens": [
            {
                "id": s.id,
                "length_um": s.length_l / _UM,
                "width_um": s.width_w / _UM,
                "thickness_um": s.thickness_t / _UM,
                "gap_um": s.gap_g / _UM,
                "young_modulus_gpa": s.material.young_modulus / 1e9,
                "poisson_ratio": s.material.poisson_ratio,
                "dimension_source": s.dimension_source,
            }
            for s in specimens
        ]
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
