# Domain types for school rosters and the contact survey.

from enum import Enum
from functools import cached_property
from typing import Optional

import attr
import numpy as np
import pandas as pd
from attrs_strict import type_validator
from marshmallow import Schema, fields, post_load
from marshmallow_enum import EnumField

GRADES = (7, 8, 9, 10, 11, 12)


class Sex(str, Enum):
    male = "male"
    female = "female"


class Race(str, Enum):
    white = "white"
    black = "black"
    hispanic = "hispanic"
    asian = "asian"
    mixed = "mixed"
    missing = "missing"

    @classmethod
    def parse(cls, value: object) -> "Race":
        """Unknown or empty race strings map to ``missing``."""
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            return cls.missing


class School(str, Enum):
    main = "main"
    sister = "sister"


class NeighborMix(str, Enum):
    mostly_friends = "mostly_friends"
    mostly_nonfriends = "mostly_nonfriends"
    mix = "mix"


def strict_fields(cls, fields):
    """attrs field transformer: type-check every field after conversion, ahead of its own validator."""
    strict = []
    for field in fields:
        checks = [type_validator()] if field.validator is None else [type_validator(), field.validator]
        strict.append(field.evolve(validator=attr.validators.and_(*checks)))
    return strict


def _grade_in_range(instance, attribute, value):
    if value not in GRADES:
        raise ValueError(f"grade must be within 7..12, got {value}")


def _non_negative(instance, attribute, value):
    if value < 0:
        raise ValueError(f"{attribute.name} must be >= 0, got {value}")


def _unit_interval(instance, attribute, value):
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{attribute.name} must be within [0, 1], got {value}")


@attr.s(frozen=True, auto_attribs=True, field_transformer=strict_fields)
class Student:
    id: int = attr.ib(converter=int)
    grade: int = attr.ib(converter=int, validator=_grade_in_range)
    sex: Sex = attr.ib(converter=Sex)
    race: Race = attr.ib(converter=Race.parse)
    school: School = attr.ib(default=School.main, converter=School)


def _unique_ids(instance, attribute, students):
    ids = [student.id for student in students]
    if len(set(ids)) != len(ids):
        raise ValueError("student ids must be unique within a roster")


@attr.s(frozen=True, auto_attribs=True, field_transformer=strict_fields)
class Roster:
    students: list[Student] = attr.ib(converter=list, validator=_unique_ids)

    def __attrs_post_init__(self):
        if self.n < 2:
            raise ValueError(f"a roster needs at least 2 students, got {self.n}")

    @property
    def n(self) -> int:
        return len(self.students)

    # ------------ Vectorised attributes ------------
    @cached_property
    def grades(self) -> np.ndarray:
        return np.array([s.grade for s in self.students], dtype=np.int64)

    @cached_property
    def is_male(self) -> np.ndarray:
        return np.array([s.sex is Sex.male for s in self.students], dtype=bool)

    @cached_property
    def races(self) -> np.ndarray:
        return np.array([s.race.value for s in self.students], dtype=object)

    @cached_property
    def schools(self) -> np.ndarray:
        return np.array([s.school.value for s in self.students], dtype=object)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(RosterRowSchema(many=True).dump(self.students))

    def reindexed(self) -> "Roster":
        """Dense ids 0..n-1 in roster order."""
        return Roster(students=[attr.evolve(s, id=i) for i, s in enumerate(self.students)])


@attr.s(frozen=True, auto_attribs=True, field_transformer=strict_fields)
class SurveyRecord:
    break_contacts: int = attr.ib(converter=int, validator=_non_negative)
    lunch_contacts: int = attr.ib(converter=int, validator=_non_negative)
    n_close_friends: int = attr.ib(converter=int, validator=_non_negative)
    pct_to_friends: float = attr.ib(converter=float, validator=_unit_interval)
    neighbor_mix: NeighborMix = attr.ib(default=NeighborMix.mix, converter=NeighborMix)


@attr.s(frozen=True, auto_attribs=True, field_transformer=strict_fields)
class SurveySample:
    records: list[SurveyRecord] = attr.ib(factory=list, converter=list)

    @property
    def n(self) -> int:
        return len(self.records)

    @cached_property
    def mean_pct_to_friends(self) -> Optional[float]:
        # X is undefined on an empty sample
        if not self.records:
            return None
        return float(np.mean([r.pct_to_friends for r in self.records]))

    @cached_property
    def break_contacts(self) -> np.ndarray:
        return np.array([r.break_contacts for r in self.records], dtype=np.int64)

    @cached_property
    def lunch_contacts(self) -> np.ndarray:
        return np.array([r.lunch_contacts for r in self.records], dtype=np.int64)

    @cached_property
    def n_close_friends(self) -> np.ndarray:
        return np.array([r.n_close_friends for r in self.records], dtype=np.int64)

    def neighbor_mix_shares(self) -> dict[str, float]:
        if not self.records:
            return {}
        counts = pd.Series([r.neighbor_mix.value for r in self.records]).value_counts(normalize=True)
        return {mix.value: float(counts.get(mix.value, 0.0)) for mix in NeighborMix}

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            SurveyRecordSchema(many=True).dump(self.records), columns=SURVEY_COLUMNS
        )


ROSTER_COLUMNS = ["id", "grade", "sex", "race", "school"]
SURVEY_COLUMNS = [
    "break_contacts",
    "lunch_contacts",
    "n_close_friends",
    "pct_to_friends",
    "neighbor_mix",
]


# ------------------------------------------------ Display Schemas ------------------------------------------------


class OrderedSchema(Schema):
    """Dumps fields in declaration order, so written files keep a stable column order."""

    class Meta:
        ordered = True


class RosterRowSchema(OrderedSchema):
    id = fields.Int()
    grade = fields.Int()
    sex = EnumField(Sex, by_value=True)
    race = EnumField(Race, by_value=True)
    school = EnumField(School, by_value=True)

    @post_load
    def make_student(self, data: dict, **kwargs) -> Student:
        return Student(**data)


class SurveyRecordSchema(OrderedSchema):
    break_contacts = fields.Int()
    lunch_contacts = fields.Int()
    n_close_friends = fields.Int()
    pct_to_friends = fields.Float()
    neighbor_mix = EnumField(NeighborMix, by_value=True)

    @post_load
    def make_record(self, data: dict, **kwargs) -> SurveyRecord:
        return SurveyRecord(**data)
