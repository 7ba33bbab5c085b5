import logging
from pathlib import Path

import pandas as pd

from population.items import (
    ROSTER_COLUMNS,
    SURVEY_COLUMNS,
    Roster,
    Student,
    SurveyRecord,
    SurveySample,
)

logger = logging.getLogger(__name__)


class RosterValidationError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(message)
        self.line = line


class SurveyError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(message)
        self.line = line


def _read_table(path: Path, columns: list[str], error_cls: type[ValueError], label: str) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"{label} file not found: {path}")
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError as err:
        raise error_cls(f"empty {label}") from err

    missing = [c for c in columns if c not in df.columns]
    if missing:
        raise error_cls(f"{label} file {path} is missing columns: {', '.join(missing)}", line=1)
    if df.empty:
        raise error_cls(f"empty {label}")
    return df


def load_roster(path: Path) -> Roster:
    """Load a roster CSV (`id,grade,sex,race,school`).

    Students keep file order and are re-numbered 0..n-1; friendship edge
    lists refer to these dense ids.
    """
    df = _read_table(path, ROSTER_COLUMNS, RosterValidationError, "roster")

    students = []
    seen_ids: set[str] = set()
    for idx, row in enumerate(df[ROSTER_COLUMNS].itertuples(index=False)):
        # Header is line 1
        line = idx + 2
        if row.id in seen_ids:
            raise RosterValidationError(f"line {line}: duplicate student id {row.id}", line=line)
        seen_ids.add(row.id)
        try:
            students.append(
                Student(
                    id=idx,
                    grade=int(row.grade),
                    sex=row.sex.strip().lower(),
                    race=row.race,
                    school=(row.school.strip().lower() or "main"),
                )
            )
        except (ValueError, TypeError) as err:
            raise RosterValidationError(f"line {line}: {err}", line=line) from err

    if len(students) < 2:
        raise RosterValidationError(f"roster needs at least 2 students, got {len(students)}")

    logger.info(f"Loaded roster of {len(students)} students from {path}")
    return Roster(students=students)


def load_survey(path: Path) -> SurveySample:
    """Load a contact survey CSV (`break_contacts,lunch_contacts,n_close_friends,pct_to_friends,neighbor_mix`)."""
    df = _read_table(path, SURVEY_COLUMNS, SurveyError, "survey")

    records = []
    for idx, row in enumerate(df[SURVEY_COLUMNS].itertuples(index=False)):
        line = idx + 2
        try:
            records.append(
                SurveyRecord(
                    break_contacts=int(row.break_contacts),
                    lunch_contacts=int(row.lunch_contacts),
                    n_close_friends=int(row.n_close_friends),
                    pct_to_friends=float(row.pct_to_friends),
                    neighbor_mix=(row.neighbor_mix.strip().lower() or "mix"),
                )
            )
        except (ValueError, TypeError) as err:
            raise SurveyError(f"line {line}: {err}", line=line) from err

    logger.info(f"Loaded {len(records)} survey records from {path}")
    return SurveySample(records=records)


def save_roster(roster: Roster, path: Path) -> None:
    roster.to_frame().to_csv(path, index=False)
    logger.info(f"Saved roster of {roster.n} students to {path}")


def save_survey(survey: SurveySample, path: Path) -> None:
    survey.to_frame().to_csv(path, index=False)
    logger.info(f"Saved {survey.n} survey records to {path}")
