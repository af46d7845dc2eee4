from dataclasses import dataclass
from typing import Dict, List, Sequence

from engine.errors import ScenePickError


@dataclass(frozen=True)
class Violation:
    """One broken rule, located by a JSON path such as `$.scenes[1].end`."""
    path: str
    message: str
    code: str = "invalid"

    def to_json(self) -> Dict:
        return {"path": self.path, "message": self.message, "code": self.code}

    def __str__(self) -> str:
        return f"{self.path}: {self.message}"


class AnnotationValidationError(ScenePickError, ValueError):
    """Carries every violation found; the first one is the headline."""

    def __init__(self, violations: Sequence[Violation]):
        self.violations: List[Violation] = list(violations)
        if not self.violations:
            raise ValueError("AnnotationValidationError needs at least one violation")
        extra = len(self.violations) - 1
        suffix = f" (+{extra} more)" if extra else ""
        super().__init__(f"{self.violations[0]}{suffix}")

    @property
    def first(self) -> Violation:
        return self.violations[0]


class NoJsonPayloadError(ScenePickError, ValueError):
    pass
