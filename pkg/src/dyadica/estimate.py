from __future__ import annotations

from dataclasses import dataclass, asdict
from typing import Any

KINDS = ("exact-sup", "lower-bound")


@dataclass(frozen=True)
class ConstantEstimate:
    """A computed characteristic with its provenance.

    kind is "exact-sup" when the value is an exact supremum over the stated
    finite family and "lower-bound" when it came from a search.
    """

    name: str
    value: float
    kind: str
    witness: str = ""
    family: str = ""
    seed: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")

    def row(self) -> dict[str, Any]:
        d = asdict(self)
        return {k: d[k] for k in ("name", "value", "kind", "family", "witness", "seed")}
