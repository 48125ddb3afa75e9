"""Sentence and scored-pair records shared by ingestion, training and evaluation."""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field, field_validator


class Sentence(BaseModel):
    """One sentence of a corpus, batch or evaluation pair."""

    model_config = ConfigDict(frozen=True)

    text: str
    id: int = Field(default=0, ge=0)

    @field_validator("text")
    @classmethod
    def _not_blank(cls, value: str) -> str:
        if not value.strip():
            raise ValueError("sentence text must not be blank")
        return value


class ScoredPair(BaseModel):
    """A sentence pair with a human (or synthetic) similarity judgement.

    ``gold`` keeps the dataset's native scale; ``gold_normalized`` is the
    same score divided by the scale maximum.
    """

    model_config = ConfigDict(frozen=True)

    s1: Sentence
    s2: Sentence
    gold: float
    gold_normalized: float = Field(ge=0.0, le=1.0)
    predicted: float | None = None

    @classmethod
    def from_raw(cls, s1: str, s2: str, gold: float, scale: float, pair_id: int = 0) -> ScoredPair:
        return cls(
            s1=Sentence(text=s1, id=2 * pair_id),
            s2=Sentence(text=s2, id=2 * pair_id + 1),
            gold=gold,
            gold_normalized=gold / scale,
        )

    def with_prediction(self, predicted: float) -> ScoredPair:
        return self.model_copy(update={"predicted": predicted})
