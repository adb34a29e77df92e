"""Decile-stratified survey construction and response validation.

The instrument design draws a fixed number of occupations from every index
decile, spreads them over as many forms (one occupation per decile per form),
and attaches two quality-control rows: an attention check whose only correct
answer is 4, and a deliberately non-age-friendly occupation (professional
athlete) that must score at most 4. Participants failing either control are
dropped entirely before aggregation.

Scores run 1..10 (10 = most age friendly) and participants may answer
"do not know"; those answers are excluded from means, and on a control row
they count as a failure.
"""

from __future__ import annotations

import csv
import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .analytics import QuantileScheme, assign, make_quantiles
from .econ import DeviationStats, deviation_stats, midranks, spearman
from .errors import ValidationError
from .index import AfiTable

ATTENTION_CONTROL_ID = "ctrl_attention"
ATHLETE_CONTROL_ID = "ctrl_athlete"
ATTENTION_CONTROL_TEXT = "Quality check: please answer four on this row."
ATHLETE_CONTROL_TEXT = "Professional athlete (e.g. NFL, NBA, or NHL player)"
ATTENTION_REQUIRED_SCORE = 4
ATHLETE_MAX_SCORE = 4


@dataclass(frozen=True)
class SurveyInstrument:
    survey_id: str
    items: tuple[str, ...]
    control_items: tuple[str, str] = (ATTENTION_CONTROL_ID, ATHLETE_CONTROL_ID)
    order_seed: int = 0

    def presentation_order(self, participant_index: int) -> list[str]:
        """Deterministic per-participant shuffle of item and control rows."""
        rows = list(self.items) + list(self.control_items)
        rng = random.Random(self.order_seed * 1_000_003 + participant_index)
        rng.shuffle(rows)
        return rows


@dataclass(frozen=True)
class SurveyDesign:
    instruments: tuple[SurveyInstrument, ...]
    selected: dict[str, int]
    scheme: QuantileScheme
    seed: int

    def items(self) -> tuple[str, ...]:
        return tuple(sorted(self.selected))


def design_survey(
    afi: AfiTable,
    per_decile: int = 3,
    seed: int = 0,
    k: int = 10,
) -> SurveyDesign:
    """Draw ``per_decile`` occupations from each of ``k`` index deciles.

    Produces ``per_decile`` forms; form f carries the f-th draw from every
    decile, so each form covers all deciles and the forms jointly cover the
    whole selection. Sampling and row-order seeds derive from ``seed`` only.
    """
    if per_decile < 1:
        raise ValidationError("per_decile must be >= 1")
    scheme = make_quantiles(afi, k)
    buckets: dict[int, list[str]] = {b: [] for b in range(1, k + 1)}
    for occ in sorted(afi.values):
        buckets[assign(scheme, afi.values[occ])].append(occ)
    for b in range(1, k + 1):
        if len(buckets[b]) < per_decile:
            raise ValidationError(
                f"decile {b} holds only {len(buckets[b])} occupations, "
                f"need at least {per_decile}"
            )
    rng = random.Random(seed)
    draws: dict[int, list[str]] = {
        b: rng.sample(buckets[b], per_decile) for b in range(1, k + 1)
    }
    selected = {occ: b for b in draws for occ in draws[b]}
    instruments = []
    for f in range(per_decile):
        instruments.append(SurveyInstrument(
            survey_id=f"form-{f + 1:02d}",
            items=tuple(draws[b][f] for b in range(1, k + 1)),
            order_seed=rng.randrange(2 ** 32),
        ))
    return SurveyDesign(
        instruments=tuple(instruments), selected=selected, scheme=scheme, seed=seed,
    )


def write_instrument(instrument: SurveyInstrument, path: str | Path) -> None:
    payload = {
        "survey_id": instrument.survey_id,
        "items": list(instrument.items),
        "control_items": [
            {"id": ATTENTION_CONTROL_ID, "text": ATTENTION_CONTROL_TEXT},
            {"id": ATHLETE_CONTROL_ID, "text": ATHLETE_CONTROL_TEXT},
        ],
        "order_seed": instrument.order_seed,
        "scale": {"min": 1, "max": 10, "do_not_know": "DK"},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------------------
# responses
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ResponseRow:
    participant: str
    item: str
    score: int | None  # None = "do not know"


@dataclass(frozen=True)
class ResponseSet:
    rows: tuple[ResponseRow, ...]

    def __post_init__(self):
        for row in self.rows:
            if row.score is not None and not 1 <= row.score <= 10:
                raise ValidationError(
                    f"score {row.score} of participant {row.participant!r} on "
                    f"{row.item!r} outside 1..10"
                )

    def __len__(self) -> int:
        return len(self.rows)

    def participants(self) -> tuple[str, ...]:
        return tuple(sorted({r.participant for r in self.rows}))

    def items(self) -> tuple[str, ...]:
        return tuple(sorted({r.item for r in self.rows}))


def load_responses(path: str | Path) -> ResponseSet:
    """Read the response CSV; the score column is 1..10 or the string DK."""
    path = Path(path)
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["participant_id", "item_id", "score"]:
            raise ValidationError(f"{path}: expected header participant_id,item_id,score")
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 3:
                raise ValidationError(f"{path}:{lineno}: malformed row {row!r}")
            participant, item, score_s = row[0].strip(), row[1].strip(), row[2].strip()
            if score_s.upper() == "DK":
                score = None
            else:
                try:
                    score = int(score_s)
                except ValueError:
                    raise ValidationError(
                        f"{path}:{lineno}: score {score_s!r} is neither 1..10 nor DK"
                    ) from None
            rows.append(ResponseRow(participant=participant, item=item, score=score))
    try:
        return ResponseSet(rows=tuple(rows))
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from None


def write_responses(responses: ResponseSet, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["participant_id", "item_id", "score"])
        for row in responses.rows:
            writer.writerow([row.participant, row.item,
                             "DK" if row.score is None else row.score])


@dataclass(frozen=True)
class FilterReport:
    responses: ResponseSet
    kept_participants: tuple[str, ...]
    discarded_attention: tuple[str, ...]
    discarded_athlete: tuple[str, ...]

    @property
    def n_discarded(self) -> int:
        return len(set(self.discarded_attention) | set(self.discarded_athlete))


def filter_responses(
    responses: ResponseSet,
    attention_id: str = ATTENTION_CONTROL_ID,
    athlete_id: str = ATHLETE_CONTROL_ID,
    known_items: Iterable[str] | None = None,
) -> FilterReport:
    """Drop every participant who fails either quality control.

    Failure means: attention control answered with anything but 4, athlete
    control scored above 4, a "do not know" on either control, or a missing
    control row. The operation is idempotent; control rows of surviving
    participants stay in the output.
    """
    if known_items is not None:
        universe = set(known_items) | {attention_id, athlete_id}
        unknown = sorted({r.item for r in responses.rows} - universe)
        if unknown:
            raise ValidationError(
                "responses reference unknown item(s): " + ", ".join(repr(u) for u in unknown)
            )
    by_participant: dict[str, list[ResponseRow]] = {}
    for row in responses.rows:
        by_participant.setdefault(row.participant, []).append(row)

    failed_attention = []
    failed_athlete = []
    kept = []
    for participant in sorted(by_participant):
        rows = by_participant[participant]
        attention = [r.score for r in rows if r.item == attention_id]
        athlete = [r.score for r in rows if r.item == athlete_id]
        ok_attention = bool(attention) and all(
            s == ATTENTION_REQUIRED_SCORE for s in attention
        )
        ok_athlete = bool(athlete) and all(
            s is not None and s <= ATHLETE_MAX_SCORE for s in athlete
        )
        if not ok_attention:
            failed_attention.append(participant)
        if not ok_athlete:
            failed_athlete.append(participant)
        if ok_attention and ok_athlete:
            kept.append(participant)

    kept_set = set(kept)
    filtered = tuple(r for r in responses.rows if r.participant in kept_set)
    return FilterReport(
        responses=ResponseSet(rows=filtered),
        kept_participants=tuple(kept),
        discarded_attention=tuple(failed_attention),
        discarded_athlete=tuple(failed_athlete),
    )


# ---------------------------------------------------------------------------
# aggregation and validation against the index
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ValidationReport:
    statistic: str
    mean_scores: dict[str, float]
    survey_ranks: dict[str, float]
    afi_ranks: dict[str, float]
    rho: float
    pvalue: float
    occupation_deviation: DeviationStats
    rho_response: float | None
    pvalue_response: float | None
    response_deviation: DeviationStats | None
    n_participants: int
    n_responses: int
    ratings_per_item: float


def _ranks_descending(values: Mapping[str, float]) -> dict[str, float]:
    """Midranks with rank 1 for the highest value."""
    items = sorted(values)
    scores = [-values[i] for i in items]
    ranks = midranks(scores)
    return {item: float(r) for item, r in zip(items, ranks)}


def aggregate_and_validate(
    filtered: ResponseSet,
    afi: AfiTable,
    design: SurveyDesign | None = None,
    statistic: str = "mean",
    control_ids: Sequence[str] = (ATTENTION_CONTROL_ID, ATHLETE_CONTROL_ID),
) -> ValidationReport:
    """Aggregate responses per occupation and compare against the index.

    The per-occupation statistic (mean by default, median behind the flag)
    turns into a midrank ranking which is tested against the index ranking
    of the same occupations (rank correlation plus absolute-deviation
    summary). With a ``design`` at hand the same comparison is repeated at
    the response level: each raw score against its item's index decile.
    """
    if statistic not in ("mean", "median"):
        raise ValidationError(f"unknown statistic {statistic!r}")
    control_set = set(control_ids)
    scored: dict[str, list[int]] = {}
    participants = set()
    n_responses = 0
    for row in filtered.rows:
        if row.item in control_set:
            continue
        participants.add(row.participant)
        n_responses += 1
        if row.score is not None:
            scored.setdefault(row.item, []).append(row.score)
    if not participants:
        raise ValidationError("no participants left after filtering")
    items = sorted({r.item for r in filtered.rows if r.item not in control_set})
    missing_afi = [i for i in items if i not in afi.values]
    if missing_afi:
        raise ValidationError(
            "surveyed occupation(s) missing from the index table: "
            + ", ".join(repr(m) for m in missing_afi)
        )
    unscored = [i for i in items if not scored.get(i)]
    if unscored:
        raise ValidationError(
            "occupation(s) with zero usable scores: " + ", ".join(repr(u) for u in unscored)
        )

    if statistic == "mean":
        agg = {i: sum(scored[i]) / len(scored[i]) for i in items}
    else:
        agg = {}
        for i in items:
            ordered = sorted(scored[i])
            m = len(ordered)
            agg[i] = (ordered[(m - 1) // 2] + ordered[m // 2]) / 2.0

    survey_ranks = _ranks_descending(agg)
    afi_ranks = _ranks_descending({i: afi.values[i] for i in items})
    rank_test = spearman([survey_ranks[i] for i in items], [afi_ranks[i] for i in items])
    # ranks run opposite to scores, so rho of ranks equals rho of raw values
    occ_dev = deviation_stats(survey_ranks, afi_ranks)

    rho_response = pvalue_response = None
    response_dev = None
    if design is not None:
        unknown = [i for i in items if i not in design.selected]
        if unknown:
            raise ValidationError(
                "responses cover occupation(s) outside the survey design: "
                + ", ".join(repr(u) for u in unknown)
            )
        pair_scores = []
        pair_deciles = []
        dev_a: dict[str, float] = {}
        dev_b: dict[str, float] = {}
        idx = 0
        for row in filtered.rows:
            if row.item in control_set or row.score is None:
                continue
            decile = design.selected[row.item]
            pair_scores.append(float(row.score))
            pair_deciles.append(float(decile))
            dev_a[f"r{idx}"] = float(row.score)
            dev_b[f"r{idx}"] = float(decile)
            idx += 1
        response_test = spearman(pair_scores, pair_deciles)
        rho_response = response_test.rho
        pvalue_response = response_test.pvalue
        response_dev = deviation_stats(dev_a, dev_b)

    return ValidationReport(
        statistic=statistic,
        mean_scores=agg,
        survey_ranks=survey_ranks,
        afi_ranks=afi_ranks,
        rho=rank_test.rho,
        pvalue=rank_test.pvalue,
        occupation_deviation=occ_dev,
        rho_response=rho_response,
        pvalue_response=pvalue_response,
        response_deviation=response_dev,
        n_participants=len(participants),
        n_responses=n_responses,
        ratings_per_item=n_responses / len(items),
    )
