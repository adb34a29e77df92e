"""Bundled synthetic project: 30 occupations, 8 descriptors, two panel years.

``write_demo_inputs`` materializes a complete, self-consistent input tree
(weight catalogs for four observed years with two 2020 releases, descriptor
texts, the nine-amenity file, an employment panel for 1990 and 2020, and a
synthetic response file whose scores track the 2020 index) plus a config.json
wired for the full pipeline. Everything derives from one seed, so repeated
generation is byte-identical.

The numbers are synthetic; the tree exists so the pipeline and its tests can
run end to end without licensed data.
"""

from __future__ import annotations

import csv
import json
import random
from importlib import resources
from pathlib import Path

from .catalog import DEFAULT_AGE_BANDS, EDUCATIONS, SEXES, load_amenities
from .embedder import BuiltinEmbedder, embed_texts
from .index import build_age_embedding, build_occupation_vectors, score_afi
from .survey import ATHLETE_CONTROL_ID, ATTENTION_CONTROL_ID, design_survey
from . import catalog as catalog_mod
from . import timeseries

DEMO_SEED = 20240501
DEMO_DIM = 16
OBSERVED_YEARS = (2002, 2012, 2020, 2022)
PANEL_YEARS = (1990, 2020)
INDUSTRIES = ("construction", "finance", "health", "retail")

DESCRIPTOR_TEXTS = {
    "d01": "Lift, carry, and position heavy building materials on outdoor work sites in all weather.",
    "d02": "Operate powered machinery and hand tools while standing for long stretches of the shift.",
    "d03": "Plan daily schedules, set priorities independently, and adjust start and finish times as needed.",
    "d04": "Prepare written reports, proofread documents, and keep accurate records at a desk.",
    "d05": "Advise clients in person or by phone, listen to concerns, and resolve interpersonal issues.",
    "d06": "Coordinate with a small team, share responsibility for outcomes, and mentor newer colleagues.",
    "d07": "Meet strict hourly production quotas under close supervision at a fixed station pace.",
    "d08": "Work from home or a remote office using email, video calls, and shared online documents.",
}


def _occupations() -> list[str]:
    return [f"occ{i:02d}" for i in range(1, 31)]


def _weight(rng_base: float, trend: float, year: int) -> float:
    return min(max(rng_base + trend * (year - 2012) / 10.0, 0.02), 0.98)


def _weight_params(seed: int) -> dict[tuple[str, str], tuple[float, float]]:
    rng = random.Random(seed)
    params = {}
    for occ in _occupations():
        for desc in sorted(DESCRIPTOR_TEXTS):
            base = rng.uniform(0.05, 0.95)
            trend = rng.uniform(-0.12, 0.12)
            params[(occ, desc)] = (base, trend)
    return params


def _write_weights(path: Path, params, year: int, jitter: float = 0.0,
                   jitter_seed: int = 0) -> None:
    rng = random.Random(jitter_seed)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["occupation_id", "descriptor_id", "weight"])
        for occ in _occupations():
            for desc in sorted(DESCRIPTOR_TEXTS):
                base, trend = params[(occ, desc)]
                w = _weight(base, trend, year)
                if jitter:
                    w = min(max(w + rng.uniform(-jitter, jitter), 0.01), 0.99)
                writer.writerow([occ, desc, f"{w:.6f}"])


def _write_texts(path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["descriptor_id", "text"])
        for desc in sorted(DESCRIPTOR_TEXTS):
            writer.writerow([desc, DESCRIPTOR_TEXTS[desc]])


def _write_panel(path: Path, seed: int) -> None:
    rng = random.Random(seed)
    occupations = _occupations()
    scale = {occ: rng.uniform(40.0, 400.0) for occ in occupations}
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["year", "occupation_id", "age_band", "sex", "education",
                         "industry", "count", "wage"])
        for year in PANEL_YEARS:
            growth = 1.0 if year == 1990 else rng.uniform(1.1, 1.6)
            for occ in occupations:
                for age in DEFAULT_AGE_BANDS:
                    for sex in SEXES:
                        for edu in EDUCATIONS:
                            for industry in INDUSTRIES:
                                tilt = 1.0
                                if year == 2020:
                                    # later year leans older, more female, more college
                                    if age in ("50-64", "65-74"):
                                        tilt *= 1.5
                                    if sex == "female":
                                        tilt *= 1.2
                                    if edu == "college":
                                        tilt *= 1.4
                                count = round(
                                    scale[occ] * growth * tilt * rng.uniform(0.2, 1.0), 1
                                )
                                if rng.random() < 0.05:
                                    wage = ""
                                else:
                                    wage = f"{rng.uniform(9.0, 60.0):.2f}"
                                writer.writerow([year, occ, age, sex, edu, industry,
                                                 count, wage])


def _compute_afi_2020(demo_dir: Path, dim: int) -> "catalog_mod.DescriptorCatalog":
    releases = [
        catalog_mod.load_catalog(demo_dir / "weights_2020_r1.csv",
                                 demo_dir / "texts.csv", 2020),
        catalog_mod.load_catalog(demo_dir / "weights_2020_r2.csv",
                                 demo_dir / "texts.csv", 2020),
    ]
    merged = timeseries.average_releases(releases)
    provider = BuiltinEmbedder(dim)
    descriptor_emb = embed_texts(merged.texts, provider)
    amenities = load_amenities(demo_dir / "amenities.json")
    amenity_emb = embed_texts(amenities.texts(), provider)
    vectors = build_occupation_vectors(merged, descriptor_emb)
    d0 = build_age_embedding(amenities, amenity_emb, "average")
    return score_afi(vectors, d0)


def _write_responses(path: Path, afi, seed: int, per_decile: int) -> None:
    design = design_survey(afi, per_decile=per_decile, seed=seed, k=10)
    rng = random.Random(seed + 1)
    rows = []
    n_participants = 21
    for p in range(1, n_participants + 1):
        participant = f"p{p:02d}"
        form = design.instruments[(p - 1) % len(design.instruments)]
        for item in form.presentation_order(p):
            if item == ATTENTION_CONTROL_ID:
                score = 4
                if p == 19:  # deliberate attention failure
                    score = 5
                rows.append((participant, item, score))
            elif item == ATHLETE_CONTROL_ID:
                score = rng.randint(1, 4)
                if p == 20:  # deliberate athlete failure
                    score = 7
                if p == 21:  # "do not know" on a control also fails
                    rows.append((participant, item, "DK"))
                    continue
                rows.append((participant, item, score))
            else:
                if rng.random() < 0.03:
                    rows.append((participant, item, "DK"))
                    continue
                decile = design.selected[item]
                noisy = round(decile + rng.gauss(0.0, 1.2))
                rows.append((participant, item, min(max(noisy, 1), 10)))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["participant_id", "item_id", "score"])
        writer.writerows(rows)


def write_demo_inputs(target_dir: str | Path, seed: int = DEMO_SEED) -> Path:
    """Write the demo input tree; returns the path of the generated config."""
    demo_dir = Path(target_dir)
    demo_dir.mkdir(parents=True, exist_ok=True)

    params = _weight_params(seed)
    for year in OBSERVED_YEARS:
        if year == 2020:
            _write_weights(demo_dir / "weights_2020_r1.csv", params, year,
                           jitter=0.002, jitter_seed=seed + 11)
            _write_weights(demo_dir / "weights_2020_r2.csv", params, year,
                           jitter=0.002, jitter_seed=seed + 12)
        else:
            _write_weights(demo_dir / f"weights_{year}.csv", params, year)
    _write_texts(demo_dir / "texts.csv")

    amenities_text = resources.files("afindex").joinpath("data/amenities9.json").read_text(
        encoding="utf-8"
    )
    (demo_dir / "amenities.json").write_text(amenities_text, encoding="utf-8")

    _write_panel(demo_dir / "panel.csv", seed + 2)

    survey_seed = seed + 3
    afi_2020 = _compute_afi_2020(demo_dir, DEMO_DIM)
    _write_responses(demo_dir / "responses.csv", afi_2020, survey_seed, per_decile=3)

    config = {
        "inputs": {
            "amenities": "amenities.json",
            "panel": "panel.csv",
            "responses": "responses.csv",
            "catalogs": [
                {"year": 2002, "releases": [
                    {"weights": "weights_2002.csv", "texts": "texts.csv"}]},
                {"year": 2012, "releases": [
                    {"weights": "weights_2012.csv", "texts": "texts.csv"}]},
                {"year": 2020, "releases": [
                    {"weights": "weights_2020_r1.csv", "texts": "texts.csv"},
                    {"weights": "weights_2020_r2.csv", "texts": "texts.csv"}]},
                {"year": 2022, "releases": [
                    {"weights": "weights_2022.csv", "texts": "texts.csv"}]},
            ],
        },
        "provider": {"kind": "builtin", "dim": DEMO_DIM},
        "params": {
            "weight_mode": "average",
            "index_years": [1990, 2020],
            "backcast": {"targets": [1990], "band": "residual"},
            "quantiles": {"k": 4, "anchor_year": 2020},
            "deciles": 10,
            "decomposition": {"variant": "midpoint", "t0": 1990, "t1": 2020},
            "regression": {"year": 1990, "age_bands": ["50-64", "65-74"], "hc": "HC1"},
            "survey": {"seed": survey_seed, "per_decile": 3, "statistic": "mean",
                       "year": 2020},
            "rescale": False,
            "workers": 1,
        },
        "output_dir": "out",
    }
    config_path = demo_dir / "config.json"
    with open(config_path, "w", encoding="utf-8") as fh:
        json.dump(config, fh, indent=2)
        fh.write("\n")
    return config_path
