"""Command-line pipeline: ingest -> backcast -> embed -> index -> analyze /
regress / survey -> report.

Stages communicate through files under the configured output directory so
that the embedding stage can run on a different machine. Every stage writes
a ``meta.json`` sidecar with content hashes of its inputs. Identical config
and inputs produce byte-identical output trees for any worker count.

Exit codes: 0 ok, 2 config error, 3 missing upstream artifact, 4 data
validation or provider error.
"""

from __future__ import annotations

import argparse
import csv
import json
import shutil
import sys
from pathlib import Path

from . import analytics, demo, report, survey, timeseries
from .catalog import (
    load_amenities,
    load_catalog,
    load_panel,
    write_amenities,
    write_catalog,
    write_panel,
)
from .config import ProjectConfig, load_config
from .econ import RegressionSpec, format_regression_text, ols_robust, write_regression_csv
from .embedder import BuiltinEmbedder, SubprocessEmbedder, embed_texts, read_embeddings, write_embeddings
from .errors import AfindexError, ConfigError, DependencyError, ProviderError, ValidationError
from .index import (
    build_age_embedding,
    build_occupation_vectors,
    read_afi,
    score_afi,
    write_afi,
    write_age_embedding,
)
from .provenance import write_meta


def _require_file(path: Path, producer: str) -> Path:
    if not path.exists():
        raise DependencyError(
            f"missing artifact {path.name}; run 'afindex {producer}' first",
            required_command=producer,
        )
    return path


def _require_input(cfg: ProjectConfig, relative: str) -> Path:
    resolved = cfg.resolve(relative)
    if not resolved.exists():
        raise ValidationError(f"configured input {relative!r} does not exist")
    return resolved


def _ingest_dir(cfg: ProjectConfig) -> Path:
    return cfg.output_dir / "ingest"


def _backcast_dir(cfg: ProjectConfig) -> Path:
    return cfg.output_dir / "backcast"


def _embed_dir(cfg: ProjectConfig) -> Path:
    return cfg.output_dir / "embed"


def _index_dir(cfg: ProjectConfig) -> Path:
    return cfg.output_dir / "index"


def _catalog_paths(directory: Path, year: int) -> tuple[Path, Path]:
    return (directory / f"catalog_{year}_weights.csv",
            directory / f"catalog_{year}_texts.csv")


def _load_year_catalog(cfg: ProjectConfig, year: int):
    """Load the normalized catalog for a year from ingest or backcast output."""
    if year in cfg.observed_years():
        weights, texts = _catalog_paths(_ingest_dir(cfg), year)
        _require_file(weights, "ingest")
        _require_file(texts, "ingest")
    elif year in cfg.backcast_targets:
        weights, texts = _catalog_paths(_backcast_dir(cfg), year)
        _require_file(weights, "backcast")
        _require_file(texts, "backcast")
    else:
        raise ConfigError(f"no catalog source for year {year}")
    return load_catalog(weights, texts, year)


def _provider(cfg: ProjectConfig):
    if cfg.provider.kind == "builtin":
        return BuiltinEmbedder(cfg.provider.dim)
    return SubprocessEmbedder(cfg.provider.command)


def _write_json(path: Path, payload) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_ingest(cfg: ProjectConfig) -> None:
    out = _ingest_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    inputs: list[tuple[str, Path]] = [("config.json", cfg.config_path)]

    amenities = load_amenities(_require_input(cfg, cfg.amenities))
    inputs.append((cfg.amenities, cfg.resolve(cfg.amenities)))
    write_amenities(amenities, out / "amenities.json")

    panel = load_panel(_require_input(cfg, cfg.panel))
    inputs.append((cfg.panel, cfg.resolve(cfg.panel)))
    write_panel(panel, out / "panel.csv")

    outputs = ["amenities.json", "panel.csv"]
    for source in cfg.catalogs:
        releases = []
        for release in source.releases:
            weights_path = _require_input(cfg, release.weights)
            texts_path = _require_input(cfg, release.texts)
            inputs.append((release.weights, weights_path))
            inputs.append((release.texts, texts_path))
            releases.append(load_catalog(weights_path, texts_path, source.year,
                                         rescale=cfg.rescale))
        merged = timeseries.average_releases(releases)
        weights_out, texts_out = _catalog_paths(out, source.year)
        write_catalog(merged, weights_out, texts_out)
        outputs.extend([weights_out.name, texts_out.name])

    write_meta(out, "ingest",
               params={"rescale": cfg.rescale,
                       "years": list(cfg.observed_years()),
                       "amenity_count": len(amenities)},
               inputs=inputs, outputs=outputs)
    print(f"ingest: wrote {len(outputs)} artifacts to {out}")


def cmd_backcast(cfg: ProjectConfig) -> None:
    out = _backcast_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    if not cfg.backcast_targets:
        write_meta(out, "backcast", params={"targets": []}, inputs=[], outputs=[])
        print("backcast: no targets configured")
        return
    observed = cfg.observed_years()
    catalogs = [_load_year_catalog(cfg, year) for year in observed]

    inputs = [("config.json", cfg.config_path)]
    for year in observed:
        weights, texts = _catalog_paths(_ingest_dir(cfg), year)
        inputs.append((f"ingest/{weights.name}", weights))
        inputs.append((f"ingest/{texts.name}", texts))

    outputs = []
    for target in cfg.backcast_targets:
        catalog, results = timeseries.backcast_catalog(catalogs, target, band=cfg.band)
        weights_out, texts_out = _catalog_paths(out, target)
        write_catalog(catalog, weights_out, texts_out)
        report_path = out / f"backcast_report_{target}.csv"
        with open(report_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["occupation_id", "descriptor_id", "target_year",
                             "pchip_raw", "linear", "stderr", "final"])
            for r in results:
                writer.writerow([r.occupation, r.descriptor, r.target_year,
                                 format(r.pchip_raw, ".17g"), format(r.linear, ".17g"),
                                 format(r.stderr, ".17g"), format(r.final, ".17g")])
        outputs.extend([weights_out.name, texts_out.name, report_path.name])

    write_meta(out, "backcast",
               params={"targets": list(cfg.backcast_targets), "band": cfg.band,
                       "source_years": list(observed)},
               inputs=inputs, outputs=outputs)
    print(f"backcast: wrote {len(outputs)} artifacts to {out}")


def cmd_embed(cfg: ProjectConfig, workers: int | None = None) -> None:
    out = _embed_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    provider = _provider(cfg)
    max_workers = workers or cfg.workers

    inputs = [("config.json", cfg.config_path)]
    outputs = []
    for year in cfg.catalog_years_needed():
        catalog = _load_year_catalog(cfg, year)
        stage = "ingest" if year in cfg.observed_years() else "backcast"
        weights, texts = _catalog_paths(cfg.output_dir / stage, year)
        inputs.append((f"{stage}/{texts.name}", texts))
        matrix = embed_texts(catalog.texts, provider, max_workers=max_workers)
        path = out / f"descriptors_{year}.jsonl"
        write_embeddings(matrix, path)
        outputs.append(path.name)

    amenities_path = _require_file(_ingest_dir(cfg) / "amenities.json", "ingest")
    inputs.append(("ingest/amenities.json", amenities_path))
    amenities = load_amenities(amenities_path)
    amenity_matrix = embed_texts(amenities.texts(), provider, max_workers=max_workers)
    write_embeddings(amenity_matrix, out / "amenities.jsonl")
    outputs.append("amenities.jsonl")

    write_meta(out, "embed",
               params={"provider": cfg.provider.description,
                       "dim": amenity_matrix.dim,
                       "years": list(cfg.catalog_years_needed())},
               inputs=inputs, outputs=outputs)
    print(f"embed: wrote {len(outputs)} artifacts to {out} (p={amenity_matrix.dim})")


def cmd_index(cfg: ProjectConfig, workers: int | None = None) -> None:
    out = _index_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    max_workers = workers or cfg.workers

    amenities = load_amenities(_require_file(_ingest_dir(cfg) / "amenities.json", "ingest"))
    amenity_emb = read_embeddings(_require_file(_embed_dir(cfg) / "amenities.jsonl", "embed"))
    d0 = build_age_embedding(amenities, amenity_emb, cfg.weight_mode)
    write_age_embedding(d0, out / "age_embedding.json")

    inputs = [("config.json", cfg.config_path),
              ("embed/amenities.jsonl", _embed_dir(cfg) / "amenities.jsonl"),
              ("ingest/amenities.json", _ingest_dir(cfg) / "amenities.json")]
    outputs = ["age_embedding.json"]
    for year in cfg.index_years:
        catalog = _load_year_catalog(cfg, year)
        emb_path = _require_file(_embed_dir(cfg) / f"descriptors_{year}.jsonl", "embed")
        inputs.append((f"embed/{emb_path.name}", emb_path))
        descriptor_emb = read_embeddings(emb_path)
        vectors = build_occupation_vectors(catalog, descriptor_emb, max_workers=max_workers)
        afi = score_afi(vectors, d0)
        path = out / f"afi_{year}.csv"
        write_afi(afi, path)
        outputs.append(path.name)

    write_meta(out, "index",
               params={"weight_mode": cfg.weight_mode, "dim": d0.dim,
                       "years": list(cfg.index_years)},
               inputs=inputs, outputs=outputs)
    print(f"index: wrote {len(outputs)} artifacts to {out}")


def _load_afi(cfg: ProjectConfig, year: int):
    path = _require_file(_index_dir(cfg) / f"afi_{year}.csv", "index")
    return read_afi(path, metadata={"weight_mode": cfg.weight_mode})


def _load_ingested_panel(cfg: ProjectConfig):
    return load_panel(_require_file(_ingest_dir(cfg) / "panel.csv", "ingest"))


def cmd_analyze(cfg: ProjectConfig) -> None:
    out = cfg.output_dir / "analyze"
    out.mkdir(parents=True, exist_ok=True)
    panel = _load_ingested_panel(cfg)
    afi_by_year = {year: _load_afi(cfg, year) for year in cfg.index_years}
    anchor = afi_by_year[cfg.anchor_year]

    quartiles = analytics.make_quantiles(anchor, cfg.quantile_k)
    deciles = analytics.make_quantiles(anchor, cfg.decile_k)
    _write_json(out / "quantile_scheme.json", {
        "quantiles": {"anchor_year": quartiles.anchor_year, "k": quartiles.k,
                      "cuts": list(quartiles.cuts)},
        "deciles": {"anchor_year": deciles.anchor_year, "k": deciles.k,
                    "cuts": list(deciles.cuts)},
    })

    afi_t0, afi_t1 = afi_by_year[cfg.t0], afi_by_year[cfg.t1]
    decomp = analytics.oaxaca_decompose(afi_t0, afi_t1, panel,
                                        variant=cfg.decomposition_variant)
    with open(out / "oaxaca.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t0", "t1", "variant", "total", "within", "between",
                         "interaction", "within_share"])
        writer.writerow([
            decomp.t0, decomp.t1, decomp.variant,
            format(decomp.total, ".17g"), format(decomp.within, ".17g"),
            format(decomp.between, ".17g"), format(decomp.interaction, ".17g"),
            "" if decomp.within_share is None else format(decomp.within_share, ".17g"),
        ])
    with open(out / "excluded_occupations.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["occupation_id"])
        for occ in decomp.excluded:
            writer.writerow([occ])

    demo_rows = analytics.demographic_table(
        afi_by_year, panel, ("age_band", "sex", "education"), quartiles,
    )
    with open(out / "demographic_table.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["age_band", "sex", "education", "year", "employment",
                         "employment_share", "weighted_afi", "top_quantile_share",
                         "flagged"])
        for row in demo_rows:
            group = dict(row.group)
            writer.writerow([
                group["age_band"], group["sex"], group["education"], row.year,
                format(row.employment, ".17g"),
                format(row.employment_share, ".17g"),
                "" if row.weighted_afi is None else format(row.weighted_afi, ".17g"),
                "" if row.top_quantile_share is None else format(row.top_quantile_share, ".17g"),
                int(row.flagged),
            ])

    with open(out / "quantile_profile.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["year", "bucket", "occupations", "employment",
                         "employment_share", "mean_wage", "graduate_share",
                         "median_age"])
        for year in cfg.index_years:
            for row in analytics.quantile_profile(afi_by_year[year], panel, quartiles, year):
                writer.writerow([
                    row.year, row.bucket, row.occupations,
                    format(row.employment, ".17g"),
                    format(row.employment_share, ".17g"),
                    "" if row.mean_wage is None else format(row.mean_wage, ".17g"),
                    "" if row.graduate_share is None else format(row.graduate_share, ".17g"),
                    "" if row.median_age is None else format(row.median_age, ".17g"),
                ])

    with open(out / "afi_change.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["occupation_id", f"afi_{cfg.t0}", f"afi_{cfg.t1}",
                         "change_abs", "change_pct"])
        for occ in sorted(set(afi_t0.values) & set(afi_t1.values)):
            v0, v1 = afi_t0.values[occ], afi_t1.values[occ]
            writer.writerow([
                occ, format(v0, ".17g"), format(v1, ".17g"),
                format(v1 - v0, ".17g"),
                format((v1 - v0) / abs(v0) * 100.0, ".17g") if v0 != 0 else "",
            ])

    report.write_summary(
        report.summary_rows(afi_t0, afi_t1, panel, anchor,
                            variant=cfg.decomposition_variant),
        out / "summary.csv",
    )

    inputs = [("config.json", cfg.config_path),
              ("ingest/panel.csv", _ingest_dir(cfg) / "panel.csv")]
    for year in cfg.index_years:
        inputs.append((f"index/afi_{year}.csv", _index_dir(cfg) / f"afi_{year}.csv"))
    write_meta(out, "analyze",
               params={"quantile_k": cfg.quantile_k, "decile_k": cfg.decile_k,
                       "anchor_year": cfg.anchor_year,
                       "decomposition_variant": cfg.decomposition_variant,
                       "t0": cfg.t0, "t1": cfg.t1},
               inputs=inputs,
               outputs=["quantile_scheme.json", "oaxaca.csv", "excluded_occupations.csv",
                        "demographic_table.csv", "quantile_profile.csv",
                        "afi_change.csv", "summary.csv"])
    print(f"analyze: wrote 7 artifacts to {out}")


def _regression_data(cfg: ProjectConfig, panel, afi) -> tuple[dict, list[str], list[str]]:
    """Assemble the per-occupation regression table for the configured year."""
    year = cfg.regression_year
    cells = [c for c in panel if c.year == year]
    if not cells:
        raise ValidationError(f"panel has no cells for regression year {year}")
    industries = sorted({c.industry for c in cells})
    by_occ: dict[str, list] = {}
    for c in cells:
        by_occ.setdefault(c.occupation, []).append(c)

    rows: dict[str, list[float]] = {
        "share_older": [], "afi": [], "share_female": [], "share_college": [],
        "hourly_wage": [],
    }
    industry_cols = {ind: [] for ind in industries}
    occupations = []
    dropped_no_wage = []
    for occ in sorted(by_occ):
        occ_cells = by_occ[occ]
        total = sum(c.count for c in occ_cells)
        if total == 0.0:
            continue
        if occ not in afi.values:
            raise ValidationError(
                f"occupation {occ!r} employed in {year} has no index value"
            )
        wage_weight = sum(c.count for c in occ_cells if c.wage is not None and c.count > 0)
        if wage_weight == 0.0:
            dropped_no_wage.append(occ)
            continue
        occupations.append(occ)
        rows["afi"].append(afi.values[occ])
        rows["share_older"].append(
            sum(c.count for c in occ_cells if c.age_band in cfg.dependent_age_bands) / total
        )
        rows["share_female"].append(
            sum(c.count for c in occ_cells if c.sex == "female") / total
        )
        rows["share_college"].append(
            sum(c.count for c in occ_cells if c.education == "college") / total
        )
        rows["hourly_wage"].append(
            sum(c.wage * c.count for c in occ_cells if c.wage is not None) / wage_weight
        )
        for ind in industries:
            industry_cols[ind].append(
                sum(c.count for c in occ_cells if c.industry == ind) / total
            )
    if len(occupations) < 3:
        raise ValidationError(
            f"only {len(occupations)} occupations usable for regression in {year}"
        )
    # first industry is the omitted baseline
    for ind in industries[1:]:
        rows[f"share_industry_{ind}"] = industry_cols[ind]
    data = {"occupation": occupations, **rows}
    return data, industries[1:], dropped_no_wage


def cmd_regress(cfg: ProjectConfig) -> None:
    out = cfg.output_dir / "regress"
    out.mkdir(parents=True, exist_ok=True)
    panel = _load_ingested_panel(cfg)
    afi = _load_afi(cfg, cfg.regression_year)
    data, industries, dropped = _regression_data(cfg, panel, afi)

    columns = [c for c in data if c != "occupation"]
    with open(out / "regression_data.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["occupation"] + columns)
        for i, occ in enumerate(data["occupation"]):
            writer.writerow([occ] + [format(data[c][i], ".17g") for c in columns])

    nested = [
        ("#1", ["afi"]),
        ("#2", ["afi", "share_female"]),
        ("#3", ["afi", "share_female", "share_college"]),
        ("#4", ["afi", "share_female", "share_college", "hourly_wage"]),
        ("#5", ["afi", "share_female", "share_college", "hourly_wage"]
               + [f"share_industry_{ind}" for ind in industries]),
    ]
    results = []
    for label, regressors in nested:
        spec = RegressionSpec(
            dependent="share_older", regressors=tuple(regressors),
            intercept=True, focus="afi", label=label,
        )
        results.append(ols_robust(data, spec, hc=cfg.hc))

    write_regression_csv(results, out / "regression_table.csv")
    with open(out / "regression_table.txt", "w", encoding="utf-8") as fh:
        fh.write(format_regression_text(results))

    write_meta(out, "regress",
               params={"year": cfg.regression_year, "hc": cfg.hc,
                       "dependent_age_bands": list(cfg.dependent_age_bands),
                       "dropped_no_wage": dropped},
               inputs=[("config.json", cfg.config_path),
                       ("ingest/panel.csv", _ingest_dir(cfg) / "panel.csv"),
                       (f"index/afi_{cfg.regression_year}.csv",
                        _index_dir(cfg) / f"afi_{cfg.regression_year}.csv")],
               outputs=["regression_data.csv", "regression_table.csv",
                        "regression_table.txt"])
    print(f"regress: wrote 3 artifacts to {out}")


def cmd_survey(cfg: ProjectConfig) -> None:
    out = cfg.output_dir / "survey"
    forms_dir = out / "forms"
    forms_dir.mkdir(parents=True, exist_ok=True)
    afi = _load_afi(cfg, cfg.survey_year)
    design = survey.design_survey(afi, per_decile=cfg.per_decile,
                                  seed=cfg.survey_seed, k=10)

    outputs = []
    for instrument in design.instruments:
        path = forms_dir / f"{instrument.survey_id}.json"
        survey.write_instrument(instrument, path)
        outputs.append(f"forms/{path.name}")
    with open(out / "selection.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["occupation_id", "decile", "afi"])
        for occ in sorted(design.selected):
            writer.writerow([occ, design.selected[occ],
                             format(afi.values[occ], ".17g")])
    outputs.append("selection.csv")

    amenities_path = _ingest_dir(cfg) / "amenities.json"
    if amenities_path.exists():
        with open(amenities_path, encoding="utf-8") as fh:
            payload = json.load(fh)
        definition = payload.get("survey_definition")
    else:
        definition = None
    if definition is None:
        with open(cfg.resolve(cfg.amenities), encoding="utf-8") as fh:
            definition = json.load(fh).get("survey_definition")
    if definition:
        (out / "guidance.txt").write_text(definition + "\n", encoding="utf-8")
        outputs.append("guidance.txt")

    inputs = [("config.json", cfg.config_path),
              (f"index/afi_{cfg.survey_year}.csv",
               _index_dir(cfg) / f"afi_{cfg.survey_year}.csv")]

    if cfg.responses:
        responses_path = _require_input(cfg, cfg.responses)
        inputs.append((cfg.responses, responses_path))
        responses = survey.load_responses(responses_path)
        filter_report = survey.filter_responses(
            responses, known_items=design.items(),
        )
        _write_json(out / "filter_report.json", {
            "participants_total": len(responses.participants()),
            "participants_kept": len(filter_report.kept_participants),
            "discarded_attention": list(filter_report.discarded_attention),
            "discarded_athlete": list(filter_report.discarded_athlete),
        })
        validation = survey.aggregate_and_validate(
            filter_report.responses, afi, design=design,
            statistic=cfg.survey_statistic,
        )
        _write_json(out / "validation.json", {
            "statistic": validation.statistic,
            "rho": validation.rho,
            "pvalue": validation.pvalue,
            "rho_response_level": validation.rho_response,
            "pvalue_response_level": validation.pvalue_response,
            "mean_abs_deviation": validation.occupation_deviation.mean,
            "median_abs_deviation": validation.occupation_deviation.median,
            "response_mean_abs_deviation": (
                validation.response_deviation.mean
                if validation.response_deviation else None
            ),
            "response_median_abs_deviation": (
                validation.response_deviation.median
                if validation.response_deviation else None
            ),
            "n_participants": validation.n_participants,
            "n_responses": validation.n_responses,
            "ratings_per_item": validation.ratings_per_item,
        })
        with open(out / "validation_ranks.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["occupation_id", "survey_statistic", "survey_rank",
                             "afi_rank", "abs_deviation"])
            for occ in sorted(validation.mean_scores):
                writer.writerow([
                    occ,
                    format(validation.mean_scores[occ], ".17g"),
                    format(validation.survey_ranks[occ], ".17g"),
                    format(validation.afi_ranks[occ], ".17g"),
                    format(abs(validation.survey_ranks[occ]
                               - validation.afi_ranks[occ]), ".17g"),
                ])
        dev = (validation.response_deviation
               if validation.response_deviation else validation.occupation_deviation)
        with open(out / "validation_deviations.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["abs_deviation", "count", "cumulative_share"])
            cum = dict(dev.cumulative)
            for level, count in dev.histogram:
                writer.writerow([format(level, ".17g"), count,
                                 format(cum[level], ".17g")])
        outputs.extend(["filter_report.json", "validation.json",
                        "validation_ranks.csv", "validation_deviations.csv"])

    write_meta(out, "survey",
               params={"seed": cfg.survey_seed, "per_decile": cfg.per_decile,
                       "statistic": cfg.survey_statistic, "year": cfg.survey_year},
               inputs=inputs, outputs=outputs)
    print(f"survey: wrote {len(outputs)} artifacts to {out}")


def cmd_report(cfg: ProjectConfig) -> None:
    out = cfg.output_dir / "report"
    figures = out / "figures"
    figures.mkdir(parents=True, exist_ok=True)

    panel = _load_ingested_panel(cfg)
    afi_by_year = {year: _load_afi(cfg, year) for year in cfg.index_years}

    scheme_path = _require_file(cfg.output_dir / "analyze" / "quantile_scheme.json",
                                "analyze")
    with open(scheme_path, encoding="utf-8") as fh:
        schemes_raw = json.load(fh)
    quartiles = analytics.QuantileScheme(
        anchor_year=schemes_raw["quantiles"]["anchor_year"],
        k=schemes_raw["quantiles"]["k"],
        cuts=tuple(schemes_raw["quantiles"]["cuts"]),
    )
    deciles = analytics.QuantileScheme(
        anchor_year=schemes_raw["deciles"]["anchor_year"],
        k=schemes_raw["deciles"]["k"],
        cuts=tuple(schemes_raw["deciles"]["cuts"]),
    )

    outputs = []

    report.write_top_bottom(afi_by_year, out / "top_bottom.csv")
    outputs.append("top_bottom.csv")

    anchor_catalog = _load_year_catalog(cfg, cfg.anchor_year)
    report.write_descriptor_by_quantile(
        anchor_catalog, afi_by_year[cfg.anchor_year], panel, quartiles,
        cfg.anchor_year, out / "descriptor_by_quantile.csv",
    )
    outputs.append("descriptor_by_quantile.csv")

    report.write_top_quantile_groups(afi_by_year, panel, quartiles,
                                     out / "top_quantile_groups.csv")
    outputs.append("top_quantile_groups.csv")

    shift_rows = report.decile_shift_rows(afi_by_year, panel, deciles)
    report.write_decile_shift(shift_rows, out / "decile_shift.csv")
    outputs.append("decile_shift.csv")

    demo_rows = analytics.demographic_table(
        afi_by_year, panel, ("age_band", "sex", "education"), quartiles,
    )
    change_rows = report.demographic_change_rows(demo_rows, cfg.t0, cfg.t1)
    report.write_demographic_change(change_rows, out / "demographic_change.csv")
    outputs.append("demographic_change.csv")

    dist_rows = report.afi_distribution_rows(afi_by_year)
    report.write_afi_distribution(dist_rows, out / "afi_distribution.csv")
    outputs.append("afi_distribution.csv")

    report.write_summary(
        report.summary_rows(afi_by_year[cfg.t0], afi_by_year[cfg.t1], panel,
                            afi_by_year[cfg.anchor_year],
                            variant=cfg.decomposition_variant),
        out / "summary.csv",
    )
    outputs.append("summary.csv")

    regress_dir = cfg.output_dir / "regress"
    for name in ("regression_table.csv", "regression_table.txt"):
        source = _require_file(regress_dir / name, "regress")
        shutil.copyfile(source, out / name)
        outputs.append(name)

    validation_path = cfg.output_dir / "survey" / "validation.json"
    if validation_path.exists():
        shutil.copyfile(validation_path, out / "validation_summary.json")
        outputs.append("validation_summary.json")

    report.figure_afi_distribution(dist_rows, figures / "afi_distribution.png")
    report.figure_decile_shift(shift_rows, figures / "decile_shift.png")
    report.figure_quantile_change(shift_rows, cfg.t0, cfg.t1,
                                  figures / "quantile_change.png")
    report.figure_demographic_change(change_rows,
                                     figures / "demographic_change.png")
    profile_rows = []
    for year in cfg.index_years:
        profile_rows.extend(
            analytics.quantile_profile(afi_by_year[year], panel, quartiles, year)
        )
    report.figure_quantile_profile(profile_rows, figures / "quantile_profile.png")
    outputs.extend([
        "figures/afi_distribution.png", "figures/decile_shift.png",
        "figures/quantile_change.png", "figures/demographic_change.png",
        "figures/quantile_profile.png",
    ])

    inputs = [("config.json", cfg.config_path),
              ("ingest/panel.csv", _ingest_dir(cfg) / "panel.csv"),
              ("analyze/quantile_scheme.json", scheme_path)]
    for year in cfg.index_years:
        inputs.append((f"index/afi_{year}.csv", _index_dir(cfg) / f"afi_{year}.csv"))
    write_meta(out, "report",
               params={"anchor_year": cfg.anchor_year, "t0": cfg.t0, "t1": cfg.t1,
                       "quantile_k": cfg.quantile_k, "decile_k": cfg.decile_k},
               inputs=inputs, outputs=outputs)
    print(f"report: wrote {len(outputs)} artifacts to {out}")


def cmd_demo(directory: str, seed: int) -> None:
    config_path = demo.write_demo_inputs(directory, seed=seed)
    print(f"demo: wrote synthetic project to {config_path.parent}")
    print(f"demo: config at {config_path}")


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

PIPELINE_COMMANDS = {
    "ingest": cmd_ingest,
    "backcast": cmd_backcast,
    "embed": cmd_embed,
    "index": cmd_index,
    "analyze": cmd_analyze,
    "regress": cmd_regress,
    "survey": cmd_survey,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="afindex",
        description="Age-friendliness index pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in PIPELINE_COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} stage")
        p.add_argument("--config", required=True, help="project config JSON")
        p.add_argument("--out", default=None, help="override the output directory")
        if name in ("embed", "index"):
            p.add_argument("--workers", type=int, default=None,
                           help="parallel workers (output is identical for any count)")
    p = sub.add_parser("demo", help="write the bundled synthetic project")
    p.add_argument("--dir", default="demo", help="target directory")
    p.add_argument("--seed", type=int, default=demo.DEMO_SEED)
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "demo":
            cmd_demo(args.dir, args.seed)
            return 0
        cfg = load_config(args.config, out_override=args.out)
        handler = PIPELINE_COMMANDS[args.command]
        if args.command in ("embed", "index"):
            handler(cfg, workers=args.workers)
        else:
            handler(cfg)
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DependencyError as exc:
        print(f"dependency error: {exc}", file=sys.stderr)
        return 3
    except (ValidationError, ProviderError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 4
    except AfindexError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
