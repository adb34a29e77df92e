"""Project configuration: one JSON file drives the whole pipeline.

Paths inside the file are resolved relative to the file's own directory, so a
project tree can be moved or copied without edits. Parameter domains are
checked here once; referenced files are checked for existence by the command
that actually needs them.

The ``AFINDEX_PROVIDER`` environment variable overrides the embedding
provider with a subprocess command line (shlex syntax).
"""

from __future__ import annotations

import json
import os
import shlex
from dataclasses import dataclass
from pathlib import Path

from .analytics import OAXACA_VARIANTS
from .econ import HC_VARIANTS
from .errors import ConfigError
from .index import WEIGHT_MODES

PROVIDER_ENV_VAR = "AFINDEX_PROVIDER"
BAND_MODES = ("residual", "prediction")


@dataclass(frozen=True)
class ReleaseSource:
    weights: str
    texts: str


@dataclass(frozen=True)
class CatalogSource:
    year: int
    releases: tuple[ReleaseSource, ...]


@dataclass(frozen=True)
class ProviderConfig:
    kind: str  # "builtin" or "subprocess"
    dim: int | None = None
    command: tuple[str, ...] | None = None

    @property
    def description(self) -> str:
        if self.kind == "builtin":
            return f"builtin:p{self.dim}"
        return "subprocess:" + " ".join(self.command or ())


@dataclass(frozen=True)
class ProjectConfig:
    base_dir: Path
    config_path: Path
    amenities: str
    panel: str
    responses: str | None
    catalogs: tuple[CatalogSource, ...]
    provider: ProviderConfig
    weight_mode: str
    index_years: tuple[int, ...]
    backcast_targets: tuple[int, ...]
    band: str
    quantile_k: int
    anchor_year: int
    decile_k: int
    decomposition_variant: str
    t0: int
    t1: int
    regression_year: int
    dependent_age_bands: tuple[str, ...]
    hc: str
    survey_seed: int
    per_decile: int
    survey_statistic: str
    survey_year: int
    rescale: bool
    workers: int
    output_dir: Path

    def resolve(self, path: str) -> Path:
        return (self.base_dir / path).resolve()

    def observed_years(self) -> tuple[int, ...]:
        return tuple(sorted(c.year for c in self.catalogs))

    def catalog_years_needed(self) -> tuple[int, ...]:
        """Years the index stage needs a catalog for (observed or backcast)."""
        return tuple(sorted(set(self.index_years)))


def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise ConfigError(f"missing {key!r} in {where}")
    return obj[key]


def _as_int(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where} must be an integer, got {value!r}")
    return value


def load_config(path: str | Path, out_override: str | None = None) -> ProjectConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")

    inputs = _require(raw, "inputs", str(path))
    catalogs_raw = _require(inputs, "catalogs", "inputs")
    if not isinstance(catalogs_raw, list) or not catalogs_raw:
        raise ConfigError("inputs.catalogs must be a non-empty list")
    catalogs = []
    seen_years = set()
    for entry in catalogs_raw:
        year = _as_int(_require(entry, "year", "catalog entry"), "catalog year")
        if year in seen_years:
            raise ConfigError(f"duplicate catalog year {year}")
        seen_years.add(year)
        releases_raw = _require(entry, "releases", f"catalog {year}")
        if not isinstance(releases_raw, list) or not releases_raw:
            raise ConfigError(f"catalog {year} needs a non-empty releases list")
        releases = tuple(
            ReleaseSource(
                weights=str(_require(r, "weights", f"catalog {year} release")),
                texts=str(_require(r, "texts", f"catalog {year} release")),
            )
            for r in releases_raw
        )
        catalogs.append(CatalogSource(year=year, releases=releases))
    catalogs.sort(key=lambda c: c.year)

    params = raw.get("params", {})
    weight_mode = params.get("weight_mode", "average")
    if weight_mode not in WEIGHT_MODES:
        raise ConfigError(f"params.weight_mode must be one of {WEIGHT_MODES}")

    observed = {c.year for c in catalogs}
    index_years = tuple(
        _as_int(y, "index year") for y in params.get("index_years", sorted(observed))
    )
    if not index_years:
        raise ConfigError("params.index_years must not be empty")

    backcast_params = params.get("backcast", {})
    backcast_targets = tuple(
        _as_int(y, "backcast target") for y in backcast_params.get("targets", [])
    )
    band = backcast_params.get("band", "residual")
    if band not in BAND_MODES:
        raise ConfigError(f"backcast.band must be one of {BAND_MODES}")
    for year in index_years:
        if year not in observed and year not in backcast_targets:
            raise ConfigError(
                f"index year {year} is neither an observed catalog year nor a "
                "backcast target"
            )
    for target in backcast_targets:
        if target in observed:
            raise ConfigError(f"backcast target {target} is already observed")

    quantiles = params.get("quantiles", {})
    quantile_k = _as_int(quantiles.get("k", 4), "quantiles.k")
    if quantile_k < 2:
        raise ConfigError("quantiles.k must be >= 2")
    anchor_year = _as_int(quantiles.get("anchor_year", max(index_years)), "anchor_year")
    if anchor_year not in index_years:
        raise ConfigError(f"anchor year {anchor_year} is not an index year")
    decile_k = _as_int(params.get("deciles", 10), "params.deciles")
    if decile_k < 2:
        raise ConfigError("params.deciles must be >= 2")

    decomposition = params.get("decomposition", {})
    variant = decomposition.get("variant", "midpoint")
    if variant not in OAXACA_VARIANTS:
        raise ConfigError(f"decomposition.variant must be one of {OAXACA_VARIANTS}")
    t0 = _as_int(decomposition.get("t0", min(index_years)), "decomposition.t0")
    t1 = _as_int(decomposition.get("t1", max(index_years)), "decomposition.t1")
    if t0 not in index_years or t1 not in index_years:
        raise ConfigError("decomposition years must be index years")
    if t0 == t1:
        raise ConfigError("decomposition.t0 and t1 must differ")

    regression = params.get("regression", {})
    regression_year = _as_int(regression.get("year", min(index_years)), "regression.year")
    if regression_year not in index_years:
        raise ConfigError(f"regression year {regression_year} is not an index year")
    age_bands = tuple(str(b) for b in regression.get("age_bands", ["50-64", "65-74"]))
    if not age_bands:
        raise ConfigError("regression.age_bands must not be empty")
    hc = regression.get("hc", "HC1")
    if hc not in HC_VARIANTS:
        raise ConfigError(f"regression.hc must be one of {HC_VARIANTS}")

    survey = params.get("survey", {})
    survey_seed = _as_int(survey.get("seed", 0), "survey.seed")
    per_decile = _as_int(survey.get("per_decile", 3), "survey.per_decile")
    if per_decile < 1:
        raise ConfigError("survey.per_decile must be >= 1")
    survey_statistic = survey.get("statistic", "mean")
    if survey_statistic not in ("mean", "median"):
        raise ConfigError("survey.statistic must be 'mean' or 'median'")
    survey_year = _as_int(survey.get("year", anchor_year), "survey.year")
    if survey_year not in index_years:
        raise ConfigError(f"survey year {survey_year} is not an index year")

    rescale = bool(params.get("rescale", False))
    workers = _as_int(params.get("workers", 1), "params.workers")
    if workers < 1:
        raise ConfigError("params.workers must be >= 1")

    provider_raw = raw.get("provider", {"kind": "builtin", "dim": 16})
    env_command = os.environ.get(PROVIDER_ENV_VAR)
    if env_command:
        provider = ProviderConfig(kind="subprocess", command=tuple(shlex.split(env_command)))
    else:
        kind = provider_raw.get("kind")
        if kind == "builtin":
            dim = _as_int(provider_raw.get("dim", 16), "provider.dim")
            if dim < 2:
                raise ConfigError("provider.dim must be >= 2")
            provider = ProviderConfig(kind="builtin", dim=dim)
        elif kind == "subprocess":
            command = provider_raw.get("command")
            if not isinstance(command, list) or not command:
                raise ConfigError("provider.command must be a non-empty list")
            provider = ProviderConfig(kind="subprocess", command=tuple(str(c) for c in command))
        else:
            raise ConfigError("provider.kind must be 'builtin' or 'subprocess'")

    base_dir = path.parent.resolve()
    output_dir = Path(out_override) if out_override else base_dir / str(
        raw.get("output_dir", "out")
    )

    return ProjectConfig(
        base_dir=base_dir,
        config_path=path.resolve(),
        amenities=str(_require(inputs, "amenities", "inputs")),
        panel=str(_require(inputs, "panel", "inputs")),
        responses=str(inputs["responses"]) if inputs.get("responses") else None,
        catalogs=tuple(catalogs),
        provider=provider,
        weight_mode=weight_mode,
        index_years=index_years,
        backcast_targets=backcast_targets,
        band=band,
        quantile_k=quantile_k,
        anchor_year=anchor_year,
        decile_k=decile_k,
        decomposition_variant=variant,
        t0=t0,
        t1=t1,
        regression_year=regression_year,
        dependent_age_bands=age_bands,
        hc=hc,
        survey_seed=survey_seed,
        per_decile=per_decile,
        survey_statistic=survey_statistic,
        survey_year=survey_year,
        rescale=rescale,
        workers=workers,
        output_dir=output_dir,
    )
