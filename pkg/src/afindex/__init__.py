"""afindex: a semantic age-friendliness index over occupations.

The library scores occupations by the cosine similarity between their
descriptor-weighted text embedding and a preference-weighted embedding of
job-amenity definitions, backcasts descriptor weights to unobserved years,
and ships the aggregation, decomposition, regression, and survey-validation
machinery needed to analyze how the index moves over time.
"""

__version__ = "0.1.0"

from .catalog import (  # noqa: F401
    Amenity,
    AmenitySpec,
    DescriptorCatalog,
    EmploymentPanel,
    PanelCell,
    load_amenities,
    load_catalog,
    load_panel,
    write_catalog,
)
from .embedder import (  # noqa: F401
    BuiltinEmbedder,
    EmbeddingMatrix,
    SubprocessEmbedder,
    builtin_embed,
    embed_texts,
    read_embeddings,
    write_embeddings,
)
from .errors import (  # noqa: F401
    AfindexError,
    ConfigError,
    DependencyError,
    ProviderError,
    ValidationError,
)
from .index import (  # noqa: F401
    AfiTable,
    AgeFriendlinessEmbedding,
    OccupationVectors,
    build_age_embedding,
    build_occupation_vectors,
    rank_occupations,
    score_afi,
)
