"""landkit: synthetic landscapes, baseline models, and patch-metric evaluation."""

from .raster import (
    IMAGERY_BANDS,
    RasterFormatError,
    RasterStack,
    RasterValidationError,
    Sample,
    read_raster,
    read_raster_file,
    validate,
    write_raster,
    write_raster_file,
)
from .dataset import DatasetManifest, ManifestEntry
from .synthworld import WorldConfig, gen_conditions, gen_dataset, gen_imagery
from .splits import (
    SplitAssignment,
    SplitError,
    haversine_km,
    split_buffered,
    split_holdout_region,
    split_random,
)
from .segmentation import ClassRaster, KMeansModel, assign, fit_kmeans, sample_pixels
from .metrics import (
    LandscapeMetrics,
    MetricConfig,
    PatchTable,
    Patch,
    cohesion,
    compute_all,
    connectance,
    frac_mn,
    label_patches,
    mesh,
    ndvi_mean,
    shdi,
)
from .stats import CorrelationRow, bicor, correlation_table, pearson
from .mlp import (
    MlpParams,
    NormStats,
    TrainConfig,
    backward,
    forward,
    init_mlp,
    predict_image,
    shuffle_pixels,
    train_fc,
)
from .harness import (
    EvalConfig,
    ExperimentConfig,
    counterfactual_sweep,
    evaluate_generated,
    run_experiment_one,
    run_experiment_two,
)
from .rng import Rng, prng_next

__version__ = "0.1.0"
