"""Power-consumption modeling for multi-carrier 5G active antenna units.

Three layers: an analytical model with energy-saving-mode semantics
(:mod:`aaupower.power_model`), a heteroscedastic MLP estimator trained on
telemetry (:mod:`aaupower.estimator`), and a distillation step that fits the
analytical constants to estimator predictions (:mod:`aaupower.distill`).
"""

from .power_model import (
    AAUState,
    AnalyticalParams,
    CarrierState,
    HourlyActivity,
    hourly_energy,
    instantaneous_power,
    legacy_linear_model,
    load_params,
    reference_state,
    save_params,
    savings_fraction,
    transmit_power,
)
from .telemetry import (
    AAUCatalogEntry,
    CarrierConfig,
    Dataset,
    GeneratorConfig,
    HourlyRecord,
    RecordValidationError,
    SchemaError,
    activity_from_record,
    default_catalog,
    generate_synthetic_dataset,
    load_catalog,
    load_dataset,
    record_energy,
    save_catalog,
    save_dataset,
    split_by_days,
    validate_record,
)
from .features import FeatureSchema, Normalizer, encode, fit_normalizer
from .estimator import (
    GaussianPrediction,
    MLPWeights,
    TrainConfig,
    TrainingDivergedError,
    calibration_coverage,
    forward,
    init_weights,
    nll_loss,
    predict,
    predict_interval,
    train,
)
from .distill import (
    ConvergenceError,
    FitGrid,
    FitResult,
    IdentifiabilityError,
    build_grid,
    closed_form_check,
    distill_from_estimator,
    fit_params,
)

__version__ = "0.1.0"
