"""Hypothesis-anchored evidence for thyroid-disease diagnosis support.

Given a patient record and a clinician's diagnostic hypothesis, the engine
returns three families of evidence instead of a recommendation: signed
local feature importance toward the hypothesis, counterexamples that would
flip the model to each alternate class, and similar cases the model keeps
in the hypothesis class.
"""

from .counterfactual import (CfConfig, Counterexample, DistanceProfile,
                             FeatureChange, SearchResult, SimilarCase,
                             brute_force_oracle, distance, diversity_select,
                             generate_counterexamples, generate_similar_cases,
                             sex_pregnancy_constraint)
from .errors import (IngestError, ModelFormatError, RecordError,
                     RecordNotFoundError, RequestValidationError, SchemaError,
                     SchemaMismatchError, ThyrolensError)
from .gbdt import (CrossValReport, EvalReport, GbdtModel, TrainConfig,
                   cross_validate, evaluate, load_model, save_model, train)
from .schema import (ClassLabel, DatasetSchema, FeatureKind, FeatureSpec,
                     FeatureStats, IngestReport, LabeledDataset, Record,
                     compute_stats, ingest_csv, kfold_indices, load_schema,
                     make_record, stratified_split, thyroid_schema, write_csv)
from .session import (EngineParams, ExplanationBundle, HypothesisRequest,
                      SessionLog, default_counts, handle_request,
                      investigate_another_hypothesis, parse_request,
                      replay_entry)
from .surrogate import (ImportanceVector, PerturbationConfig, explain_importance,
                        kernel_weights, perturb_around)

__version__ = "0.1.0"
