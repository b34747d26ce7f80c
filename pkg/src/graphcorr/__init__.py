"""Dynamic-connectivity graph classification with lagged cross-correlation
features, attention-based node embeddings, and gradient saliency.

The public surface re-exported here covers the typical workflow: load or
synthesize signals, extract windowed features, train the classifiers under
cross-validation, and explain predictions.
"""

from .autodiff import Tensor, backward, no_grad
from .config import ExperimentConfig
from .errors import (CompatibilityError, ConfigurationError, ContractError,
                     DataError, DegenerateSignalError, DegenerateTestError,
                     GraphCorrError, InsufficientFramesError, NumericalError,
                     ShapeMismatchError, StratificationError,
                     UndefinedMetricError)
from .explain import (SaliencyReport, fit_logistic, group_saliency,
                      load_group_map, saliency)
from .models import ClassifierConfig, MODEL_DEFAULTS
from .params import ParameterStore, load_checkpoint, save_checkpoint
from .pipeline import (AugmentedModel, GraphCorrSettings, SubjectFeatures,
                       VanillaModel, build_model, prepare_subject)
from .rng import substream
from .signals import (GraphTopology, TimeSeriesMatrix, form_graph,
                      load_dataset, load_manifest, load_subject_csv,
                      retained_pair_count, single_window, static_fc,
                      window_signals, windowed_fc)
from .synth import SynthSpec, generate, generate_subject
from .training import (CVPlan, FoldResult, OptimizerSettings, accuracy,
                       make_folds, roc_auc, run_cv, summarize,
                       wilcoxon_signed_rank)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
