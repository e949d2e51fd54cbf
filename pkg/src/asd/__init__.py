"""Cold-start adaptor that lets a semi-supervised learner do clustering."""
from .data import AugmentationSpec, Dataset, generate_gaussian_mixture, load_fixture, save_fixture
from .metrics import ari, accuracy, evaluate, nmi
from .pipeline import RunConfig, RunRecord, run
from .sampling import coverage_probability

__all__ = [
    "AugmentationSpec",
    "Dataset",
    "RunConfig",
    "RunRecord",
    "accuracy",
    "ari",
    "coverage_probability",
    "evaluate",
    "generate_gaussian_mixture",
    "load_fixture",
    "nmi",
    "run",
    "save_fixture",
]

__version__ = "0.1.0"
