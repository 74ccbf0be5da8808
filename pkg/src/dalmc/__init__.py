"""Discriminative anchor learning for multi-view clustering."""
from .cluster import KMeansConfig, KMeansResult, kmeans_fit
from .data import (DatasetManifest, SynthSpec, generate_synthetic, load_dataset, normalize,
                   read_manifest, save_dataset)
from .errors import (DalmcError, DataError, DatasetIOError, FormatError, InvalidConfig,
                     InvalidInput, InvalidShape, NumericalFailure, ParseError)
from .linalg import ThinSvd, linear_orthogonal_max, thin_svd
from .metrics import MetricBundle, acc, evaluate, hungarian, nmi, pairwise_f1, purity
from .solver import (FitReport, MultiViewDataset, SolverConfig, SolverState, fit, init_state,
                     lower_bound, objective)

__version__ = "0.1.0"
