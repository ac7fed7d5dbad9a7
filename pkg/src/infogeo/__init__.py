"""Information-geometric dimensionality reduction over collections of datasets."""
from .data import Collection, DataSet, load_collection, save_collection, synth_gaussian_collection
from .divergence import (
    Metric,
    TValues,
    estimate_divergence,
    fisher_approximation,
    gaussian_divergence_oracle,
    t_values,
)
from .embedding import Embedding, classical_mds, fine_embed
from .errors import DataFileError, InfoGeoError, NumericalError, ValidationError
from .geodesic import DistanceMatrix, geodesic_distances, pairwise_distances
from .ipca import (
    Cost,
    IpcaConfig,
    IpcaResult,
    ProjectionMatrix,
    constrain_gradient,
    cost_gradient,
    cost_value,
    dG_dT_weighted,
    divergence_gradient,
    ipca_fit,
    variable_ranking,
)
from .kde import DensityEstimate, density_eval, max_smoothing_bandwidth

__version__ = "0.1.0"
