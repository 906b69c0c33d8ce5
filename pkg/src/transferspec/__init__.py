"""transferspec: resonance spectra of stochastic dynamical systems from
reduced transfer (Markov) operators estimated on box partitions, with
correlation/PSD reconstruction and analytic small-noise ground truth for
the planar oscillator normal form."""

__version__ = "0.1.0"

from .config import RunConfig, config_from_dict, load_config, save_config
from .eigen import (
    EigenPair,
    Resonance,
    ResonanceSet,
    condition_number,
    filter_and_sort,
    leading_eigenpairs,
    pair_and_ratio,
    single_lag_resonances,
    to_generator,
)
from .hopf import HopfParams, SimConfig, Trajectory, drift, jacobian, simulate
from .oracle import (
    FloquetData,
    ResonanceLattice,
    floquet_analysis,
    fp_eigenfunction,
    fp_lattice,
    fundamental_matrix,
    phase_diffusion_analytic,
    phase_diffusion_numeric,
    po_eigenfunction,
    po_lattice,
    po_lattice_general,
)
from .partition import GridSpec, SojournDensity, locate, sojourn_density, standardize
from .spectral import (
    ObservableVec,
    SpectralWeights,
    observable_mean,
    reconstruct_correlation,
    reconstruct_psd,
    sample_correlation,
    sample_psd,
    weights,
)
from .transfer import (
    TransitionCounts,
    TransitionMatrix,
    common_kept_boxes,
    count_transitions,
    normalize,
    normalize_on,
    restrict_density,
)

__all__ = [name for name in dir() if not name.startswith("_")]
