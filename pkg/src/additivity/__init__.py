"""Hypothesis tests for feature significance and additivity on subbagged tree ensembles."""

__version__ = "0.1.0"

from .design import (
    DesignMatrix,
    anova_residual_projector,
    build_main_effects_Z,
    build_partial_Z,
    design_for,
    partial_design,
    significance_design,
    total_design,
    weighted_anova_design,
)
from .ensemble import (
    CovarianceEstimate,
    EnsembleFit,
    InternalConfig,
    build_internal,
    estimate_covariance,
)
from .errors import (
    AdditivityError,
    ConfigurationError,
    DegenerateDesignError,
    DomainError,
    IngestionError,
    PartitionError,
    RankError,
    SingularMatrixError,
)
from .grid import FeatureGroup, TestGrid, make_grid, quantile_group, quantile_levels
from .hypotest import TestReport, end_to_end_test, run_grid_test
from .numerics import (
    RngStream,
    bates_quantile,
    chi_sq_cdf,
    chi_sq_quantile,
    gram_schmidt_columns,
    sample_std_normal,
    solve_spd,
)
from .rptest import (
    ProjectionConfig,
    ProjectionReport,
    projected_statistic,
    run_projection_test,
    sample_projection,
)
from .simlab import SimResult, SimSpec, ols_interaction_ttest, registry_eval, run_campaign
from .tree import Dataset, RegressionTree, TreeConfig, fit_tree, predict_tree
