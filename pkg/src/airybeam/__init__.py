"""Closed-form Airy beam design and angular-spectrum simulation for blocked near-field links."""

from .analytic import (AnalyticContext, closed_form_field_ula, closed_form_field_upa,
                       magnitude_on_trajectory, magnitude_upa, trajectory_ula, trajectory_upa)
from .design import (Anchors, DesignSolution, anchors_ula, design_ula,
                     design_upa_mode1, design_upa_mode2, select_bending_dimension,
                     solve_airy_ula)
from .errors import (AiryBeamError, AliasingWarning, ConfigurationError, DegenerateChannelError,
                     DegenerateParameterError, DomainError, GeometryError,
                     InfeasibleDesignError, OracleError)
from .numerics import ComplexField, Grid1D, Grid2D, airy_ai, airy_ai_prime
from .phase import AiryParams, ApertureWindow, airy_weights, element_weights
from .propagation import PropagationSettings, propagate_blocked, propagate_free
from .scenario import (ArraySpec, BlockageSpec, Scenario, blockage_ratio, ula_scenario,
                       upa_scenario, wavelength_from_frequency)

__version__ = "0.1.0"
