"""Eigenvalues of parametric pencils on triangulated surfaces and their criticality."""
from .derivatives import (combination_right_derivative, directional_derivative, lipschitz_probe,
                          normalized_value_and_derivative, one_sided_derivatives)
from .errors import (ArgumentError, ConfigError, ConsistencyError, DecompositionError, EigencritError,
                     InvalidParameterError, MeshFormatError, NoClosedFormError, NumericalError,
                     ValidationError)
from .euler_lagrange import (QuadricMap, ResidualReport, assemble_el_candidate, assemble_mixed_candidate,
                             converse_weights, el_residual)
from .functionals import CombinationSpec, ScalingSpec
from .mixing import (MixResult, WeightedFrameCombo, birkhoff_decompose, majorization_check, mix_frames)
from .optimizer import OptimizeConfig, Trajectory, optimize, subgradient
from .pencil import (AffinePencil, ClusteredSpectrum, ParametricPencil, solve_spectrum, solve_through)
from .subdiff import (CriticalityReport, SearchBudget, SupportQuery, classical_subdiff_probe,
                      criticality_certificate, support_function)

__version__ = "0.1.0"
