"""Triangulated surfaces, finite element pencils and closed-form reference spectra."""
from .generators import MODELS, generate_domain
from .mesh import SurfaceMesh, load_mesh, save_mesh
from .mixed import HERSCH_SETUPS, MixedFamily, hersch_family, hersch_value
from .pencils import (BoundaryConditionSpec, ConformalLaplacePencil, SteklovPencil,
                      assemble_conformal_laplace, assemble_steklov)
from .reference import reference_spectrum
