"""Travel-time tensor tomography on the unit disk.

Simulates multistatic travel-time data as elliptic Radon transforms,
bridges flat isochrones to the normal Radon transform of symmetric rank-2
tensor fields, splits fields into solenoidal and potential parts, and
reconstructs the solenoidal part by a truncated singular value expansion
in a Zernike-component basis.
"""

from .decomposition import (Decomposition, closed_form_discrepancy_report,
                            make_null_field, make_solenoidal, mollify_atoms,
                            singular_support_score, solenoidal_projection,
                            visible_part,
                            worked_example_G, worked_example_delta_coeff,
                            worked_example_dV_smooth)
from .errors import (BandlimitError, ConfigError, DegenerateIsochroneError,
                     GridError, InconsistentDataError, InputDomainError,
                     OutOfSceneError, PaddingError,
                     SingularConfigurationError, TensorTomoError)
from .estimator import TruncatedSVEReconstructor
from .forward import (ReflectivityModel, Sinogram, elliptic_radon,
                      multistatic_sinogram, normal_radon_point, scalar_radon,
                      sinogram, volume_transform)
from .geometry import (Isochrone, SceneGeometry, average_azimuth,
                       bistatic_angle, flat_validity_ratio, isochrone,
                       max_curvature_2d, max_gauss_curvature_3d,
                       tangent_line_at_scene)
from .phantoms import (Inclusion, SceneSpec, add_noise,
                       corner_reflector_profile, deviatoric_delta,
                       disk_indicator_field, hemisphere_mask, mollifier_2d,
                       scene_to_reflectivity)
from .sve import (ImageBasis, SVESystem, assemble_forward, build_basis,
                  factorize, reconstruct, reconstruct_worked_example,
                  recover_scalar_from_normal_data, worked_example_sinogram)
from .tensors import (AngularProfile, SymTensor, TensorField, contract,
                      divergence, even_odd_split, l2_norm, pointwise_dot,
                      profile_to_tensors, sym_derivative, tensors_to_profile)

__version__ = "1.0.0"

__all__ = [name for name in dir() if not name.startswith("_")]
