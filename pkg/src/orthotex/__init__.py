"""When do orthographic texture warps determine shape and texture uniquely?"""
from .warp_core import (SymMat2, Tolerances, WarpFactors, compose, cone_check, decompose,
                        gram_deficit, validate, warp_to_normal)
from .cone_geometry import (ConeShift, ConicClass, Plane, UniqueReason, Verdict, affine_rank,
                            ambiguity_verdict, b_from_shift, family_sample, fit_plane,
                            shift_from_plane, slice_conic_class, verify_alternative)
from .recovery import (GoodWarpSet, MetricSolution, TextureSpec, align_rotation, metric_to_b,
                       recover_metric, transported_periods, upgrade)
from .synthgen import (HemisphereConfig, Rng, hemisphere_alt_b, hemisphere_warp, phi,
                       random_good_set, random_warp, rng_next)

__version__ = "0.1.0"
