from .gdt import gdt_quadratic, gdt_quadratic_2d
from .inference import configuration_score, infer_mps, infer_ps
from .model import (ConfigurationError, MpsModel, PoseEstimate, PsComponent, SpatialTerm, Tree,
                    assign_appearance_sharing, learn_spatial_terms, unary_map)

__all__ = [
    "gdt_quadratic", "gdt_quadratic_2d", "configuration_score", "infer_mps", "infer_ps",
    "ConfigurationError", "MpsModel", "PoseEstimate", "PsComponent", "SpatialTerm", "Tree",
    "assign_appearance_sharing", "learn_spatial_terms", "unary_map",
]
