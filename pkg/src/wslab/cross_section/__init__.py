"""Cross-section shapes, meshes, forms and modes."""
from .shapes import CrossSectionShape, is_rotationally_invariant, rotation
from .mesh import Mesh2D, generate_mesh, refine, save_mesh, load_mesh

__all__ = ["CrossSectionShape", "is_rotationally_invariant", "rotation", "Mesh2D",
           "generate_mesh", "refine", "save_mesh", "load_mesh"]
