"""Size-and-shape clustering of contours and meshes represented as currents."""

__version__ = "0.1.0"

from .clustering import (  # noqa: E402
    ClusterModel,
    ValidationReport,
    adjusted_rand_index,
    kernel_kmeans,
    objective,
    point_to_centroid_sq,
    silhouette,
    sweep_k,
)
from .geometry import (  # noqa: E402
    Polyline2D,
    ShapeAtoms,
    TriMesh,
    curve_to_atoms,
    mesh_to_atoms,
    transform_shape,
)
from .meshio import load_shape, save_shape  # noqa: E402
from .rkhs import (  # noqa: E402
    GramMatrix,
    KernelConfig,
    WeightedAtoms,
    distance,
    gram_matrix,
    inner_product,
    kernel_scalar,
    lambda_heuristic,
    mean_field,
)
