"""Three-phase unbalanced distribution grids as rank-4 admittance hypermatrices."""

from .admittance import (
    DenseAdmittance,
    apply_dense,
    build,
    check_diagonal_dominance,
    check_minor_symmetry,
    invert3,
)
from .errors import (
    CorruptStructureError,
    FeederError,
    FeederSchemaError,
    FeederSemanticError,
    FeederSyntaxError,
    GridflowError,
    SingularMatrixError,
    UndervoltageError,
    ZeroDiagonalError,
)
from .model import (
    Branch,
    Diagnostic,
    FeederModel,
    Load,
    load_feeder,
    parse_feeder,
    serialize_feeder,
    validate_feeder,
)
from .sparse import (
    SparseAdmittance,
    apply_sparse,
    compress,
    decompress,
    memory_positions,
)

__version__ = "0.1.0"
