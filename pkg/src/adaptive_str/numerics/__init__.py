"""Extended-range scalars, small symmetric linear algebra, seeded streams."""

from .extended import (
    BIG,
    LEVEL_SAT,
    LN_BIG,
    ONE,
    SAT_NEG,
    SAT_POS,
    ZERO,
    ExtendedReal,
    OpKind,
    ext,
    ext_abs,
    ext_add,
    ext_apply,
    ext_cmp,
    ext_div,
    ext_dot,
    ext_exp,
    ext_ln,
    ext_mul,
    ext_neg,
    ext_norm,
    ext_pow,
    format_ext,
    parse_ext,
)
from .linalg import (
    NORMALIZED_THRESHOLD,
    eigenvalues,
    ldl_inverse,
    ldl_logdet,
    ldl_solve,
    logdet_rank_one_update,
    min_eigenvalue,
)
from .rng import (
    STREAM_NOISE,
    STREAM_SURROGATE,
    STREAM_THETA,
    RngState,
    next_gaussian,
    seed_stream,
)
