"""Jackknife variance estimates for randomized low-rank approximation."""

from . import harness, jack, kernels, nystrom, rsvd, testmat
from ._accel import NUMBA_ENABLED
from .cores import CoreReplicates
from .errors import (CsvParseError, DegeneracyError, IngestionError, MatrixFormatError,
                     MemoryCapError, ParameterError)
from .jack import (JackknifeEstimate, jack_frobenius, jack_schatten, quenouille_bias,
                   singular_value_tukey, truncate_cores, tukey_scalar)
from .nystrom import NystromResult
from .rsvd import RsvdResult
from .testmat import (MatrixSource, gaussian_sketch, gen_exp_decay, gen_noisy_lr,
                      gen_poly_decay, load_matrix, rbf_kernel, save_matrix)

__version__ = "0.1.0"
