"""Random trigonometric networks and the Gaussian-process kernels they converge to."""

from .bayes_linear import *  # noqa: F401,F403
from .distributions import *  # noqa: F401,F403
from .errors import InputError, NumericalError, ParseError, TrigKernelError
from .gp_regression import *  # noqa: F401,F403
from .kernels import *  # noqa: F401,F403
from .montecarlo import *  # noqa: F401,F403
from .networks import *  # noqa: F401,F403

__version__ = "0.1.0"
