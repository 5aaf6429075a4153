"""Domain-of-attraction estimation for polynomial maps via Lyapunov series."""
from .errors import *  # noqa: F401,F403
from .extfloat import ExtArray, ExtFloat
from .polymap import (PolyMap, eval_map, jacobian_at_zero, parse_map, serialize_map,
                      shift_to_origin, spectral_norm)
from .series import (TruncatedSeries, compose_with_map, eval_series, multiply, read_embryo,
                     taylor_shift, write_embryo)

__version__ = "0.1.0"
