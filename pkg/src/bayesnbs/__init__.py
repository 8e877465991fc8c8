from . import bac_math
from . import posterior
from . import oracles
from . import bayes_learn
from . import screening
from . import baselines
from . import harness
from . import utils

from .version import __version__
