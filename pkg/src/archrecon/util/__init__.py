from . import parser
from . import errors
from . import utils
from . import config
