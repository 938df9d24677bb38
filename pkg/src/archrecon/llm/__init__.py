from . import gateway
from .gateway import Gateway, LlmRequest, LlmResponse

from . import prompts
from . import mock
from .mock import MockBackend
