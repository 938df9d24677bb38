from . import model
from .model import ArchDiagram, DiagramEdge, DiagramNode, Layer, PartialDiagram

from . import mermaid
from .mermaid import parse_mermaid, to_mermaid

from . import merge
from .merge import merge_diagrams
