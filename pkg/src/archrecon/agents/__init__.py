"""Agents turning the static analysis into summaries, a README and diagrams."""

from . import summarizer
from .summarizer import FileSummary, summarize_file, summarize_repo

from . import readme
from .readme import find_entry_points, generate_readme, trace_downstream

from . import architect
from .architect import build_architecture, generate_partial
