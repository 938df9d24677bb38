"""Static analysis of a repository: scanning, references and grouping."""

from . import repo_model
from .repo_model import RepoModel, SourceFile, scan_repo, token_estimate

from . import ref_index
from .ref_index import ReferenceGraph, build_reference_graph, neighbors

from . import grouper
from .grouper import GroupPlan, plan_groups
